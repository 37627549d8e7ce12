#include <set>

#include "doctest.h"
#include "vpsim/knowledge_base.hpp"
#include "vpsim/memory.hpp"
#include "vpsim/persona.hpp"
#include "vpsim/prompt.hpp"
#include "vpsim/random.hpp"

using namespace vpsim;
using namespace vpsim::scenario;

namespace {

kb::ScenarioSpec flu() { return {"influenza", {"fever", "cough"}, 7}; }

std::size_t count_of(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("persona generation is deterministic and valid") {
  CHECK(generate_persona(5) == generate_persona(5));
  auto p0 = generate_persona(0);
  CHECK_NOTHROW(p0.validate());
  CHECK_FALSE(p0.personality_tags.empty());
  CHECK_FALSE(p0.gender_descriptor.empty());
  std::set<std::string> tags(p0.personality_tags.begin(), p0.personality_tags.end());
  CHECK(tags.size() == p0.personality_tags.size());
}

TEST_CASE("1000 seeds cover every communication style and affect tone") {
  std::set<CommunicationStyle> styles;
  std::set<AffectTone> tones;
  std::set<AgeBand> ages;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto p = generate_persona(seed);
    CHECK_NOTHROW(p.validate());
    styles.insert(p.communication_style);
    tones.insert(p.affect_tone);
    ages.insert(p.age_band);
  }
  CHECK(styles.size() == kCommunicationStyleCount);
  CHECK(tones.size() == kAffectToneCount);
  CHECK(ages.size() == kAgeBandCount);
}

TEST_CASE("enum names round trip") {
  for (auto s : {CommunicationStyle::terse, CommunicationStyle::talkative, CommunicationStyle::anxious,
                 CommunicationStyle::guarded, CommunicationStyle::cooperative}) {
    CHECK(parse_communication_style(to_string(s)) == s);
  }
  for (auto t : {AffectTone::flat, AffectTone::worried, AffectTone::irritable, AffectTone::warm}) {
    CHECK(parse_affect_tone(to_string(t)) == t);
  }
  CHECK_THROWS_AS(parse_age_band("ancient"), Error);
}

TEST_CASE("overrides replace fields and are validated") {
  PersonaOverrides o;
  o.communication_style = CommunicationStyle::guarded;
  o.personality_tags = std::vector<std::string>{"stoic"};
  auto p = apply_overrides(generate_persona(3), o);
  CHECK(p.communication_style == CommunicationStyle::guarded);
  CHECK(p.personality_tags == std::vector<std::string>{"stoic"});
  PersonaOverrides bad;
  bad.personality_tags = std::vector<std::string>{};
  CHECK_THROWS_AS(apply_overrides(generate_persona(3), bad), Error);
}

TEST_CASE("system prompt has all five sections once, in order") {
  auto p = build_system_prompt(flu(), generate_persona(1));
  CHECK(p.rendered.find("fever") != std::string::npos);
  CHECK(p.rendered.find("cough") != std::string::npos);
  CHECK(p.symptom_section.find("fever") != std::string::npos);
  std::size_t last = 0;
  for (auto h : {kRoleHeader, kSymptomHeader, kConsistencyHeader, kEmpathyHeader, kSafetyHeader}) {
    CHECK(count_of(p.rendered, h) == 1);
    const auto pos = p.rendered.find(h);
    CHECK(pos >= last);
    last = pos;
  }
  CHECK(p.safety_section.find(kSafetyRule) != std::string::npos);
  CHECK(p.safety_section.find("diagnosis") != std::string::npos);
  CHECK(p.safety_section.find("treatment") != std::string::npos);
}

TEST_CASE("system prompt is deterministic and rejects an empty symptom list") {
  auto a = build_system_prompt(flu(), generate_persona(9));
  auto b = build_system_prompt(flu(), generate_persona(9));
  CHECK(a.rendered == b.rendered);
  kb::ScenarioSpec empty{"x", {}, 0};
  CHECK_THROWS_AS(build_system_prompt(empty, generate_persona(9)), Error);
}

TEST_CASE("policy switches affect variation and appends extra rules") {
  PromptPolicy steady;
  steady.allow_affect_variation = false;
  steady.extra_safety_rules = {"Do not mention medication names."};
  auto a = build_system_prompt(flu(), generate_persona(2), steady);
  auto b = build_system_prompt(flu(), generate_persona(2));
  CHECK(a.empathy_section != b.empathy_section);
  CHECK(a.safety_section.find("medication names") != std::string::npos);
}

TEST_CASE("property: every scenario symptom appears verbatim in the prompt") {
  Rng rng(11);
  const std::vector<std::string> pool{"fever", "dry cough", "night sweats", "joint pain", "blurred vision", "rash"};
  for (int i = 0; i < 100; ++i) {
    kb::ScenarioSpec s{"condition " + std::to_string(i), {}, static_cast<std::uint64_t>(i)};
    for (std::size_t k = 0, n = 1 + rng.index(pool.size()); k < n; ++k) {
      const auto& sym = pool[rng.index(pool.size())];
      if (std::find(s.symptoms.begin(), s.symptoms.end(), sym) == s.symptoms.end()) s.symptoms.push_back(sym);
    }
    auto p = build_system_prompt(s, generate_persona(i));
    for (const auto& sym : s.symptoms) CHECK(p.rendered.find(sym) != std::string::npos);
  }
}

TEST_CASE("memory window and eviction") {
  ConversationMemory m(2, 1000);
  auto one = m.append(Speaker::doctor, "hello");
  CHECK(one.size() == 1);
  CHECK(m.empty());  // value semantics

  auto mem = m;
  for (int i = 1; i <= 5; ++i) mem = append_turn(mem, Speaker::doctor, "turn " + std::to_string(i));
  REQUIRE(mem.size() == 2);
  CHECK(mem.turns()[0].text == "turn 4");
  CHECK(mem.turns()[1].text == "turn 5");
  CHECK_THROWS_AS((void)m.append(Speaker::doctor, ""), Error);
}

TEST_CASE("char budget smaller than the newest turn keeps only that turn, truncated") {
  ConversationMemory m(12, 10);
  auto mem = m.append(Speaker::doctor, "short").append(Speaker::patient, "this reply is far too long");
  REQUIRE(mem.size() == 1);
  CHECK(mem.turns()[0].truncated);
  CHECK(mem.turns()[0].text == "this reply");
  CHECK(mem.char_count() <= 10);
}

TEST_CASE("char budget wins over window") {
  ConversationMemory m(10, 12);
  auto mem = m.append(Speaker::doctor, "aaaa").append(Speaker::patient, "bbbb").append(Speaker::doctor, "cccccc");
  CHECK(mem.size() == 2);
  CHECK(mem.char_count() <= 12);
}

TEST_CASE("property: retained turns are a contiguous suffix of what was appended") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    ConversationMemory mem(1 + rng.index(6), 5 + rng.index(60));
    std::vector<std::string> appended;
    for (std::size_t i = 0, n = 1 + rng.index(20); i < n; ++i) {
      std::string t(1 + rng.index(15), static_cast<char>('a' + i % 26));
      t += std::to_string(i);
      appended.push_back(t);
      mem = mem.append(i % 2 ? Speaker::patient : Speaker::doctor, t);
      CHECK(mem.size() <= mem.window());
      CHECK(mem.char_count() <= mem.char_budget());
    }
    const auto& kept = mem.turns();
    REQUIRE_FALSE(kept.empty());
    const std::size_t offset = appended.size() - kept.size();
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const auto& want = appended[offset + i];
      if (kept[i].truncated) {
        CHECK(i + 1 == kept.size());
        CHECK(want.rfind(kept[i].text, 0) == 0);
      } else {
        CHECK(kept[i].text == want);
      }
    }
  }
}

TEST_CASE("render_context orders messages and respects the budget") {
  auto prompt = build_system_prompt(flu(), generate_persona(4));
  ConversationMemory empty(12, 8000);
  auto msgs = render_context(prompt, empty, "Hello");
  REQUIRE(msgs.size() == 2);
  CHECK(msgs[0].role == Role::system);
  CHECK(msgs[1].role == Role::user);
  CHECK(msgs[1].content == "Hello");

  auto two = empty.append(Speaker::doctor, "How are you?").append(Speaker::patient, "Not great.");
  msgs = render_context(prompt, two, "Since when?");
  REQUIRE(msgs.size() == 4);
  CHECK(msgs[1].content == "How are you?");
  CHECK(msgs[1].role == Role::user);
  CHECK(msgs[2].content == "Not great.");
  CHECK(msgs[2].role == Role::assistant);
  CHECK(msgs[3].content == "Since when?");

  CHECK_THROWS_AS(render_context(prompt, empty, "  "), Error);
}

TEST_CASE("render_context drops oldest turns from an over-budget memory") {
  auto prompt = build_system_prompt(flu(), generate_persona(4));
  std::deque<MemoryTurn> turns{{Speaker::doctor, std::string(10, 'a'), false},
                               {Speaker::patient, std::string(10, 'b'), false},
                               {Speaker::doctor, std::string(10, 'c'), false},
                               {Speaker::patient, std::string(10, 'd'), false}};
  auto mem = ConversationMemory::from_turns(12, 25, turns);
  auto msgs = render_context(prompt, mem, "hi");
  REQUIRE(msgs.size() == 4);
  CHECK(msgs[0].content == prompt.rendered);
  CHECK(msgs[1].content == std::string(10, 'c'));
  CHECK(msgs[2].content == std::string(10, 'd'));
  std::size_t size = 0;
  for (std::size_t i = 1; i < msgs.size(); ++i) size += msgs[i].content.size();
  CHECK(size <= 25);
}

TEST_CASE("syndrome name only appears in the system message") {
  auto prompt = build_system_prompt(flu(), generate_persona(4));
  CHECK(prompt.rendered.find("influenza") != std::string::npos);
  auto mem = ConversationMemory(12, 8000).append(Speaker::doctor, "What is wrong?").append(Speaker::patient,
                                                                                            "I have a fever.");
  auto msgs = render_context(prompt, mem, "How long?");
  for (std::size_t i = 1; i < msgs.size(); ++i) CHECK(msgs[i].content.find("influenza") == std::string::npos);
}
