#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include <unistd.h>

#include "doctest.h"
#include "vpsim/serialization.hpp"
#include "vpsim/session_manager.hpp"
#include "vpsim/text.hpp"

using namespace vpsim;
using namespace vpsim::service;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("vpsim_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

EnvLookup fake_env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](std::string_view name) -> std::optional<std::string> {
    auto it = vars.find(std::string(name));
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

void write(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

ServiceConfig test_config(const fs::path& dir) {
  ServiceConfig cfg;
  cfg.persistence_dir = dir.string();
  cfg.fsync = false;
  return cfg;
}

std::unique_ptr<SessionManager> manager(const fs::path& dir) {
  auto cfg = test_config(dir);
  return std::make_unique<SessionManager>(cfg, make_deps(cfg));
}

pipeline::Turn sample_turn(std::uint64_t id) {
  pipeline::Turn t;
  t.turn_id = id;
  t.doctor_text = "How are you \"today\"?";
  t.patient_text = "Not great.\nMy head hurts.";
  t.audio_ref = "turns/" + std::to_string(id) + "/audio";
  t.timings = {0.125, 0.5, 0.25, 0, 0.875};
  return t;
}

}  // namespace

TEST_CASE("config precedence: defaults, file, environment") {
  TempDir tmp;
  auto defaults = load_config("", fake_env({}));
  CHECK(defaults.adapter_mode == AdapterMode::mock);
  CHECK(defaults.memory_window == 12);
  CHECK(defaults.latency_budget_s == 1.5);

  const auto file = tmp.path / "cfg.json";
  write(file, R"({"memory":{"window":6,"char_budget":500},"latency_budget_s":2.0,"sentiment":{"blocking":true}})");
  auto from_file = load_config(file.string(), fake_env({}));
  CHECK(from_file.memory_window == 6);
  CHECK(from_file.memory_char_budget == 500);
  CHECK(from_file.latency_budget_s == 2.0);
  CHECK(from_file.sentiment_blocking);

  auto env = load_config(file.string(), fake_env({{"VPSIM_MEMORY_WINDOW", "3"}, {"VPSIM_LISTEN", "0.0.0.0:9000"}}));
  CHECK(env.memory_window == 3);
  CHECK(env.memory_char_budget == 500);
  CHECK(env.listen == "0.0.0.0:9000");
}

TEST_CASE("config rejects bad input") {
  TempDir tmp;
  const auto file = tmp.path / "cfg.json";
  write(file, R"({"memory":{"windw":6}})");
  CHECK_THROWS_AS(load_config(file.string(), fake_env({})), Error);
  write(file, "{not json");
  CHECK_THROWS_AS(load_config(file.string(), fake_env({})), Error);
  CHECK_THROWS_AS(load_config("", fake_env({{"VPSIM_MEMORY_WINDOW", "-1"}})), Error);
  CHECK_THROWS_AS(load_config("", fake_env({{"VPSIM_ADAPTER_MODE", "remote"}})), Error);
  CHECK_THROWS_AS(load_config("", fake_env({{"VPSIM_SENTIMENT_MODEL_ID", "gemma3"}})), Error);
  CHECK_THROWS_AS(load_config("", fake_env({{"VPSIM_LISTEN", "nope"}})), Error);
  CHECK_THROWS_AS(load_config((tmp.path / "missing.json").string(), fake_env({})), Error);
  auto ok = load_config("", fake_env({{"VPSIM_ADAPTER_MODE", "remote"},
                                      {"VPSIM_ADAPTER_TRANSCRIBER_URL", "http://127.0.0.1:1/stt"},
                                      {"VPSIM_ADAPTER_PATIENT_MODEL_URL", "http://127.0.0.1:1/llm"},
                                      {"VPSIM_ADAPTER_SYNTHESIZER_URL", "http://127.0.0.1:1/tts"},
                                      {"VPSIM_FSYNC", "false"}}));
  CHECK(ok.adapter_mode == AdapterMode::remote);
  CHECK_FALSE(ok.fsync);
}

TEST_CASE("listen addresses") {
  auto a = parse_listen("127.0.0.1:8080");
  CHECK(a.host == "127.0.0.1");
  CHECK(a.port == 8080);
  CHECK(parse_listen(":0").host == "0.0.0.0");
  CHECK_THROWS_AS(parse_listen("host:99999"), Error);
}

TEST_CASE("session log round trip") {
  TempDir tmp;
  SessionRecord rec;
  rec.session_id = "s1";
  rec.scenario = {"influenza", {"fever", "cough"}, 3};
  rec.persona = scenario::generate_persona(3);
  rec.prompt = scenario::build_system_prompt(rec.scenario, rec.persona);
  rec.created_at = utc_timestamp();
  const auto path = session_log_path(tmp.path, "s1");
  {
    SessionLogWriter w(path);
    w.write_header(rec);
    w.append_turn(sample_turn(1));
    auto failed = sample_turn(2);
    failed.status = pipeline::TurnStatus::failed;
    failed.patient_text.clear();
    failed.audio_ref.reset();
    failed.failure = pipeline::FailureCause{pipeline::Stage::synthesis, "protocol", "HTTP 500"};
    w.append_turn(failed);
    sentiment::ClassificationResult r;
    r.label = sentiment::SentimentLabel::positive;
    r.model_id = "rule";
    w.append_sentiment(1, r, 0.003);
  }
  auto back = read_session_log(path);
  CHECK(back.session_id == "s1");
  CHECK(back.scenario == rec.scenario);
  CHECK(back.persona == rec.persona);
  CHECK(back.prompt.rendered == rec.prompt.rendered);
  CHECK(back.status == SessionStatus::active);
  REQUIRE(back.turns.size() == 2);
  auto expected = sample_turn(1);
  expected.doctor_sentiment = sentiment::SentimentLabel::positive;
  expected.timings.sentiment_s = 0.003;
  CHECK(back.turns[0] == expected);
  CHECK(back.turns[1].failure->stage == pipeline::Stage::synthesis);

  {
    SessionLogWriter w(path);
    w.append_closed(utc_timestamp());
  }
  CHECK(read_session_log(path).status == SessionStatus::closed);
}

TEST_CASE("a torn final line is ignored, other damage is not") {
  TempDir tmp;
  SessionRecord rec;
  rec.session_id = "s2";
  rec.scenario = {"migraine", {"headache"}, 1};
  rec.persona = scenario::generate_persona(1);
  rec.prompt = scenario::build_system_prompt(rec.scenario, rec.persona);
  const auto path = session_log_path(tmp.path, "s2");
  {
    SessionLogWriter w(path, false);
    w.write_header(rec);
    w.append_turn(sample_turn(1));
  }
  const std::string good = text::read_file(path.string());
  write(path, good + R"({"kind":"turn","turn":{"turn_id":2,"doc)");
  CHECK(read_session_log(path).turns.size() == 1);

  write(path, good + "garbage\n");
  try {
    read_session_log(path);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse_error);
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  write(path, R"({"kind":"turn","turn":{}})" "\n");
  CHECK_THROWS_AS(read_session_log(path), Error);
}

TEST_CASE("event hub ordering and overflow") {
  EventHub hub("s", 3);
  auto fast = hub.subscribe();
  auto slow = hub.subscribe();
  for (int i = 0; i < 3; ++i) {
    hub.publish(EventKind::state, {{"state", "Thinking"}});
    auto ev = fast->next(1.0);
    REQUIRE(ev.has_value());
    CHECK(ev->seq == static_cast<std::uint64_t>(i + 1));
  }
  // slow now holds 3; the next publish overflows it but not fast.
  auto last = hub.publish(EventKind::turn_completed, {{"turn", 1}});
  CHECK(last.seq == 4);
  CHECK(slow->overflowed());
  CHECK(slow->closed());
  CHECK_FALSE(fast->overflowed());
  CHECK(fast->next(1.0)->kind == EventKind::turn_completed);
  int drained = 0;
  while (slow->next(0.01)) ++drained;
  CHECK(drained == 3);
  CHECK(hub.subscriber_count() == 1);
  auto j = last.to_json();
  CHECK(j["kind"] == "turn_completed");
  CHECK(j["session_id"] == "s");
  hub.close_all();
  CHECK(fast->closed());
  CHECK_FALSE(fast->next(0.01).has_value());
}

TEST_CASE("sessions are seeded, hide the syndrome and log durably") {
  TempDir tmp;
  auto m = manager(tmp.path);
  auto a = m->create_session(42);
  auto b = m->create_session(42);
  CHECK(a.session_id != b.session_id);
  CHECK(a.session_id.size() == 32);
  CHECK(a.persona == b.persona);
  auto ra = m->record(a.session_id);
  CHECK(ra.scenario == m->record(b.session_id).scenario);
  CHECK(ra.scenario.seed == 42);
  CHECK_FALSE(ra.scenario.symptoms.empty());
  CHECK(Json(a.persona).dump().find(ra.scenario.syndrome_name) == std::string::npos);

  auto turn = m->post_turn(a.session_id, std::string("What brings you in today?"));
  CHECK(turn.ok());
  CHECK(public_turn_json(turn).dump().find(ra.scenario.syndrome_name) == std::string::npos);
  CHECK(turn.patient_text.find(ra.scenario.syndrome_name) == std::string::npos);
  // Durable before post_turn returned.
  CHECK(read_session_log(session_log_path(tmp.path, a.session_id)).turns.size() == 1);
  CHECK(m->reply_audio(a.session_id, turn.turn_id).has_value());

  try {
    m->report(a.session_id);
    FAIL("expected session_active");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::session_active);
  }
  m->close_session(a.session_id);
  try {
    m->post_turn(a.session_id, std::string("Hello?"));
    FAIL("expected session_closed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::session_closed);
  }
  auto rep = m->report(a.session_id);
  CHECK(rep.debrief.syndrome_name == ra.scenario.syndrome_name);
  CHECK(rep.timeline.size() == 1);
  CHECK(rep.timeline[0].label.has_value());

  try {
    m->transcript("nope");
    FAIL("expected not_found");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::not_found);
  }
  CHECK_THROWS_AS(m->post_turn(b.session_id, std::string("   ")), Error);
}

TEST_CASE("persona overrides") {
  TempDir tmp;
  auto m = manager(tmp.path);
  scenario::PersonaOverrides o;
  o.affect_tone = scenario::AffectTone::worried;
  auto v = m->create_session(7, o);
  CHECK(v.persona.affect_tone == scenario::AffectTone::worried);
}

TEST_CASE("events for a turn arrive in causal order") {
  TempDir tmp;
  auto m = manager(tmp.path);
  auto s = m->create_session(1);
  auto sub = m->subscribe(s.session_id);
  m->post_turn(s.session_id, std::string("Thank you for coming in"));
  m->drain();
  std::vector<std::string> seen;
  std::uint64_t prev = 0;
  while (auto ev = sub->next(0.2)) {
    CHECK(ev->seq > prev);
    prev = ev->seq;
    seen.push_back(ev->kind == EventKind::state ? ev->payload["state"].get<std::string>()
                                                 : std::string(to_string(ev->kind)));
    if (ev->kind == EventKind::sentiment_attached) break;
  }
  CHECK(seen == std::vector<std::string>{"Listening", "Thinking", "Speaking", "turn_completed", "Idle",
                                         "sentiment_attached"});
  CHECK_THROWS_AS(m->subscribe("missing"), Error);
}

TEST_CASE("sessions survive a restart") {
  TempDir tmp;
  std::string id;
  std::vector<pipeline::Turn> before;
  {
    auto m = manager(tmp.path);
    id = m->create_session(9).session_id;
    for (const char* q : {"Hi", "Where does it hurt?", "Since when?"}) m->post_turn(id, std::string(q));
    m->drain();
    before = m->transcript(id);
  }
  write(tmp.path / "junk.jsonl", "not a log\n");
  auto m = manager(tmp.path);
  CHECK(m->recovered_sessions() == 1);
  auto after = m->transcript(id);
  REQUIRE(after.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(after[i].turn_id == i + 1);
    CHECK(after[i].doctor_text == before[i].doctor_text);
    CHECK(after[i].patient_text == before[i].patient_text);
  }
  auto next = m->post_turn(id, std::string("Anything else?"));
  CHECK(next.turn_id == 4);
  CHECK(m->view(id).status == SessionStatus::active);
}

TEST_CASE("concurrent creation yields unique ids") {
  TempDir tmp;
  auto m = manager(tmp.path);
  std::mutex mu;
  std::set<std::string> ids;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 25; ++i) {
        auto id = m->create_session().session_id;
        std::lock_guard lock(mu);
        ids.insert(id);
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ids.size() == 200);
  CHECK(m->session_ids().size() == 200);
}

TEST_CASE("independent sessions run turns in parallel") {
  TempDir tmp;
  auto m = manager(tmp.path);
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(m->create_session(static_cast<std::uint64_t>(i)).session_id);
  std::atomic<int> failures{0};
  std::vector<std::thread> threads;
  for (const auto& id : ids) {
    threads.emplace_back([&, id] {
      for (int k = 0; k < 5; ++k) {
        if (!m->post_turn(id, std::string("Question ") + std::to_string(k)).ok()) ++failures;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(failures == 0);
  for (const auto& id : ids) CHECK(m->transcript(id).size() == 5);
}
