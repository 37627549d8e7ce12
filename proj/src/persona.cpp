#include "vpsim/persona.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <numeric>

#include "vpsim/assets.hpp"
#include "vpsim/error.hpp"
#include "vpsim/random.hpp"
#include "vpsim/text.hpp"

namespace vpsim::scenario {

namespace {

constexpr std::array<std::string_view, kAgeBandCount> kAgeNames{"young_adult", "adult", "middle_aged",
                                                                "older_adult"};
constexpr std::array<std::string_view, kAgeBandCount> kAgePhrases{
    "a young adult in your twenties", "an adult in your thirties or early forties",
    "middle-aged, between 45 and 64", "an older adult over 65"};
constexpr std::array<std::string_view, kCommunicationStyleCount> kStyleNames{
    "terse", "talkative", "anxious", "guarded", "cooperative"};
constexpr std::array<std::string_view, kAffectToneCount> kAffectNames{"flat", "worried", "irritable",
                                                                      "warm"};

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::string_view, N>& names, std::string_view what) {
  const auto v = text::normalize(s);
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == v) return static_cast<E>(i);
  }
  throw Error(ErrorCode::invalid_argument, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(AgeBand v) { return kAgeNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(CommunicationStyle v) { return kStyleNames[static_cast<std::size_t>(v)]; }
std::string_view to_string(AffectTone v) { return kAffectNames[static_cast<std::size_t>(v)]; }
std::string_view describe(AgeBand v) { return kAgePhrases[static_cast<std::size_t>(v)]; }

AgeBand parse_age_band(std::string_view s) { return parse_enum<AgeBand>(s, kAgeNames, "age band"); }
CommunicationStyle parse_communication_style(std::string_view s) {
  return parse_enum<CommunicationStyle>(s, kStyleNames, "communication style");
}
AffectTone parse_affect_tone(std::string_view s) { return parse_enum<AffectTone>(s, kAffectNames, "affect tone"); }

void PersonaProfile::validate() const {
  if (text::trim(gender_descriptor).empty()) {
    throw Error(ErrorCode::invalid_argument, "persona: empty gender descriptor");
  }
  if (personality_tags.empty()) {
    throw Error(ErrorCode::invalid_argument, "persona: at least one personality tag is required");
  }
  for (const auto& t : personality_tags) {
    if (text::trim(t).empty()) throw Error(ErrorCode::invalid_argument, "persona: empty personality tag");
  }
}

const PersonaCatalog& PersonaCatalog::builtin() {
  static const PersonaCatalog catalog{
      text::catalog_lines(assets::builtin("personas/genders.txt")),
      text::catalog_lines(assets::builtin("personas/personality_tags.txt")),
  };
  return catalog;
}

PersonaCatalog PersonaCatalog::load(const std::string& dir) {
  const std::filesystem::path base(dir);
  PersonaCatalog c{text::catalog_lines(text::read_file((base / "genders.txt").string())),
                   text::catalog_lines(text::read_file((base / "personality_tags.txt").string()))};
  if (c.gender_descriptors.empty() || c.personality_tags.empty()) {
    throw Error(ErrorCode::invalid_argument, "persona catalog in " + dir + " has an empty list");
  }
  return c;
}

PersonaProfile generate_persona(std::uint64_t seed, const PersonaCatalog& catalog) {
  if (catalog.gender_descriptors.empty() || catalog.personality_tags.empty()) {
    throw Error(ErrorCode::invalid_argument, "persona catalog has an empty list");
  }
  Rng rng(seed ^ 0x70657273'6f6e6131ULL);
  PersonaProfile p;
  p.age_band = static_cast<AgeBand>(rng.index(kAgeBandCount));
  p.gender_descriptor = catalog.gender_descriptors[rng.index(catalog.gender_descriptors.size())];

  // One to three distinct tags by partial Fisher-Yates.
  const std::size_t max_tags = std::min<std::size_t>(3, catalog.personality_tags.size());
  const std::size_t n_tags = 1 + rng.index(max_tags);
  std::vector<std::size_t> order(catalog.personality_tags.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < n_tags; ++i) {
    std::swap(order[i], order[i + rng.index(order.size() - i)]);
    p.personality_tags.push_back(catalog.personality_tags[order[i]]);
  }

  p.communication_style = static_cast<CommunicationStyle>(rng.index(kCommunicationStyleCount));
  p.affect_tone = static_cast<AffectTone>(rng.index(kAffectToneCount));
  return p;
}

bool PersonaOverrides::empty() const {
  return !age_band && !gender_descriptor && !personality_tags && !communication_style && !affect_tone;
}

PersonaProfile apply_overrides(PersonaProfile base, const PersonaOverrides& o) {
  if (o.age_band) base.age_band = *o.age_band;
  if (o.gender_descriptor) base.gender_descriptor = *o.gender_descriptor;
  if (o.personality_tags) base.personality_tags = *o.personality_tags;
  if (o.communication_style) base.communication_style = *o.communication_style;
  if (o.affect_tone) base.affect_tone = *o.affect_tone;
  base.validate();
  return base;
}

}  // namespace vpsim::scenario
