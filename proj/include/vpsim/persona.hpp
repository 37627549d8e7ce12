#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vpsim::scenario {

enum class AgeBand { young_adult, adult, middle_aged, older_adult };
enum class CommunicationStyle { terse, talkative, anxious, guarded, cooperative };
enum class AffectTone { flat, worried, irritable, warm };

inline constexpr std::size_t kAgeBandCount = 4;
inline constexpr std::size_t kCommunicationStyleCount = 5;
inline constexpr std::size_t kAffectToneCount = 4;

std::string_view to_string(AgeBand v);
std::string_view to_string(CommunicationStyle v);
std::string_view to_string(AffectTone v);
// Phrase used inside prompts, e.g. "in your twenties".
std::string_view describe(AgeBand v);

AgeBand parse_age_band(std::string_view s);
CommunicationStyle parse_communication_style(std::string_view s);
AffectTone parse_affect_tone(std::string_view s);

struct PersonaProfile {
  AgeBand age_band = AgeBand::adult;
  std::string gender_descriptor;
  std::vector<std::string> personality_tags;
  CommunicationStyle communication_style = CommunicationStyle::cooperative;
  AffectTone affect_tone = AffectTone::flat;

  // Throws Error(invalid_argument) if a field is empty.
  void validate() const;

  bool operator==(const PersonaProfile&) const = default;
};

struct PersonaCatalog {
  std::vector<std::string> gender_descriptors;
  std::vector<std::string> personality_tags;

  static const PersonaCatalog& builtin();
  // Reads genders.txt and personality_tags.txt from dir.
  static PersonaCatalog load(const std::string& dir);
};

PersonaProfile generate_persona(std::uint64_t seed,
                                const PersonaCatalog& catalog = PersonaCatalog::builtin());

struct PersonaOverrides {
  std::optional<AgeBand> age_band;
  std::optional<std::string> gender_descriptor;
  std::optional<std::vector<std::string>> personality_tags;
  std::optional<CommunicationStyle> communication_style;
  std::optional<AffectTone> affect_tone;

  bool empty() const;
};

// Throws Error(invalid_argument) when an override leaves the profile invalid.
PersonaProfile apply_overrides(PersonaProfile base, const PersonaOverrides& overrides);

}  // namespace vpsim::scenario
