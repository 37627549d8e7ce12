#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vpsim/knowledge_base.hpp"
#include "vpsim/persona.hpp"

namespace vpsim::scenario {

// Section bodies. Placeholders use {{name}}.
//   role:        age_band gender personality communication_style affect_tone
//   symptoms:    syndrome symptom_list
//   empathy:     affect_variation
//   consistency, safety: none
struct PromptTemplates {
  std::string role;
  std::string symptoms;
  std::string consistency;
  std::string empathy;
  std::string safety;

  static const PromptTemplates& builtin();
  // Reads role.txt, symptoms.txt, consistency.txt, empathy.txt, safety.txt.
  static PromptTemplates load(const std::string& dir);
};

struct PromptPolicy {
  // Lets the model drift in affect within the persona's baseline.
  bool allow_affect_variation = true;
  std::vector<std::string> extra_empathy_rules;
  std::vector<std::string> extra_safety_rules;
};

inline constexpr std::string_view kRoleHeader = "## Patient role";
inline constexpr std::string_view kSymptomHeader = "## Symptoms and medical context";
inline constexpr std::string_view kConsistencyHeader = "## Consistency across turns";
inline constexpr std::string_view kEmpathyHeader = "## Empathy and appropriateness";
inline constexpr std::string_view kSafetyHeader = "## Safety";

// Always present in the safety section regardless of template.
inline constexpr std::string_view kSafetyRule =
    "Never give a diagnosis or name a possible diagnosis, and never recommend tests, "
    "medications, or any treatment. Those decisions belong to the doctor.";

struct SystemPrompt {
  std::string role_section;
  std::string symptom_section;
  std::string consistency_section;
  std::string empathy_section;
  std::string safety_section;
  std::string rendered;

  bool operator==(const SystemPrompt&) const = default;
};

// Deterministic in its inputs. Throws Error(invalid_argument) when the
// scenario has no symptoms.
SystemPrompt build_system_prompt(const kb::ScenarioSpec& scenario, const PersonaProfile& persona,
                                 const PromptPolicy& policy = {},
                                 const PromptTemplates& templates = PromptTemplates::builtin());

}  // namespace vpsim::scenario
