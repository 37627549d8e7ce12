#include "vpsim/prompt.hpp"

#include <filesystem>
#include <sstream>

#include "vpsim/assets.hpp"
#include "vpsim/error.hpp"
#include "vpsim/text.hpp"

namespace vpsim::scenario {

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates t{
      std::string(assets::builtin("prompts/role.txt")),
      std::string(assets::builtin("prompts/symptoms.txt")),
      std::string(assets::builtin("prompts/consistency.txt")),
      std::string(assets::builtin("prompts/empathy.txt")),
      std::string(assets::builtin("prompts/safety.txt")),
  };
  return t;
}

PromptTemplates PromptTemplates::load(const std::string& dir) {
  const std::filesystem::path base(dir);
  auto read = [&](const char* name) { return text::read_file((base / name).string()); };
  return PromptTemplates{read("role.txt"), read("symptoms.txt"), read("consistency.txt"), read("empathy.txt"),
                         read("safety.txt")};
}

namespace {

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string section(std::string_view header, std::string body) {
  while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
  std::string out(header);
  out += '\n';
  out += body;
  return out;
}

std::string with_rules(std::string body, const std::vector<std::string>& rules) {
  for (const auto& r : rules) {
    if (!body.empty() && body.back() != '\n') body += '\n';
    body += r;
  }
  return body;
}

}  // namespace

SystemPrompt build_system_prompt(const kb::ScenarioSpec& scenario, const PersonaProfile& persona,
                                 const PromptPolicy& policy, const PromptTemplates& templates) {
  if (scenario.symptoms.empty()) {
    throw Error(ErrorCode::invalid_argument, "scenario has no symptoms");
  }
  persona.validate();

  std::string symptom_list;
  for (const auto& s : scenario.symptoms) symptom_list += "- " + s + "\n";
  symptom_list.pop_back();

  const std::map<std::string, std::string, std::less<>> vars{
      {"age_band", std::string(describe(persona.age_band))},
      {"gender", persona.gender_descriptor},
      {"personality", join(persona.personality_tags, ", ")},
      {"communication_style", std::string(to_string(persona.communication_style))},
      {"affect_tone", std::string(to_string(persona.affect_tone))},
      {"syndrome", scenario.syndrome_name},
      {"symptom_list", symptom_list},
      {"affect_variation",
       policy.allow_affect_variation
           ? "Your mood may shift naturally during the conversation, but stay close to your baseline."
           : "Keep your mood at your baseline throughout the conversation."},
  };

  SystemPrompt p;
  p.role_section = section(kRoleHeader, text::render_template(templates.role, vars));
  p.symptom_section = section(kSymptomHeader, text::render_template(templates.symptoms, vars));
  // A custom template may leave out the list; the constraint must still hold.
  for (const auto& s : scenario.symptoms) {
    if (p.symptom_section.find(s) == std::string::npos) {
      throw Error(ErrorCode::invalid_argument, "symptom template does not render {{symptom_list}}");
    }
  }
  p.consistency_section = section(kConsistencyHeader, text::render_template(templates.consistency, vars));
  p.empathy_section = section(
      kEmpathyHeader, with_rules(text::render_template(templates.empathy, vars), policy.extra_empathy_rules));
  std::string safety(kSafetyRule);
  safety += '\n';
  safety += text::render_template(templates.safety, vars);
  p.safety_section = section(kSafetyHeader, with_rules(std::move(safety), policy.extra_safety_rules));

  p.rendered = p.role_section + "\n\n" + p.symptom_section + "\n\n" + p.consistency_section + "\n\n" +
               p.empathy_section + "\n\n" + p.safety_section + "\n";
  return p;
}

}  // namespace vpsim::scenario
