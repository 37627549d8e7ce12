#pragma once

#include "json.hpp"

#include "vpsim/analytics.hpp"
#include "vpsim/knowledge_base.hpp"
#include "vpsim/memory.hpp"
#include "vpsim/metrics.hpp"
#include "vpsim/persona.hpp"
#include "vpsim/pipeline.hpp"
#include "vpsim/prompt.hpp"
#include "vpsim/session_log.hpp"
#include "vpsim/turn.hpp"

namespace vpsim {

// Key order is preserved so emitted documents diff cleanly.
using Json = nlohmann::ordered_json;

namespace kb {
void to_json(Json& j, const SyndromeRecord& r);
void from_json(const Json& j, SyndromeRecord& r);
void to_json(Json& j, const ScenarioSpec& s);
void from_json(const Json& j, ScenarioSpec& s);
}  // namespace kb

namespace scenario {
void to_json(Json& j, const PersonaProfile& p);
void from_json(const Json& j, PersonaProfile& p);
void to_json(Json& j, const SystemPrompt& p);
void from_json(const Json& j, SystemPrompt& p);
void to_json(Json& j, const ChatMessage& m);
void from_json(const Json& j, ChatMessage& m);
PersonaOverrides persona_overrides_from_json(const Json& j);
}  // namespace scenario

namespace sentiment {
void to_json(Json& j, const ClassificationResult& r);
void to_json(Json& j, const ClassDistribution& d);
void to_json(Json& j, const MetricsReport& m);
Json kappa_to_json(const Kappa& k);
}  // namespace sentiment

namespace pipeline {
void to_json(Json& j, const StageTimings& t);
void from_json(const Json& j, StageTimings& t);
void to_json(Json& j, const FailureCause& f);
void from_json(const Json& j, FailureCause& f);
void to_json(Json& j, const Turn& t);
void from_json(const Json& j, Turn& t);
void to_json(Json& j, const StageSummary& s);
void to_json(Json& j, const LatencyReport& r);
}  // namespace pipeline

namespace analytics {
void to_json(Json& j, const DescriptiveStats& s);
void to_json(Json& j, const WilcoxonResult& w);
void to_json(Json& j, const AgreementMatrix& m);
void to_json(Json& j, const EntropyRow& r);
void to_json(Json& j, const SessionReport& r);
}  // namespace analytics

namespace service {
// Trainee-facing view of a turn. Never carries scenario data.
Json public_turn_json(const pipeline::Turn& t);
}  // namespace service

// Standard base64 (RFC 4648) with padding.
std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace vpsim
