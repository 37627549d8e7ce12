#include "vpsim/serialization.hpp"

#include <openssl/evp.h>

#include <cctype>

namespace vpsim {

namespace kb {

void to_json(Json& j, const SyndromeRecord& r) {
  j = Json{{"syndrome", r.syndrome_name}, {"source", to_string(r.source)}, {"symptoms", r.symptoms}};
}

void from_json(const Json& j, SyndromeRecord& r) {
  r.syndrome_name = j.at("syndrome").get<std::string>();
  r.source = parse_source(j.value("source", "other"));
  r.symptoms = j.at("symptoms").get<std::vector<std::string>>();
}

void to_json(Json& j, const ScenarioSpec& s) {
  j = Json{{"syndrome", s.syndrome_name}, {"symptoms", s.symptoms}, {"seed", s.seed}};
}

void from_json(const Json& j, ScenarioSpec& s) {
  s.syndrome_name = j.at("syndrome").get<std::string>();
  s.symptoms = j.at("symptoms").get<std::vector<std::string>>();
  s.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace kb

namespace scenario {

void to_json(Json& j, const PersonaProfile& p) {
  j = Json{{"age_band", to_string(p.age_band)},
           {"gender", p.gender_descriptor},
           {"personality_tags", p.personality_tags},
           {"communication_style", to_string(p.communication_style)},
           {"affect_tone", to_string(p.affect_tone)}};
}

void from_json(const Json& j, PersonaProfile& p) {
  p.age_band = parse_age_band(j.at("age_band").get<std::string>());
  p.gender_descriptor = j.at("gender").get<std::string>();
  p.personality_tags = j.at("personality_tags").get<std::vector<std::string>>();
  p.communication_style = parse_communication_style(j.at("communication_style").get<std::string>());
  p.affect_tone = parse_affect_tone(j.at("affect_tone").get<std::string>());
}

void to_json(Json& j, const SystemPrompt& p) {
  j = Json{{"role", p.role_section},
           {"symptoms", p.symptom_section},
           {"consistency", p.consistency_section},
           {"empathy", p.empathy_section},
           {"safety", p.safety_section},
           {"rendered", p.rendered}};
}

void from_json(const Json& j, SystemPrompt& p) {
  p.role_section = j.at("role").get<std::string>();
  p.symptom_section = j.at("symptoms").get<std::string>();
  p.consistency_section = j.at("consistency").get<std::string>();
  p.empathy_section = j.at("empathy").get<std::string>();
  p.safety_section = j.at("safety").get<std::string>();
  p.rendered = j.at("rendered").get<std::string>();
}

void to_json(Json& j, const ChatMessage& m) { j = Json{{"role", to_string(m.role)}, {"content", m.content}}; }

void from_json(const Json& j, ChatMessage& m) {
  m.role = parse_role(j.at("role").get<std::string>());
  m.content = j.at("content").get<std::string>();
}

PersonaOverrides persona_overrides_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "persona overrides must be an object");
  PersonaOverrides o;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "age_band") {
        o.age_band = parse_age_band(value.get<std::string>());
      } else if (key == "gender") {
        o.gender_descriptor = value.get<std::string>();
      } else if (key == "personality_tags") {
        o.personality_tags = value.get<std::vector<std::string>>();
      } else if (key == "communication_style") {
        o.communication_style = parse_communication_style(value.get<std::string>());
      } else if (key == "affect_tone") {
        o.affect_tone = parse_affect_tone(value.get<std::string>());
      } else {
        throw Error(ErrorCode::invalid_argument, "unknown persona field '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_argument, "persona field '" + key + "': " + e.what());
    }
  }
  return o;
}

}  // namespace scenario

namespace sentiment {

void to_json(Json& j, const ClassificationResult& r) {
  j = Json::object();
  j["label"] = r.label ? Json(to_string(*r.label)) : Json(nullptr);
  j["unparsed"] = r.unparsed;
  if (!r.error.empty()) j["error"] = r.error;
  j["model_id"] = r.model_id;
}

void to_json(Json& j, const ClassDistribution& d) {
  j = Json{{"negative", d.p_negative}, {"neutral", d.p_neutral}, {"positive", d.p_positive}};
}

void to_json(Json& j, const MetricsReport& m) {
  Json cm = Json::array();
  for (const auto& row : m.confusion.counts) cm.push_back(row);
  j = Json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
           {"n", m.n},           {"averaging", m.averaging}, {"confusion", cm}};
}

Json kappa_to_json(const Kappa& k) {
  if (!k.defined()) return Json{{"kappa", nullptr}, {"undefined", true}};
  return Json{{"kappa", *k.value}, {"undefined", false}};
}

}  // namespace sentiment

namespace pipeline {

void to_json(Json& j, const StageTimings& t) {
  j = Json{{"stt_s", t.stt_s},
           {"llm_s", t.llm_s},
           {"tts_s", t.tts_s},
           {"sentiment_s", t.sentiment_s},
           {"total_s", t.total_s}};
}

void from_json(const Json& j, StageTimings& t) {
  t.stt_s = j.at("stt_s").get<double>();
  t.llm_s = j.at("llm_s").get<double>();
  t.tts_s = j.at("tts_s").get<double>();
  t.sentiment_s = j.value("sentiment_s", 0.0);
  t.total_s = j.at("total_s").get<double>();
}

void to_json(Json& j, const FailureCause& f) {
  j = Json{{"stage", to_string(f.stage)}, {"kind", f.kind}, {"message", f.message}};
}

void from_json(const Json& j, FailureCause& f) {
  f.stage = parse_stage(j.at("stage").get<std::string>());
  f.kind = j.at("kind").get<std::string>();
  f.message = j.value("message", "");
}

void to_json(Json& j, const Turn& t) {
  j = Json::object();
  j["turn_id"] = t.turn_id;
  j["status"] = to_string(t.status);
  j["doctor_text"] = t.doctor_text;
  j["patient_text"] = t.patient_text;
  j["audio_ref"] = t.audio_ref ? Json(*t.audio_ref) : Json(nullptr);
  j["timings"] = t.timings;
  j["doctor_sentiment"] = t.doctor_sentiment ? Json(sentiment::to_string(*t.doctor_sentiment)) : Json(nullptr);
  if (t.sentiment_unparsed) j["sentiment_unparsed"] = true;
  if (t.sentiment_error) j["sentiment_error"] = *t.sentiment_error;
  if (t.failure) j["failure"] = *t.failure;
}

void from_json(const Json& j, Turn& t) {
  t.turn_id = j.at("turn_id").get<std::uint64_t>();
  t.status = j.at("status").get<std::string>() == "ok" ? TurnStatus::ok : TurnStatus::failed;
  t.doctor_text = j.at("doctor_text").get<std::string>();
  t.patient_text = j.at("patient_text").get<std::string>();
  t.audio_ref.reset();
  if (j.contains("audio_ref") && !j["audio_ref"].is_null()) t.audio_ref = j["audio_ref"].get<std::string>();
  t.timings = j.at("timings").get<StageTimings>();
  t.doctor_sentiment.reset();
  if (j.contains("doctor_sentiment") && !j["doctor_sentiment"].is_null()) {
    t.doctor_sentiment = sentiment::parse_label(j["doctor_sentiment"].get<std::string>());
  }
  t.sentiment_unparsed = j.value("sentiment_unparsed", false);
  t.sentiment_error.reset();
  if (j.contains("sentiment_error")) t.sentiment_error = j["sentiment_error"].get<std::string>();
  t.failure.reset();
  if (j.contains("failure")) t.failure = j["failure"].get<FailureCause>();
}

void to_json(Json& j, const StageSummary& s) {
  j = Json{{"mean", s.mean}, {"median", s.median}, {"p95", s.p95}};
}

void to_json(Json& j, const LatencyReport& r) {
  j = Json{{"turn_count", r.turn_count}, {"stt_s", r.stt},         {"llm_s", r.llm},
           {"tts_s", r.tts},             {"sentiment_s", r.sentiment}, {"total_s", r.total},
           {"budget_s", r.budget_s},     {"budget_met", r.budget_met}};
}

}  // namespace pipeline

namespace analytics {

void to_json(Json& j, const DescriptiveStats& s) {
  j = Json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"std_dev", s.std_dev}};
}

void to_json(Json& j, const WilcoxonResult& w) {
  j = Json{{"W", w.w},       {"p", w.p},         {"z", w.z},
           {"r", w.r},       {"n_used", w.n_used}, {"exact", w.exact},
           {"alternative", to_string(w.alternative)}};
}

void to_json(Json& j, const AgreementMatrix& m) {
  Json rows = Json::array();
  for (const auto& row : m.kappa) {
    Json r = Json::array();
    for (const auto& k : row) r.push_back(k.defined() ? Json(*k.value) : Json(nullptr));
    rows.push_back(std::move(r));
  }
  j = Json{{"model_ids", m.model_ids}, {"kappa", rows}};
}

void to_json(Json& j, const EntropyRow& r) {
  j = Json{{"model_id", r.model_id}, {"distribution", r.distribution}, {"entropy_bits", r.entropy_bits}};
}

void to_json(Json& j, const SessionReport& r) {
  Json timeline = Json::array();
  for (const auto& e : r.timeline) {
    timeline.push_back(
        Json{{"turn_id", e.turn_id}, {"label", e.label ? Json(sentiment::to_string(*e.label)) : Json(nullptr)}});
  }
  j = Json::object();
  j["session_id"] = r.session_id;
  j["turn_count"] = r.turn_count;
  j["failed_turns"] = r.failed_turns;
  j["timeline"] = timeline;
  j["distribution"] = r.distribution ? Json(*r.distribution) : Json(nullptr);
  j["entropy_bits"] = r.entropy_bits ? Json(*r.entropy_bits) : Json(nullptr);
  j["latency"] = r.latency ? Json(*r.latency) : Json(nullptr);
  j["debrief"] = Json{{"syndrome", r.debrief.syndrome_name},
                      {"symptoms", r.debrief.symptoms},
                      {"persona", r.debrief.persona}};
}

}  // namespace analytics

namespace service {

Json public_turn_json(const pipeline::Turn& t) { return Json(t); }

}  // namespace service

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::invalid_argument, "base64 length is not a multiple of 4");
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool pad_ok = c == '=' && i + 2 >= text.size();
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/' || pad_ok)) {
      throw Error(ErrorCode::invalid_argument, "invalid base64 character");
    }
  }
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::invalid_argument, "invalid base64");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock counts padding as zero bytes.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() > 1 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

}  // namespace vpsim
