#include "vpsim/adapters.hpp"

#include <algorithm>

#include "vpsim/prompt.hpp"
#include "vpsim/text.hpp"

namespace vpsim::pipeline {

namespace {

// Charges the delay, or the timeout and a throw if the delay is longer.
void charge(Clock& clock, double delay_s, double timeout_s, std::string_view who) {
  if (delay_s > timeout_s) {
    clock.sleep_for_s(timeout_s);
    throw AdapterTimeout(std::string(who) + " timed out after " + std::to_string(timeout_s) + " s");
  }
  clock.sleep_for_s(delay_s);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void validate_audio(const AudioClip& clip) {
  if (clip.codec != kPcm16kMono) {
    throw Error(ErrorCode::unsupported_media,
                "unsupported audio codec '" + clip.codec + "', expected " + std::string(kPcm16kMono));
  }
  if (clip.bytes.empty()) throw Error(ErrorCode::invalid_argument, "empty audio");
  if (clip.bytes.size() % 2 != 0) {
    throw Error(ErrorCode::unsupported_media, "audio length is not a whole number of 16-bit samples");
  }
}

void AdapterSet::validate() const {
  if (!transcriber || !patient_model || !synthesizer) {
    throw Error(ErrorCode::invalid_argument, "adapter set is missing an adapter");
  }
  if (!(transcriber_timeout_s > 0) || !(patient_model_timeout_s > 0) || !(synthesizer_timeout_s > 0)) {
    throw Error(ErrorCode::invalid_argument, "adapter timeouts must be positive");
  }
}

MockTranscriber::MockTranscriber(Clock& clock, double delay_s, std::vector<std::string> script)
    : clock_(clock), delay_s_(delay_s), script_(std::move(script)) {
  if (script_.empty()) throw Error(ErrorCode::invalid_argument, "mock transcriber needs a script");
}

std::string MockTranscriber::transcribe(const AudioClip& audio, double timeout_s) {
  validate_audio(audio);
  charge(clock_, delay_s_, timeout_s, "transcriber");
  std::lock_guard lock(mu_);
  return script_[next_++ % script_.size()];
}

MockPatientModel::MockPatientModel(Clock& clock, double delay_s, std::vector<std::string> script)
    : clock_(clock), delay_s_(delay_s), script_(std::move(script)) {}

std::string MockPatientModel::complete(std::span<const ChatMessage> messages, const GenerationParams&,
                                       double timeout_s) {
  charge(clock_, delay_s_, timeout_s, "patient model");
  if (!script_.empty()) {
    std::lock_guard lock(mu_);
    return script_[next_++ % script_.size()];
  }
  if (messages.empty() || messages.back().role != scenario::Role::user) {
    throw AdapterProtocolError("patient model expects the conversation to end with a user message");
  }
  std::vector<std::string> symptoms;
  std::size_t user_turns = 0;
  for (const auto& m : messages) {
    if (m.role == scenario::Role::system && symptoms.empty()) symptoms = symptoms_in_prompt(m.content);
    if (m.role == scenario::Role::user) ++user_turns;
  }
  if (symptoms.empty()) return "I'm not really sure how to describe it.";

  static constexpr std::string_view kOpeners[] = {
      "Well, I've been dealing with ", "Mostly it's the ", "I keep noticing ", "What bothers me most is the ",
  };
  const auto h = fnv1a(messages.back().content) + user_turns;
  std::string reply(kOpeners[h % std::size(kOpeners)]);
  reply += symptoms[(h / std::size(kOpeners)) % symptoms.size()];
  reply += user_turns == 1 ? ". It started a few days ago." : ".";
  return reply;
}

MockSynthesizer::MockSynthesizer(Clock& clock, double delay_s) : clock_(clock), delay_s_(delay_s) {}

AudioClip MockSynthesizer::synthesize(std::string_view text, double timeout_s) {
  charge(clock_, delay_s_, timeout_s, "synthesizer");
  // 0.1 s of 16 kHz 16-bit silence per word.
  const auto n_words = std::max<std::size_t>(1, text::words(text).size());
  AudioClip clip;
  clip.bytes.assign(n_words * 3200, 0);
  return clip;
}

DelayedClassifier::DelayedClassifier(std::shared_ptr<sentiment::Classifier> inner, Clock& clock, double delay_s)
    : inner_(std::move(inner)), clock_(clock), delay_s_(delay_s) {}

sentiment::ClassificationResult DelayedClassifier::classify(std::string_view text) {
  clock_.sleep_for_s(delay_s_);
  return inner_->classify(text);
}

AdapterSet make_mock_adapters(Clock& clock, MockDelays delays) {
  AdapterSet set;
  set.transcriber = std::make_shared<MockTranscriber>(clock, delays.stt_s);
  set.patient_model = std::make_shared<MockPatientModel>(clock, delays.llm_s);
  set.synthesizer = std::make_shared<MockSynthesizer>(clock, delays.tts_s);
  return set;
}

std::vector<std::string> symptoms_in_prompt(std::string_view system_prompt) {
  std::vector<std::string> out;
  auto pos = system_prompt.find(scenario::kSymptomHeader);
  if (pos == std::string_view::npos) return out;
  auto section = system_prompt.substr(pos + scenario::kSymptomHeader.size());
  if (auto end = section.find("\n## "); end != std::string_view::npos) section = section.substr(0, end);
  for (const auto& line : text::split(section, '\n')) {
    auto t = text::trim(line);
    if (t.size() > 2 && t.substr(0, 2) == "- ") out.emplace_back(t.substr(2));
  }
  return out;
}

}  // namespace vpsim::pipeline
