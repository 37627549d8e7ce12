#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpsim/clock.hpp"
#include "vpsim/error.hpp"
#include "vpsim/memory.hpp"
#include "vpsim/sentiment.hpp"

namespace vpsim::pipeline {

using scenario::ChatMessage;

// 16-bit little-endian linear PCM, 16 kHz, mono.
inline constexpr std::string_view kPcm16kMono = "audio/L16;rate=16000;channels=1";

struct AudioClip {
  std::string codec{kPcm16kMono};
  std::vector<std::uint8_t> bytes;

  bool operator==(const AudioClip&) const = default;
};

// Throws Error(unsupported_media) for anything but whole 16 kHz mono samples.
void validate_audio(const AudioClip& clip);

class AdapterTimeout : public Error {
 public:
  explicit AdapterTimeout(const std::string& what) : Error(ErrorCode::adapter_timeout, what) {}
};

class AdapterProtocolError : public Error {
 public:
  explicit AdapterProtocolError(const std::string& what) : Error(ErrorCode::adapter_protocol, what) {}
};

struct GenerationParams {
  double temperature = 0.7;
};

// Adapters must be callable from several sessions at once.
class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string transcribe(const AudioClip& audio, double timeout_s) = 0;
};

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  virtual std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params,
                               double timeout_s) = 0;
};

class Synthesizer {
 public:
  virtual ~Synthesizer() = default;
  virtual AudioClip synthesize(std::string_view text, double timeout_s) = 0;
};

struct AdapterSet {
  std::shared_ptr<Transcriber> transcriber;
  std::shared_ptr<ChatModel> patient_model;
  std::shared_ptr<Synthesizer> synthesizer;
  double transcriber_timeout_s = 10.0;
  double patient_model_timeout_s = 20.0;
  double synthesizer_timeout_s = 10.0;
  GenerationParams generation;

  // Throws Error(invalid_argument) on a missing adapter or timeout <= 0.
  void validate() const;
};

// ---- mocks -------------------------------------------------------------
//
// Each mock charges its delay to the injected clock. A delay larger than the
// caller's timeout raises AdapterTimeout, as a remote adapter would.

class MockTranscriber final : public Transcriber {
 public:
  MockTranscriber(Clock& clock, double delay_s = 0.0,
                  std::vector<std::string> script = {"Can you tell me what brings you in today?"});
  std::string transcribe(const AudioClip& audio, double timeout_s) override;

 private:
  Clock& clock_;
  double delay_s_;
  std::vector<std::string> script_;
  std::mutex mu_;
  std::size_t next_ = 0;
};

// Deterministic patient: picks one of the symptoms listed in the system
// prompt based on the utterance text and conversation length, or replays a
// fixed script when one is given.
class MockPatientModel final : public ChatModel {
 public:
  MockPatientModel(Clock& clock, double delay_s = 0.0, std::vector<std::string> script = {});
  std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params,
                       double timeout_s) override;

 private:
  Clock& clock_;
  double delay_s_;
  std::vector<std::string> script_;
  std::mutex mu_;
  std::size_t next_ = 0;
};

// Produces silence whose length follows the word count.
class MockSynthesizer final : public Synthesizer {
 public:
  MockSynthesizer(Clock& clock, double delay_s = 0.0);
  AudioClip synthesize(std::string_view text, double timeout_s) override;

 private:
  Clock& clock_;
  double delay_s_;
};

// Wraps another classifier and charges a fixed delay before answering.
class DelayedClassifier final : public sentiment::Classifier {
 public:
  DelayedClassifier(std::shared_ptr<sentiment::Classifier> inner, Clock& clock, double delay_s);
  sentiment::ClassificationResult classify(std::string_view text) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<sentiment::Classifier> inner_;
  Clock& clock_;
  double delay_s_;
};

struct MockDelays {
  double stt_s = 0.0;
  double llm_s = 0.0;
  double tts_s = 0.0;
};

AdapterSet make_mock_adapters(Clock& clock, MockDelays delays = {});

// Symptom lines ("- x") under the symptom header of a system prompt.
std::vector<std::string> symptoms_in_prompt(std::string_view system_prompt);

}  // namespace vpsim::pipeline
