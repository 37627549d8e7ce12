#include "vpsim/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "vpsim/text.hpp"

namespace vpsim::pipeline {

namespace {

// Clears the in-flight flag however run_turn exits.
struct InFlightGuard {
  std::mutex& mu;
  bool& flag;
  ~InFlightGuard() {
    std::lock_guard lock(mu);
    flag = false;
  }
};

struct StageFailure {
  Stage stage;
  std::string kind;
  std::string message;
};

// Runs one adapter call, timing it on the injected clock. Any failure,
// including an over-long call that did return, becomes a StageFailure.
template <typename F>
auto timed_call(Clock& clock, Stage stage, double timeout_s, double& elapsed, F&& call) {
  const double start = clock.now_s();
  try {
    auto out = call();
    elapsed = clock.now_s() - start;
    if (elapsed > timeout_s) {
      throw StageFailure{stage, "timeout",
                         std::string(to_string(stage)) + " exceeded its " + std::to_string(timeout_s) + " s timeout"};
    }
    return out;
  } catch (const StageFailure&) {
    throw;
  } catch (const AdapterTimeout& e) {
    elapsed = clock.now_s() - start;
    throw StageFailure{stage, "timeout", e.what()};
  } catch (const std::exception& e) {
    elapsed = clock.now_s() - start;
    throw StageFailure{stage, "protocol", e.what()};
  }
}

}  // namespace

DialogueSession::DialogueSession(scenario::SystemPrompt prompt, scenario::ConversationMemory memory,
                                 TurnObserver observer, std::vector<Turn> prior_turns)
    : prompt_(std::move(prompt)), observer_(std::move(observer)), memory_(std::move(memory)),
      turns_(std::move(prior_turns)) {
  for (const auto& t : turns_) next_turn_id_ = std::max(next_turn_id_, t.turn_id + 1);
}

DialogueSession::~DialogueSession() { wait_for_sentiment(); }

void DialogueSession::set_state(TurnEvent event) {
  TurnState next;
  {
    std::lock_guard lock(mu_);
    next = transition(state_, event);
    state_ = next;
  }
  if (observer_.on_state) observer_.on_state(next);
}

Turn DialogueSession::run_turn(const TurnInput& input, const AdapterSet& adapters, Clock& clock,
                               std::shared_ptr<sentiment::Classifier> classifier, PipelineOptions options) {
  adapters.validate();
  if (const auto* text = std::get_if<std::string>(&input)) {
    if (text::trim(*text).empty()) throw Error(ErrorCode::invalid_argument, "empty utterance");
  } else {
    validate_audio(std::get<AudioClip>(input));
  }

  Turn turn;
  {
    std::lock_guard lock(mu_);
    if (in_flight_) throw TurnInFlight();
    in_flight_ = true;
    turn.turn_id = next_turn_id_++;
  }
  InFlightGuard guard{mu_, in_flight_};

  const double started = clock.now_s();
  set_state(TurnEvent::input_started);
  set_state(TurnEvent::input_captured);

  scenario::ConversationMemory memory_snapshot = memory();
  try {
    if (const auto* audio = std::get_if<AudioClip>(&input)) {
      turn.doctor_text = timed_call(clock, Stage::transcription, adapters.transcriber_timeout_s, turn.timings.stt_s,
                                    [&] { return adapters.transcriber->transcribe(*audio, adapters.transcriber_timeout_s); });
      if (text::trim(turn.doctor_text).empty()) {
        throw StageFailure{Stage::transcription, "protocol", "transcriber returned an empty transcript"};
      }
    } else {
      turn.doctor_text = std::get<std::string>(input);
    }

    const auto messages = scenario::render_context(prompt_, memory_snapshot, turn.doctor_text);
    turn.patient_text = timed_call(clock, Stage::generation, adapters.patient_model_timeout_s, turn.timings.llm_s, [&] {
      return adapters.patient_model->complete(messages, adapters.generation, adapters.patient_model_timeout_s);
    });
    if (text::trim(turn.patient_text).empty()) {
      throw StageFailure{Stage::generation, "protocol", "patient model returned an empty reply"};
    }

    set_state(TurnEvent::reply_ready);
    auto clip = timed_call(clock, Stage::synthesis, adapters.synthesizer_timeout_s, turn.timings.tts_s, [&] {
      return adapters.synthesizer->synthesize(turn.patient_text, adapters.synthesizer_timeout_s);
    });
    turn.audio_ref = "turns/" + std::to_string(turn.turn_id) + "/audio";
    {
      std::lock_guard lock(mu_);
      reply_audio_[turn.turn_id] = std::move(clip);
      while (reply_audio_.size() > kRetainedAudio) reply_audio_.erase(reply_audio_.begin());
    }
  } catch (const StageFailure& f) {
    turn.status = TurnStatus::failed;
    turn.patient_text.clear();
    turn.audio_ref.reset();
    turn.failure = FailureCause{f.stage, f.kind, f.message};
    turn.timings.total_s = clock.now_s() - started;
    try {
      if (observer_.on_turn_logged) observer_.on_turn_logged(turn);
    } catch (...) {
      set_state(TurnEvent::error);
      throw;
    }
    {
      std::lock_guard lock(mu_);
      turns_.push_back(turn);
    }
    set_state(TurnEvent::error);
    return turn;
  } catch (...) {
    set_state(TurnEvent::error);
    throw;
  }

  std::optional<sentiment::ClassificationResult> blocking_result;
  if (classifier && options.sentiment_blocking) {
    const double t = clock.now_s();
    blocking_result = classifier->classify(turn.doctor_text);
    turn.timings.sentiment_s = clock.now_s() - t;
    turn.doctor_sentiment = blocking_result->label;
    turn.sentiment_unparsed = blocking_result->unparsed;
    if (!blocking_result->error.empty()) turn.sentiment_error = blocking_result->error;
  }
  turn.timings.total_s = clock.now_s() - started;

  try {
    if (observer_.on_turn_logged) observer_.on_turn_logged(turn);
  } catch (...) {
    set_state(TurnEvent::error);
    throw;
  }
  {
    std::lock_guard lock(mu_);
    turns_.push_back(turn);
    memory_ = memory_.append(scenario::Speaker::doctor, turn.doctor_text)
                  .append(scenario::Speaker::patient, turn.patient_text);
  }
  set_state(TurnEvent::playback_done);

  if (blocking_result) {
    if (observer_.on_sentiment) observer_.on_sentiment(turn.turn_id, *blocking_result, turn.timings.sentiment_s);
  } else if (classifier) {
    std::lock_guard lock(pending_mu_);
    std::erase_if(pending_, [](std::future<void>& f) {
      return f.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
    });
    pending_.push_back(std::async(std::launch::async, [this, classifier, &clock, id = turn.turn_id,
                                                       text = turn.doctor_text] {
      const double t = clock.now_s();
      sentiment::ClassificationResult r;
      try {
        r = classifier->classify(text);
      } catch (const std::exception& e) {
        r.error = e.what();
        r.model_id = classifier->id();
      }
      attach_sentiment(id, r, clock.now_s() - t);
    }));
  }
  return turn;
}

void DialogueSession::attach_sentiment(std::uint64_t turn_id, const sentiment::ClassificationResult& result,
                                       double seconds) {
  {
    std::lock_guard lock(mu_);
    auto it = std::find_if(turns_.begin(), turns_.end(), [&](const Turn& t) { return t.turn_id == turn_id; });
    if (it == turns_.end()) return;
    it->doctor_sentiment = result.label;
    it->sentiment_unparsed = result.unparsed;
    if (!result.error.empty()) it->sentiment_error = result.error;
    it->timings.sentiment_s = seconds;
  }
  if (observer_.on_sentiment) {
    try {
      observer_.on_sentiment(turn_id, result, seconds);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "vpsim: sentiment observer failed for turn %llu: %s\n",
                   static_cast<unsigned long long>(turn_id), e.what());
    }
  }
}

std::vector<Turn> DialogueSession::turns() const {
  std::lock_guard lock(mu_);
  return turns_;
}

TurnState DialogueSession::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

scenario::ConversationMemory DialogueSession::memory() const {
  std::lock_guard lock(mu_);
  return memory_;
}

bool DialogueSession::busy() const {
  std::lock_guard lock(mu_);
  return in_flight_;
}

std::optional<AudioClip> DialogueSession::reply_audio(std::uint64_t turn_id) const {
  std::lock_guard lock(mu_);
  auto it = reply_audio_.find(turn_id);
  if (it == reply_audio_.end()) return std::nullopt;
  return it->second;
}

void DialogueSession::wait_for_sentiment() {
  while (true) {
    std::vector<std::future<void>> batch;
    {
      std::lock_guard lock(pending_mu_);
      batch.swap(pending_);
    }
    if (batch.empty()) return;
    for (auto& f : batch) f.wait();
  }
}

namespace {

StageSummary summarize(std::vector<double> v) {
  StageSummary s;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  const double pos = 0.95 * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, n - 1);
  s.p95 = v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  return s;
}

}  // namespace

LatencyReport latency_report(std::span<const Turn> turns, double budget_s) {
  std::vector<double> stt, llm, tts, sent, total;
  for (const auto& t : turns) {
    if (!t.ok()) continue;
    stt.push_back(t.timings.stt_s);
    llm.push_back(t.timings.llm_s);
    tts.push_back(t.timings.tts_s);
    sent.push_back(t.timings.sentiment_s);
    total.push_back(t.timings.total_s);
  }
  if (total.empty()) throw Error(ErrorCode::invalid_argument, "latency report needs at least one ok turn");
  LatencyReport r;
  r.turn_count = total.size();
  r.stt = summarize(std::move(stt));
  r.llm = summarize(std::move(llm));
  r.tts = summarize(std::move(tts));
  r.sentiment = summarize(std::move(sent));
  r.total = summarize(std::move(total));
  r.budget_s = budget_s;
  r.budget_met = r.total.mean <= budget_s;
  return r;
}

std::string transcript_hash(std::span<const Turn> turns) {
  std::string doc;
  for (const auto& t : turns) {
    doc += std::to_string(t.turn_id) + '\t' + t.doctor_text + '\t' + t.patient_text + '\n';
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(doc.data(), doc.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace vpsim::pipeline
