#include "vpsim/session_manager.hpp"

#include <cstdio>
#include <sstream>

#include "vpsim/assets.hpp"
#include "vpsim/random.hpp"
#include "vpsim/remote_adapters.hpp"
#include "vpsim/serialization.hpp"
#include "vpsim/text.hpp"

namespace vpsim::service {

ServiceDeps make_deps(const ServiceConfig& cfg) {
  cfg.validate();
  ServiceDeps deps;
  if (cfg.kb_path.empty()) {
    std::istringstream in{std::string(assets::builtin("kb/sample_kb.jsonl"))};
    deps.knowledge_base = std::make_shared<kb::KnowledgeBase>(kb::KnowledgeBase::read_snapshot(in));
  } else {
    deps.knowledge_base = std::make_shared<kb::KnowledgeBase>(kb::KnowledgeBase::load(cfg.kb_path));
  }
  deps.clock = std::make_shared<pipeline::SteadyClock>();

  if (cfg.adapter_mode == AdapterMode::mock) {
    deps.adapters = pipeline::make_mock_adapters(*deps.clock);
  } else {
    deps.adapters.transcriber = std::make_shared<pipeline::RemoteTranscriber>(cfg.transcriber.url);
    deps.adapters.patient_model = std::make_shared<pipeline::RemoteChatModel>(cfg.patient_model.url);
    deps.adapters.synthesizer = std::make_shared<pipeline::RemoteSynthesizer>(cfg.synthesizer.url);
  }
  deps.adapters.transcriber_timeout_s = cfg.transcriber.timeout_s;
  deps.adapters.patient_model_timeout_s = cfg.patient_model.timeout_s;
  deps.adapters.synthesizer_timeout_s = cfg.synthesizer.timeout_s;
  deps.adapters.generation.temperature = cfg.temperature;

  if (cfg.sentiment_model_id == "rule") {
    deps.classifier = std::make_shared<sentiment::RuleBasedClassifier>(
        cfg.lexicon_path.empty() ? sentiment::Lexicon::builtin() : sentiment::Lexicon::load(cfg.lexicon_path));
  } else {
    auto model = std::make_shared<pipeline::RemoteChatModel>(cfg.sentiment_model.url, cfg.sentiment_model_id);
    deps.classifier = std::make_shared<sentiment::ModelClassifier>(
        model, cfg.sentiment_model_id,
        cfg.sentiment_prompt_path.empty() ? sentiment::builtin_classification_template()
                                          : text::read_file(cfg.sentiment_prompt_path),
        cfg.sentiment_model.timeout_s, static_cast<std::ptrdiff_t>(cfg.sentiment_max_in_flight));
  }
  if (!cfg.templates_dir.empty()) deps.templates = scenario::PromptTemplates::load(cfg.templates_dir);
  if (!cfg.persona_catalog_dir.empty()) deps.personas = scenario::PersonaCatalog::load(cfg.persona_catalog_dir);
  return deps;
}

struct SessionManager::Session {
  SessionRecord header;  // turns live in the dialogue
  std::unique_ptr<SessionLogWriter> log;
  std::unique_ptr<EventHub> hub;

  mutable std::mutex status_mu;
  SessionStatus status = SessionStatus::active;

  // Held for the whole of a turn; close waits on it.
  std::mutex turn_mu;

  // Declared last so it is destroyed first: its pending sentiment tasks
  // still write to log and hub.
  std::unique_ptr<pipeline::DialogueSession> dialogue;

  SessionStatus current_status() const {
    std::lock_guard lock(status_mu);
    return status;
  }
};

SessionManager::SessionManager(ServiceConfig cfg, ServiceDeps deps)
    : cfg_(std::move(cfg)), deps_(std::move(deps)), dir_(cfg_.persistence_dir) {
  cfg_.validate();
  if (!deps_.knowledge_base) throw Error(ErrorCode::invalid_argument, "service needs a knowledge base");
  if (!deps_.clock) deps_.clock = std::make_shared<pipeline::SteadyClock>();
  deps_.adapters.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir_.string() + ": " + ec.message());
  recover();
}

SessionManager::~SessionManager() {
  drain();
  std::unique_lock lock(mu_);
  for (auto& [id, s] : sessions_) s->hub->close_all();
}

std::shared_ptr<SessionManager::Session> SessionManager::open_session(SessionRecord record, bool fresh) {
  auto s = std::make_shared<Session>();
  const auto path = session_log_path(dir_, record.session_id);
  s->log = std::make_unique<SessionLogWriter>(path, cfg_.fsync);
  if (fresh) s->log->write_header(record);
  s->hub = std::make_unique<EventHub>(record.session_id, cfg_.event_queue_capacity);
  s->status = record.status;

  scenario::ConversationMemory memory(cfg_.memory_window, cfg_.memory_char_budget);
  for (const auto& t : record.turns) {
    if (!t.ok()) continue;
    memory = memory.append(scenario::Speaker::doctor, t.doctor_text).append(scenario::Speaker::patient, t.patient_text);
  }

  Session* raw = s.get();
  pipeline::TurnObserver obs;
  obs.on_state = [raw](pipeline::TurnState st) {
    raw->hub->publish(EventKind::state, Json{{"state", pipeline::to_string(st)}});
  };
  obs.on_turn_logged = [raw](const pipeline::Turn& t) {
    raw->log->append_turn(t);
    if (t.ok()) {
      raw->hub->publish(EventKind::turn_completed, Json{{"turn", public_turn_json(t)}});
    } else {
      raw->hub->publish(EventKind::turn_failed, Json{{"turn", public_turn_json(t)},
                                                     {"stage", pipeline::to_string(t.failure->stage)},
                                                     {"kind", t.failure->kind},
                                                     {"message", t.failure->message}});
    }
  };
  obs.on_sentiment = [raw](std::uint64_t turn_id, const sentiment::ClassificationResult& r, double seconds) {
    raw->log->append_sentiment(turn_id, r, seconds);
    Json payload{{"turn_id", turn_id}};
    payload["result"] = r;
    payload["sentiment_s"] = seconds;
    raw->hub->publish(EventKind::sentiment_attached, std::move(payload));
  };

  auto turns = std::move(record.turns);
  record.turns.clear();
  s->header = std::move(record);
  s->dialogue = std::make_unique<pipeline::DialogueSession>(s->header.prompt, std::move(memory), std::move(obs),
                                                            std::move(turns));
  return s;
}

void SessionManager::recover() {
  if (!std::filesystem::exists(dir_)) return;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".jsonl") continue;
    try {
      auto rec = read_session_log(entry.path());
      if (rec.session_id != entry.path().stem().string()) {
        throw Error(ErrorCode::parse_error, "session id does not match file name");
      }
      auto s = open_session(std::move(rec), false);
      sessions_.emplace(s->header.session_id, std::move(s));
      ++recovered_;
    } catch (const Error& e) {
      std::fprintf(stderr, "vpsim: skipping unreadable session log %s: %s\n", entry.path().c_str(), e.what());
    }
  }
}

std::string SessionManager::new_session_id() {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(fresh_seed()),
                static_cast<unsigned long long>(fresh_seed()));
  return buf;
}

PublicSessionView SessionManager::create_session(std::optional<std::uint64_t> seed,
                                                 const scenario::PersonaOverrides& overrides) {
  if (deps_.knowledge_base->empty()) {
    throw Error(ErrorCode::invalid_argument, "knowledge base is empty");
  }
  const std::uint64_t s = seed ? *seed : fresh_seed();
  SessionRecord rec;
  rec.scenario = kb::sample_scenario(*deps_.knowledge_base, s);
  rec.persona = scenario::apply_overrides(scenario::generate_persona(s, deps_.personas), overrides);
  rec.prompt = scenario::build_system_prompt(rec.scenario, rec.persona, {}, deps_.templates);
  rec.created_at = utc_timestamp();

  std::lock_guard id_lock(id_mu_);
  do {
    rec.session_id = new_session_id();
  } while (find(rec.session_id) || std::filesystem::exists(session_log_path(dir_, rec.session_id)));
  auto session = open_session(std::move(rec), true);
  PublicSessionView view{session->header.session_id, session->header.persona, session->header.created_at,
                         SessionStatus::active};
  std::unique_lock lock(mu_);
  sessions_.emplace(view.session_id, std::move(session));
  return view;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

namespace {

template <typename S>
std::shared_ptr<S> require(std::shared_ptr<S> s, const std::string& id) {
  if (!s) throw Error(ErrorCode::not_found, "unknown session '" + id + "'");
  return s;
}

}  // namespace

pipeline::Turn SessionManager::post_turn(const std::string& session_id, const pipeline::TurnInput& input) {
  auto s = require(find(session_id), session_id);
  std::unique_lock turn_lock(s->turn_mu, std::try_to_lock);
  if (!turn_lock.owns_lock()) throw pipeline::TurnInFlight();
  if (s->current_status() == SessionStatus::closed) {
    throw Error(ErrorCode::session_closed, "session '" + session_id + "' is closed");
  }
  return s->dialogue->run_turn(input, deps_.adapters, *deps_.clock, deps_.classifier,
                               pipeline::PipelineOptions{cfg_.sentiment_blocking});
}

std::shared_ptr<Subscription> SessionManager::subscribe(const std::string& session_id) {
  auto s = require(find(session_id), session_id);
  auto sub = s->hub->subscribe();
  if (s->current_status() == SessionStatus::closed) sub->close();
  return sub;
}

std::vector<pipeline::Turn> SessionManager::transcript(const std::string& session_id) const {
  return require(find(session_id), session_id)->dialogue->turns();
}

void SessionManager::close_session(const std::string& session_id) {
  auto s = require(find(session_id), session_id);
  std::lock_guard turn_lock(s->turn_mu);
  if (s->current_status() == SessionStatus::closed) {
    throw Error(ErrorCode::session_closed, "session '" + session_id + "' is already closed");
  }
  // The report reads sentiment, so let outstanding classifications land first.
  s->dialogue->wait_for_sentiment();
  const auto at = utc_timestamp();
  s->log->append_closed(at);
  {
    std::lock_guard lock(s->status_mu);
    s->status = SessionStatus::closed;
  }
  s->hub->publish(EventKind::session_closed, Json{{"at", at}});
  s->hub->close_all();
}

SessionRecord SessionManager::record(const std::string& session_id) const {
  auto s = require(find(session_id), session_id);
  SessionRecord rec = s->header;
  rec.status = s->current_status();
  rec.turns = s->dialogue->turns();
  return rec;
}

analytics::SessionReport SessionManager::report(const std::string& session_id) const {
  return analytics::session_report(record(session_id), cfg_.latency_budget_s);
}

PublicSessionView SessionManager::view(const std::string& session_id) const {
  auto s = require(find(session_id), session_id);
  return PublicSessionView{s->header.session_id, s->header.persona, s->header.created_at, s->current_status()};
}

std::optional<pipeline::AudioClip> SessionManager::reply_audio(const std::string& session_id,
                                                               std::uint64_t turn_id) const {
  return require(find(session_id), session_id)->dialogue->reply_audio(turn_id);
}

std::vector<std::string> SessionManager::session_ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

void SessionManager::drain() {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::shared_lock lock(mu_);
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  for (auto& s : all) s->dialogue->wait_for_sentiment();
}

}  // namespace vpsim::service
