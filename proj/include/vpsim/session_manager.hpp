#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "vpsim/analytics.hpp"
#include "vpsim/config.hpp"
#include "vpsim/events.hpp"
#include "vpsim/knowledge_base.hpp"
#include "vpsim/pipeline.hpp"
#include "vpsim/session_log.hpp"

namespace vpsim::service {

// What the trainee is allowed to see about a new session.
struct PublicSessionView {
  std::string session_id;
  scenario::PersonaProfile persona;
  std::string created_at;
  SessionStatus status = SessionStatus::active;
};

// Everything the manager needs besides configuration; tests inject mocks
// and a fake clock here.
struct ServiceDeps {
  std::shared_ptr<const kb::KnowledgeBase> knowledge_base;
  pipeline::AdapterSet adapters;
  std::shared_ptr<sentiment::Classifier> classifier;
  std::shared_ptr<pipeline::Clock> clock;
  scenario::PromptTemplates templates = scenario::PromptTemplates::builtin();
  scenario::PersonaCatalog personas = scenario::PersonaCatalog::builtin();
};

// Builds adapters, classifier, templates and KB from configuration.
ServiceDeps make_deps(const ServiceConfig& cfg);

class SessionManager {
 public:
  // Recovers every session log found in cfg.persistence_dir.
  SessionManager(ServiceConfig cfg, ServiceDeps deps);
  ~SessionManager();

  PublicSessionView create_session(std::optional<std::uint64_t> seed = std::nullopt,
                                   const scenario::PersonaOverrides& overrides = {});

  // Errors: not_found, session_closed, conflict (turn in flight),
  // invalid_argument / unsupported_media for bad input. Adapter failures
  // come back as a failed Turn; the turn is durable before this returns.
  pipeline::Turn post_turn(const std::string& session_id, const pipeline::TurnInput& input);

  std::shared_ptr<Subscription> subscribe(const std::string& session_id);
  std::vector<pipeline::Turn> transcript(const std::string& session_id) const;
  void close_session(const std::string& session_id);
  // Error(session_active) until the session is closed.
  analytics::SessionReport report(const std::string& session_id) const;
  SessionRecord record(const std::string& session_id) const;
  PublicSessionView view(const std::string& session_id) const;
  // Reply audio is retained for recent turns only.
  std::optional<pipeline::AudioClip> reply_audio(const std::string& session_id, std::uint64_t turn_id) const;

  std::vector<std::string> session_ids() const;
  std::size_t recovered_sessions() const noexcept { return recovered_; }
  const ServiceConfig& config() const noexcept { return cfg_; }

  // Waits for outstanding sentiment work in every session.
  void drain();

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<Session> open_session(SessionRecord record, bool fresh);
  std::string new_session_id();
  void recover();

  ServiceConfig cfg_;
  ServiceDeps deps_;
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex id_mu_;
  std::size_t recovered_ = 0;
};

}  // namespace vpsim::service
