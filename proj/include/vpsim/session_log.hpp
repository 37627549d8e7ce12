#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "vpsim/knowledge_base.hpp"
#include "vpsim/persona.hpp"
#include "vpsim/prompt.hpp"
#include "vpsim/turn.hpp"

namespace vpsim::service {

enum class SessionStatus { active, closed };
std::string_view to_string(SessionStatus s);

struct SessionRecord {
  std::string session_id;
  kb::ScenarioSpec scenario;
  scenario::PersonaProfile persona;
  scenario::SystemPrompt prompt;
  std::string created_at;  // ISO-8601 UTC
  SessionStatus status = SessionStatus::active;
  std::vector<pipeline::Turn> turns;
};

inline constexpr std::string_view kSessionLogSchema = "vpsim.session.v1";

// Append-only JSON-lines log, one file per session:
//   {"schema":..., "kind":"header", session_id, created_at, scenario, persona, prompt}
//   {"kind":"turn", "turn":{...}}
//   {"kind":"sentiment", "turn_id":n, ...}
//   {"kind":"closed", "at":...}
// Every append is flushed and fsync'd before returning.
class SessionLogWriter {
 public:
  SessionLogWriter(const std::filesystem::path& path, bool sync = true);
  ~SessionLogWriter();
  SessionLogWriter(const SessionLogWriter&) = delete;
  SessionLogWriter& operator=(const SessionLogWriter&) = delete;

  void write_header(const SessionRecord& record);
  void append_turn(const pipeline::Turn& turn);
  void append_sentiment(std::uint64_t turn_id, const sentiment::ClassificationResult& result,
                        double seconds);
  void append_closed(std::string_view at);

 private:
  void write_line(const std::string& line);

  std::mutex mu_;
  std::FILE* file_ = nullptr;
  bool sync_;
};

// Replays a log file. A torn final line (crash mid-write) is ignored; any
// other malformed line throws Error(parse_error).
SessionRecord read_session_log(const std::filesystem::path& path);

std::filesystem::path session_log_path(const std::filesystem::path& dir, std::string_view session_id);

std::string utc_timestamp();

}  // namespace vpsim::service
