#include "vpsim/session_log.hpp"

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "vpsim/serialization.hpp"

namespace vpsim::service {

std::string_view to_string(SessionStatus s) { return s == SessionStatus::active ? "active" : "closed"; }

SessionLogWriter::SessionLogWriter(const std::filesystem::path& path, bool sync) : sync_(sync) {
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw Error(ErrorCode::io_error, "cannot open session log " + path.string());
}

SessionLogWriter::~SessionLogWriter() {
  if (file_) std::fclose(file_);
}

void SessionLogWriter::write_line(const std::string& line) {
  std::lock_guard lock(mu_);
  const std::string buf = line + "\n";
  if (std::fwrite(buf.data(), 1, buf.size(), file_) != buf.size() || std::fflush(file_) != 0) {
    throw Error(ErrorCode::io_error, "session log write failed");
  }
  if (sync_ && ::fsync(::fileno(file_)) != 0) throw Error(ErrorCode::io_error, "session log fsync failed");
}

void SessionLogWriter::write_header(const SessionRecord& record) {
  Json j;
  j["schema"] = kSessionLogSchema;
  j["kind"] = "header";
  j["session_id"] = record.session_id;
  j["created_at"] = record.created_at;
  j["scenario"] = record.scenario;
  j["persona"] = record.persona;
  j["prompt"] = record.prompt;
  write_line(j.dump());
}

void SessionLogWriter::append_turn(const pipeline::Turn& turn) {
  write_line(Json{{"kind", "turn"}, {"turn", turn}}.dump());
}

void SessionLogWriter::append_sentiment(std::uint64_t turn_id, const sentiment::ClassificationResult& result,
                                        double seconds) {
  Json j{{"kind", "sentiment"}, {"turn_id", turn_id}, {"result", result}, {"seconds", seconds}};
  write_line(j.dump());
}

void SessionLogWriter::append_closed(std::string_view at) {
  write_line(Json{{"kind", "closed"}, {"at", at}}.dump());
}

namespace {

void apply_sentiment(SessionRecord& rec, const Json& j) {
  const auto id = j.at("turn_id").get<std::uint64_t>();
  for (auto& t : rec.turns) {
    if (t.turn_id != id) continue;
    const Json& r = j.at("result");
    if (!r.at("label").is_null()) t.doctor_sentiment = sentiment::parse_label(r["label"].get<std::string>());
    t.sentiment_unparsed = r.value("unparsed", false);
    if (r.contains("error")) t.sentiment_error = r["error"].get<std::string>();
    t.timings.sentiment_s = j.value("seconds", 0.0);
    return;
  }
  throw Error(ErrorCode::parse_error, "sentiment for unknown turn " + std::to_string(id));
}

}  // namespace

SessionRecord read_session_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open session log " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  // getline drops the final newline; a last line without one never finished.
  in.clear();
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::streamoff>(in.tellg());
  bool torn_tail = false;
  if (size > 0) {
    in.seekg(size - 1);
    torn_tail = in.get() != '\n';
  }

  SessionRecord rec;
  bool have_header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const bool last = i + 1 == lines.size();
    if (lines[i].empty()) continue;
    Json j;
    try {
      j = Json::parse(lines[i]);
    } catch (const nlohmann::json::exception& e) {
      if (last && torn_tail) break;
      throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    try {
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "header") {
        if (j.value("schema", "") != kSessionLogSchema) {
          throw Error(ErrorCode::parse_error, "unsupported session log schema");
        }
        rec.session_id = j.at("session_id").get<std::string>();
        rec.created_at = j.at("created_at").get<std::string>();
        rec.scenario = j.at("scenario").get<kb::ScenarioSpec>();
        rec.persona = j.at("persona").get<scenario::PersonaProfile>();
        rec.prompt = j.at("prompt").get<scenario::SystemPrompt>();
        have_header = true;
      } else if (!have_header) {
        throw Error(ErrorCode::parse_error, "record before header");
      } else if (kind == "turn") {
        rec.turns.push_back(j.at("turn").get<pipeline::Turn>());
      } else if (kind == "sentiment") {
        apply_sentiment(rec, j);
      } else if (kind == "closed") {
        rec.status = SessionStatus::closed;
      } else {
        throw Error(ErrorCode::parse_error, "unknown record kind '" + kind + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::parse_error, path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::parse_error, path.string() + ": missing header");
  return rec;
}

std::filesystem::path session_log_path(const std::filesystem::path& dir, std::string_view session_id) {
  return dir / (std::string(session_id) + ".jsonl");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace vpsim::service
