#include "vpsim/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <vector>

#include "json.hpp"
#include "vpsim/error.hpp"
#include "vpsim/text.hpp"

namespace vpsim::service {

std::string_view to_string(AdapterMode m) { return m == AdapterMode::mock ? "mock" : "remote"; }

namespace {

using Json = nlohmann::ordered_json;

AdapterMode parse_mode(std::string_view s) {
  const auto v = text::to_lower(text::trim(s));
  if (v == "mock") return AdapterMode::mock;
  if (v == "remote") return AdapterMode::remote;
  throw Error(ErrorCode::invalid_argument, "adapter mode must be mock or remote, got '" + std::string(s) + "'");
}

double parse_double(std::string_view key, std::string_view s) {
  const std::string str(text::trim(s));
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size()) {
    throw Error(ErrorCode::invalid_argument, std::string(key) + ": not a number: '" + str + "'");
  }
  return v;
}

std::size_t parse_size(std::string_view key, std::string_view s) {
  const std::string str(text::trim(s));
  char* end = nullptr;
  const long long v = std::strtoll(str.c_str(), &end, 10);
  if (str.empty() || end != str.c_str() + str.size() || v <= 0) {
    throw Error(ErrorCode::invalid_argument, std::string(key) + ": expected a positive integer, got '" + str + "'");
  }
  return static_cast<std::size_t>(v);
}

bool parse_bool(std::string_view key, std::string_view s) {
  const auto v = text::to_lower(text::trim(s));
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::invalid_argument, std::string(key) + ": expected a boolean, got '" + std::string(s) + "'");
}

// One settable key. The dotted name is the JSON path; the environment
// variable is VPSIM_ plus the name upper-cased with dots as underscores.
struct Key {
  std::string name;
  std::function<void(ServiceConfig&, std::string_view)> set;
};

std::vector<Key> keys() {
  std::vector<Key> k;
  auto str = [&](std::string name, std::string ServiceConfig::*field) {
    k.push_back({name, [field](ServiceConfig& c, std::string_view v) { c.*field = std::string(v); }});
  };
  auto num = [&](std::string name, double ServiceConfig::*field) {
    k.push_back({name, [name, field](ServiceConfig& c, std::string_view v) { c.*field = parse_double(name, v); }});
  };
  auto size = [&](std::string name, std::size_t ServiceConfig::*field) {
    k.push_back({name, [name, field](ServiceConfig& c, std::string_view v) { c.*field = parse_size(name, v); }});
  };
  auto flag = [&](std::string name, bool ServiceConfig::*field) {
    k.push_back({name, [name, field](ServiceConfig& c, std::string_view v) { c.*field = parse_bool(name, v); }});
  };
  auto endpoint = [&](const std::string& name, EndpointConfig ServiceConfig::*field) {
    k.push_back({name + ".url", [field](ServiceConfig& c, std::string_view v) { (c.*field).url = std::string(v); }});
    k.push_back({name + ".timeout_s", [name, field](ServiceConfig& c, std::string_view v) {
                   (c.*field).timeout_s = parse_double(name + ".timeout_s", v);
                 }});
  };

  k.push_back({"adapter.mode", [](ServiceConfig& c, std::string_view v) { c.adapter_mode = parse_mode(v); }});
  endpoint("adapter.transcriber", &ServiceConfig::transcriber);
  endpoint("adapter.patient_model", &ServiceConfig::patient_model);
  endpoint("adapter.synthesizer", &ServiceConfig::synthesizer);
  endpoint("adapter.sentiment_model", &ServiceConfig::sentiment_model);
  num("adapter.temperature", &ServiceConfig::temperature);
  size("memory.window", &ServiceConfig::memory_window);
  size("memory.char_budget", &ServiceConfig::memory_char_budget);
  num("latency_budget_s", &ServiceConfig::latency_budget_s);
  str("sentiment.model_id", &ServiceConfig::sentiment_model_id);
  flag("sentiment.blocking", &ServiceConfig::sentiment_blocking);
  size("sentiment.max_in_flight", &ServiceConfig::sentiment_max_in_flight);
  str("sentiment.prompt_path", &ServiceConfig::sentiment_prompt_path);
  str("sentiment.lexicon_path", &ServiceConfig::lexicon_path);
  str("kb_path", &ServiceConfig::kb_path);
  str("persistence_dir", &ServiceConfig::persistence_dir);
  str("templates_dir", &ServiceConfig::templates_dir);
  str("persona_catalog_dir", &ServiceConfig::persona_catalog_dir);
  str("listen", &ServiceConfig::listen);
  size("event_queue_capacity", &ServiceConfig::event_queue_capacity);
  flag("fsync", &ServiceConfig::fsync);
  return k;
}

std::string env_name(const std::string& key) {
  std::string out = "VPSIM_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

const Json* lookup(const Json& root, const std::string& dotted) {
  const Json* node = &root;
  for (const auto& part : text::split(dotted, '.')) {
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
  }
  return node;
}

// Every leaf in the file must be a known key so typos do not pass silently.
void check_unknown(const Json& node, const std::string& prefix, const std::vector<Key>& known) {
  for (const auto& [name, value] : node.items()) {
    const std::string path = prefix.empty() ? name : prefix + "." + name;
    if (value.is_object()) {
      check_unknown(value, path, known);
      continue;
    }
    bool found = false;
    for (const auto& k : known) found = found || k.name == path;
    if (!found) throw Error(ErrorCode::invalid_argument, "unknown config key '" + path + "'");
  }
}

}  // namespace

void ServiceConfig::validate() const {
  auto positive = [](std::string_view name, double v) {
    if (!(v > 0)) throw Error(ErrorCode::invalid_argument, std::string(name) + " must be positive");
  };
  positive("adapter.transcriber.timeout_s", transcriber.timeout_s);
  positive("adapter.patient_model.timeout_s", patient_model.timeout_s);
  positive("adapter.synthesizer.timeout_s", synthesizer.timeout_s);
  positive("adapter.sentiment_model.timeout_s", sentiment_model.timeout_s);
  positive("adapter.temperature", temperature);
  positive("memory.window", static_cast<double>(memory_window));
  positive("memory.char_budget", static_cast<double>(memory_char_budget));
  positive("latency_budget_s", latency_budget_s);
  positive("sentiment.max_in_flight", static_cast<double>(sentiment_max_in_flight));
  positive("event_queue_capacity", static_cast<double>(event_queue_capacity));
  if (sentiment_model_id.empty()) throw Error(ErrorCode::invalid_argument, "sentiment.model_id is empty");
  if (adapter_mode == AdapterMode::remote) {
    for (const auto* e : {&transcriber, &patient_model, &synthesizer}) {
      if (e->url.empty()) throw Error(ErrorCode::invalid_argument, "remote mode needs every adapter url");
    }
  }
  if (sentiment_model_id != "rule" && sentiment_model.url.empty()) {
    throw Error(ErrorCode::invalid_argument, "sentiment model '" + sentiment_model_id + "' needs a url");
  }
  parse_listen(listen);
}

std::optional<std::string> process_env(std::string_view name) {
  const char* v = std::getenv(std::string(name).c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

ServiceConfig apply_env(ServiceConfig cfg, const EnvLookup& env) {
  for (const auto& k : keys()) {
    if (auto v = env(env_name(k.name))) k.set(cfg, *v);
  }
  return cfg;
}

ServiceConfig load_config(const std::string& path, const EnvLookup& env) {
  ServiceConfig cfg;
  const auto known = keys();
  if (!path.empty()) {
    Json root;
    try {
      root = Json::parse(text::read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse_error, path + ": " + e.what());
    }
    if (!root.is_object()) throw Error(ErrorCode::parse_error, path + ": expected an object");
    check_unknown(root, "", known);
    for (const auto& k : known) {
      const Json* v = lookup(root, k.name);
      if (!v) continue;
      k.set(cfg, v->is_string() ? v->get<std::string>() : v->dump());
    }
  }
  cfg = apply_env(std::move(cfg), env);
  cfg.validate();
  return cfg;
}

ListenAddress parse_listen(std::string_view s) {
  const auto colon = s.rfind(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::invalid_argument, "listen address must be host:port, got '" + std::string(s) + "'");
  }
  ListenAddress a;
  a.host = std::string(s.substr(0, colon));
  if (a.host.empty()) a.host = "0.0.0.0";
  const std::string port(s.substr(colon + 1));
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (port.empty() || end != port.c_str() + port.size() || p < 0 || p > 65535) {
    throw Error(ErrorCode::invalid_argument, "bad listen port '" + port + "'");
  }
  a.port = static_cast<unsigned short>(p);
  return a;
}

}  // namespace vpsim::service
