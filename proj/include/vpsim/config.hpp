#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace vpsim::service {

enum class AdapterMode { mock, remote };
std::string_view to_string(AdapterMode m);

struct EndpointConfig {
  std::string url;  // e.g. http://127.0.0.1:9000/v1/generate
  double timeout_s = 10.0;
};

struct ServiceConfig {
  AdapterMode adapter_mode = AdapterMode::mock;
  EndpointConfig transcriber{"", 10.0};
  EndpointConfig patient_model{"", 20.0};
  EndpointConfig synthesizer{"", 10.0};
  EndpointConfig sentiment_model{"", 10.0};
  double temperature = 0.7;

  std::size_t memory_window = 12;
  std::size_t memory_char_budget = 8000;
  double latency_budget_s = 1.5;

  // "rule" selects the lexicon baseline; anything else is sent to
  // sentiment_model as the model id.
  std::string sentiment_model_id = "rule";
  bool sentiment_blocking = false;
  std::size_t sentiment_max_in_flight = 4;
  std::string sentiment_prompt_path;  // empty: built-in template
  std::string lexicon_path;           // empty: built-in lexicon

  std::string kb_path;
  std::string persistence_dir = "sessions";
  std::string templates_dir;        // empty: built-in prompt templates
  std::string persona_catalog_dir;  // empty: built-in catalogs
  std::string listen = "127.0.0.1:8080";
  std::size_t event_queue_capacity = 256;
  bool fsync = true;

  // Throws Error(invalid_argument) on a non-positive number or bad mode.
  void validate() const;
};

using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;
std::optional<std::string> process_env(std::string_view name);

// Defaults, then the JSON file (if path non-empty), then VPSIM_* variables.
ServiceConfig load_config(const std::string& path, const EnvLookup& env = process_env);
ServiceConfig apply_env(ServiceConfig cfg, const EnvLookup& env);

struct ListenAddress {
  std::string host;
  unsigned short port = 0;
};
ListenAddress parse_listen(std::string_view s);

}  // namespace vpsim::service
