#pragma once

#include <memory>
#include <string>

#include "vpsim/adapters.hpp"

// HTTP adapters. Every endpoint takes a POST with a JSON body
//   {"input": <payload>, "parameters": {...}}
// and answers 200 with {"output": <payload>}. Audio payloads are
//   {"codec": "<tag>", "data": "<base64>"}.
namespace vpsim::pipeline {

struct Url {
  std::string scheme_host_port;  // "http://host:port"
  std::string path;              // "/v1/x"
  static Url parse(const std::string& url);
};

class RemoteTranscriber final : public Transcriber {
 public:
  explicit RemoteTranscriber(std::string url);
  std::string transcribe(const AudioClip& audio, double timeout_s) override;

 private:
  Url url_;
};

class RemoteChatModel final : public ChatModel {
 public:
  // model_id is passed through as parameters.model when non-empty.
  explicit RemoteChatModel(std::string url, std::string model_id = {});
  std::string complete(std::span<const ChatMessage> messages, const GenerationParams& params,
                       double timeout_s) override;

 private:
  Url url_;
  std::string model_id_;
};

class RemoteSynthesizer final : public Synthesizer {
 public:
  explicit RemoteSynthesizer(std::string url);
  AudioClip synthesize(std::string_view text, double timeout_s) override;

 private:
  Url url_;
};

}  // namespace vpsim::pipeline
