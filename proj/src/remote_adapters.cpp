#include "vpsim/remote_adapters.hpp"

#include <chrono>
#include <cmath>

#include "httplib.h"
#include "vpsim/serialization.hpp"

namespace vpsim::pipeline {

Url Url::parse(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw Error(ErrorCode::invalid_argument, "adapter url must start with http://, got '" + url + "'");
  }
  const auto slash = url.find('/', scheme.size());
  Url u;
  u.scheme_host_port = url.substr(0, slash);
  u.path = slash == std::string::npos ? "/" : url.substr(slash);
  if (u.scheme_host_port.size() == scheme.size()) {
    throw Error(ErrorCode::invalid_argument, "adapter url has no host: '" + url + "'");
  }
  return u;
}

namespace {

// POSTs {"input","parameters"} and returns the "output" member.
Json call(const Url& url, const Json& input, const Json& parameters, double timeout_s) {
  httplib::Client client(url.scheme_host_port);
  const auto us = std::chrono::microseconds(static_cast<std::int64_t>(std::ceil(timeout_s * 1e6)));
  client.set_connection_timeout(us);
  client.set_read_timeout(us);
  client.set_write_timeout(us);

  const Json body{{"input", input}, {"parameters", parameters}};
  const auto res = client.Post(url.path, body.dump(), "application/json");
  const std::string where = url.scheme_host_port + url.path;
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw AdapterTimeout(where + ": no reply within " + std::to_string(timeout_s) + " s");
    }
    throw AdapterProtocolError(where + ": " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw AdapterProtocolError(where + ": HTTP " + std::to_string(res->status));
  }
  Json reply;
  try {
    reply = Json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw AdapterProtocolError(where + ": reply is not JSON: " + e.what());
  }
  if (!reply.is_object() || !reply.contains("output")) {
    throw AdapterProtocolError(where + ": reply has no output field");
  }
  return reply["output"];
}

std::string expect_string(const Json& out, const std::string& what) {
  if (!out.is_string()) throw AdapterProtocolError(what + ": output is not a string");
  return out.get<std::string>();
}

}  // namespace

RemoteTranscriber::RemoteTranscriber(std::string url) : url_(Url::parse(url)) {}

std::string RemoteTranscriber::transcribe(const AudioClip& audio, double timeout_s) {
  const Json input{{"codec", audio.codec}, {"data", base64_encode(audio.bytes)}};
  return expect_string(call(url_, input, Json::object(), timeout_s), "transcriber");
}

RemoteChatModel::RemoteChatModel(std::string url, std::string model_id)
    : url_(Url::parse(url)), model_id_(std::move(model_id)) {}

std::string RemoteChatModel::complete(std::span<const ChatMessage> messages, const GenerationParams& params,
                                      double timeout_s) {
  Json input = Json::array();
  for (const auto& m : messages) input.push_back(m);
  Json parameters{{"temperature", params.temperature}};
  if (!model_id_.empty()) parameters["model"] = model_id_;
  return expect_string(call(url_, input, parameters, timeout_s), "chat model");
}

RemoteSynthesizer::RemoteSynthesizer(std::string url) : url_(Url::parse(url)) {}

AudioClip RemoteSynthesizer::synthesize(std::string_view text, double timeout_s) {
  const Json out = call(url_, std::string(text), Json::object(), timeout_s);
  if (!out.is_object() || !out.contains("codec") || !out.contains("data") || !out["codec"].is_string() ||
      !out["data"].is_string()) {
    throw AdapterProtocolError("synthesizer: output must be {codec, data}");
  }
  AudioClip clip;
  clip.codec = out["codec"].get<std::string>();
  try {
    clip.bytes = base64_decode(out["data"].get<std::string>());
  } catch (const Error& e) {
    throw AdapterProtocolError(std::string("synthesizer: ") + e.what());
  }
  return clip;
}

}  // namespace vpsim::pipeline
