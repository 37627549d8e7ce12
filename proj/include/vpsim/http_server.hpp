#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include "vpsim/session_manager.hpp"

namespace vpsim::service {

inline constexpr int kApiVersion = 1;

// HTTP/1.1 + WebSocket front end over a SessionManager.
//
//   GET  /v1/health
//   POST /v1/sessions                      {"seed"?, "persona"?}
//   POST /v1/sessions/{id}/turns           {"text"} | {"audio":{"codec","data"}}
//   GET  /v1/sessions/{id}/transcript
//   POST /v1/sessions/{id}/close
//   GET  /v1/sessions/{id}/report
//   GET  /v1/sessions/{id}/events          WebSocket upgrade
//
// Errors are {"error":{"code","message"[,"stage"]}}.
class HttpServer {
 public:
  HttpServer(SessionManager& manager, std::string host, unsigned short port);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and starts accepting on a background thread. Returns the bound
  // port (useful with port 0).
  unsigned short start();
  void stop();
  // Blocks until stop() is called from elsewhere.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vpsim::service
