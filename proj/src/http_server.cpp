#include "vpsim/http_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <condition_variable>
#include <cstdio>
#include <deque>
#include <mutex>
#include <set>

#include "vpsim/serialization.hpp"
#include "vpsim/text.hpp"

namespace vpsim::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

namespace {

constexpr std::size_t kMaxBody = 64 * 1024 * 1024;
constexpr double kEventPollS = 0.01;

// Raised inside handlers for an HTTP error that is not a library Error.
struct HttpError {
  http::status status;
  std::string code;
  std::string message;
};

http::status status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse_error: return http::status::bad_request;
    case ErrorCode::not_found: return http::status::not_found;
    case ErrorCode::conflict:
    case ErrorCode::session_active: return http::status::conflict;
    case ErrorCode::session_closed: return http::status::gone;
    case ErrorCode::unsupported_media: return http::status::unsupported_media_type;
    case ErrorCode::adapter_timeout:
    case ErrorCode::adapter_protocol: return http::status::bad_gateway;
    case ErrorCode::io_error: return http::status::internal_server_error;
  }
  return http::status::internal_server_error;
}

Response make_response(const Request& req, http::status status, const Json& body) {
  Response res{status, req.version()};
  res.set(http::field::server, "vpsim");
  res.set(http::field::content_type, "application/json");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = body.dump();
  res.prepare_payload();
  return res;
}

Json error_body(std::string_view code, std::string_view message) {
  return Json{{"error", Json{{"code", code}, {"message", message}}}};
}

std::vector<std::string> path_parts(std::string_view target) {
  if (auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string> parts;
  for (auto& p : text::split(target, '/')) {
    if (!p.empty()) parts.push_back(std::move(p));
  }
  return parts;
}

Json parse_body(const Request& req, bool allow_empty) {
  if (req.body().empty()) {
    if (allow_empty) return Json::object();
    throw Error(ErrorCode::invalid_argument, "request body is empty");
  }
  try {
    Json j = Json::parse(req.body());
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("request body is not JSON: ") + e.what());
  }
}

Json view_json(const PublicSessionView& v) {
  return Json{{"session_id", v.session_id},
              {"persona", v.persona},
              {"created_at", v.created_at},
              {"status", to_string(v.status)}};
}

pipeline::TurnInput turn_input(const Request& req) {
  const std::string content_type(req[http::field::content_type]);
  if (text::to_lower(content_type).rfind("audio/", 0) == 0) {
    pipeline::AudioClip clip;
    clip.codec = std::string(text::trim(content_type));
    clip.bytes.assign(req.body().begin(), req.body().end());
    return clip;
  }
  const Json body = parse_body(req, false);
  const bool has_text = body.contains("text");
  const bool has_audio = body.contains("audio");
  if (has_text == has_audio) throw Error(ErrorCode::invalid_argument, "send exactly one of text or audio");
  if (has_text) {
    if (!body["text"].is_string()) throw Error(ErrorCode::invalid_argument, "text must be a string");
    return body["text"].get<std::string>();
  }
  const Json& a = body["audio"];
  if (!a.is_object() || !a.contains("codec") || !a.contains("data") || !a["codec"].is_string() ||
      !a["data"].is_string()) {
    throw Error(ErrorCode::invalid_argument, "audio must be {codec, data}");
  }
  pipeline::AudioClip clip;
  clip.codec = a["codec"].get<std::string>();
  clip.bytes = base64_decode(a["data"].get<std::string>());
  return clip;
}

std::uint64_t parse_turn_id(const std::string& s) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw Error(ErrorCode::invalid_argument, "bad turn id '" + s + "'");
  return v;
}

}  // namespace

struct HttpServer::Impl {
  SessionManager& manager;
  std::string host;
  unsigned short port;

  asio::io_context accept_ctx;
  std::unique_ptr<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};

  std::mutex conn_mu;
  std::condition_variable conn_cv;
  std::size_t live_connections = 0;
  std::set<std::shared_ptr<tcp::socket>> sockets;

  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stopped = false;

  Impl(SessionManager& m, std::string h, unsigned short p) : manager(m), host(std::move(h)), port(p) {}

  Response route(const Request& req);
  void serve_connection(std::shared_ptr<asio::io_context> ctx, std::shared_ptr<tcp::socket> sock);
  void serve_events(std::shared_ptr<asio::io_context> ctx, std::shared_ptr<tcp::socket> sock, Request req,
                    const std::string& session_id);
  void accept_loop();
};

Response HttpServer::Impl::route(const Request& req) {
  const auto parts = path_parts(std::string_view(req.target().data(), req.target().size()));
  const auto method = req.method();
  try {
    if (method == http::verb::options) {
      Response res{http::status::no_content, req.version()};
      res.set(http::field::access_control_allow_origin, "*");
      res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
      res.set(http::field::access_control_allow_headers, "Content-Type");
      res.keep_alive(req.keep_alive());
      res.prepare_payload();
      return res;
    }
    if (parts.empty() || parts[0] != "v1") throw HttpError{http::status::not_found, "not_found", "no such route"};

    if (parts.size() == 2 && parts[1] == "health" && method == http::verb::get) {
      return make_response(req, http::status::ok,
                           Json{{"status", "ok"},
                                {"api_version", kApiVersion},
                                {"sessions", manager.session_ids().size()}});
    }
    if (parts.size() >= 2 && parts[1] == "sessions") {
      if (parts.size() == 2 && method == http::verb::post) {
        const Json body = parse_body(req, true);
        std::optional<std::uint64_t> seed;
        if (body.contains("seed") && !body["seed"].is_null()) {
          if (!body["seed"].is_number_unsigned()) {
            throw Error(ErrorCode::invalid_argument, "seed must be a non-negative integer");
          }
          seed = body["seed"].get<std::uint64_t>();
        }
        scenario::PersonaOverrides overrides;
        if (body.contains("persona")) overrides = scenario::persona_overrides_from_json(body["persona"]);
        return make_response(req, http::status::created, view_json(manager.create_session(seed, overrides)));
      }
      if (parts.size() == 2 && method == http::verb::get) {
        return make_response(req, http::status::ok, Json{{"sessions", manager.session_ids()}});
      }
      if (parts.size() < 3) throw HttpError{http::status::method_not_allowed, "method_not_allowed", "use POST"};
      const std::string& id = parts[2];

      if (parts.size() == 3 && method == http::verb::get) {
        return make_response(req, http::status::ok, view_json(manager.view(id)));
      }
      if (parts.size() == 4 && parts[3] == "turns" && method == http::verb::post) {
        const auto turn = manager.post_turn(id, turn_input(req));
        if (turn.ok()) return make_response(req, http::status::ok, Json{{"turn", public_turn_json(turn)}});
        const std::string code = turn.failure->kind == "timeout" ? "adapter_timeout" : "adapter_protocol";
        Json body = error_body(code, turn.failure->message);
        body["error"]["stage"] = pipeline::to_string(turn.failure->stage);
        body["turn"] = public_turn_json(turn);
        return make_response(req, http::status::bad_gateway, body);
      }
      if (parts.size() == 6 && parts[3] == "turns" && parts[5] == "audio" && method == http::verb::get) {
        auto clip = manager.reply_audio(id, parse_turn_id(parts[4]));
        if (!clip) throw HttpError{http::status::not_found, "not_found", "audio not retained for that turn"};
        Response res{http::status::ok, req.version()};
        res.set(http::field::content_type, clip->codec);
        res.set(http::field::access_control_allow_origin, "*");
        res.keep_alive(req.keep_alive());
        res.body().assign(clip->bytes.begin(), clip->bytes.end());
        res.prepare_payload();
        return res;
      }
      if (parts.size() == 4 && parts[3] == "transcript" && method == http::verb::get) {
        const auto v = manager.view(id);
        Json turns = Json::array();
        for (const auto& t : manager.transcript(id)) turns.push_back(public_turn_json(t));
        return make_response(req, http::status::ok,
                             Json{{"session_id", id}, {"status", to_string(v.status)}, {"turns", turns}});
      }
      if (parts.size() == 4 && parts[3] == "close" && method == http::verb::post) {
        manager.close_session(id);
        return make_response(req, http::status::ok, Json{{"session_id", id}, {"status", "closed"}});
      }
      if (parts.size() == 4 && parts[3] == "report" && method == http::verb::get) {
        return make_response(req, http::status::ok, Json(manager.report(id)));
      }
      if (parts.size() == 4 && parts[3] == "events") {
        throw HttpError{http::status::upgrade_required, "upgrade_required", "events need a WebSocket upgrade"};
      }
    }
    throw HttpError{http::status::not_found, "not_found", "no such route"};
  } catch (const HttpError& e) {
    return make_response(req, e.status, error_body(e.code, e.message));
  } catch (const Error& e) {
    return make_response(req, status_for(e.code()), error_body(to_string(e.code()), e.what()));
  } catch (const std::exception& e) {
    return make_response(req, http::status::internal_server_error, error_body("internal", e.what()));
  }
}

void HttpServer::Impl::serve_connection(std::shared_ptr<asio::io_context> ctx, std::shared_ptr<tcp::socket> sock) {
  beast::flat_buffer buffer;
  beast::error_code ec;
  while (!stopping) {
    http::request_parser<http::string_body> parser;
    parser.body_limit(kMaxBody);
    http::read(*sock, buffer, parser, ec);
    if (ec) break;
    Request req = parser.release();

    if (websocket::is_upgrade(req)) {
      const auto parts = path_parts(std::string_view(req.target().data(), req.target().size()));
      if (parts.size() == 4 && parts[0] == "v1" && parts[1] == "sessions" && parts[3] == "events") {
        serve_events(ctx, sock, std::move(req), parts[2]);
        return;
      }
    }
    Response res = route(req);
    http::write(*sock, res, ec);
    if (ec || !res.keep_alive()) break;
  }
  sock->shutdown(tcp::socket::shutdown_both, ec);
}

void HttpServer::Impl::serve_events(std::shared_ptr<asio::io_context> ctx, std::shared_ptr<tcp::socket> sock,
                                    Request req, const std::string& session_id) {
  beast::error_code ec;
  std::shared_ptr<Subscription> sub;
  try {
    // Subscribe before the handshake completes so nothing published after
    // the client sees the upgrade is missed.
    sub = manager.subscribe(session_id);
  } catch (const Error& e) {
    Response res = make_response(req, status_for(e.code()), error_body(to_string(e.code()), e.what()));
    res.keep_alive(false);
    http::write(*sock, res, ec);
    sock->shutdown(tcp::socket::shutdown_both, ec);
    return;
  }

  websocket::stream<tcp::socket&> ws(*sock);
  ws.set_option(websocket::stream_base::decorator(
      [](websocket::response_type& res) { res.set(http::field::server, "vpsim"); }));
  ws.accept(req, ec);
  if (ec) return;

  std::deque<std::string> outbox;
  bool writing = false;
  bool closing = false;
  beast::flat_buffer in;
  asio::steady_timer timer(*ctx);

  std::function<void()> pump_writes = [&] {
    if (writing || outbox.empty()) return;
    writing = true;
    ws.text(true);
    ws.async_write(asio::buffer(outbox.front()), [&](beast::error_code wec, std::size_t) {
      writing = false;
      outbox.pop_front();
      if (wec) {
        closing = true;
        ctx->stop();
        return;
      }
      pump_writes();
    });
  };

  std::optional<websocket::close_reason> pending_close;

  std::function<void()> poll = [&] {
    if (closing) return;
    if (!pending_close) {
      while (auto ev = sub->next(0)) outbox.push_back(ev->to_json().dump());
      if (sub->closed()) {
        pending_close = sub->overflowed()
                            ? websocket::close_reason(websocket::close_code::policy_error, "event consumer too slow")
                            : websocket::close_reason(websocket::close_code::normal, "session closed");
      } else if (stopping) {
        pending_close = websocket::close_reason(websocket::close_code::going_away, "server stopping");
      }
    }
    pump_writes();
    // The close frame goes out only after every queued event.
    if (pending_close && !writing && outbox.empty()) {
      closing = true;
      ws.async_close(*pending_close, [&](beast::error_code) { ctx->stop(); });
      return;
    }
    timer.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(kEventPollS)));
    timer.async_wait([&](beast::error_code tec) {
      if (!tec) poll();
    });
  };

  std::function<void()> read_loop = [&] {
    ws.async_read(in, [&](beast::error_code rec, std::size_t) {
      if (rec) {
        // Client went away or completed a close handshake.
        sub->close();
        closing = true;
        timer.cancel();
        ctx->stop();
        return;
      }
      const std::string msg = beast::buffers_to_string(in.data());
      in.consume(in.size());
      try {
        const Json j = Json::parse(msg);
        if (j.is_object() && j.value("type", "") == "ping") {
          outbox.push_back(Json{{"type", "pong"}}.dump());
          pump_writes();
        }
      } catch (const nlohmann::json::exception&) {
        // Clients only send pings; anything else is ignored.
      }
      read_loop();
    });
  };

  read_loop();
  poll();
  ctx->restart();
  ctx->run();
  sub->close();
  sock->shutdown(tcp::socket::shutdown_both, ec);
}

void HttpServer::Impl::accept_loop() {
  while (!stopping) {
    auto ctx = std::make_shared<asio::io_context>();
    auto sock = std::make_shared<tcp::socket>(*ctx);
    beast::error_code ec;
    acceptor->accept(*sock, ec);
    if (ec) {
      if (stopping) break;
      continue;
    }
    sock->set_option(tcp::no_delay(true), ec);
    {
      std::lock_guard lock(conn_mu);
      ++live_connections;
      sockets.insert(sock);
    }
    std::thread([this, ctx, sock] {
      try {
        serve_connection(ctx, sock);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "vpsim: connection error: %s\n", e.what());
      }
      std::lock_guard lock(conn_mu);
      sockets.erase(sock);
      --live_connections;
      conn_cv.notify_all();
    }).detach();
  }
}

HttpServer::HttpServer(SessionManager& manager, std::string host, unsigned short port)
    : impl_(std::make_unique<Impl>(manager, std::move(host), port)) {}

HttpServer::~HttpServer() { stop(); }

unsigned short HttpServer::start() {
  beast::error_code ec;
  const auto address = asio::ip::make_address(impl_->host, ec);
  if (ec) throw Error(ErrorCode::invalid_argument, "bad listen host '" + impl_->host + "'");
  impl_->acceptor = std::make_unique<tcp::acceptor>(impl_->accept_ctx);
  tcp::endpoint endpoint(address, impl_->port);
  impl_->acceptor->open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor->set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor->bind(endpoint, ec);
  if (!ec) impl_->acceptor->listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error(ErrorCode::io_error,
                "cannot listen on " + impl_->host + ":" + std::to_string(impl_->port) + ": " + ec.message());
  }
  const auto bound = impl_->acceptor->local_endpoint().port();
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
  return bound;
}

void HttpServer::stop() {
  if (!impl_ || impl_->stopping.exchange(true)) return;
  if (impl_->acceptor) {
    beast::error_code ec;
    // Wakes the blocking accept() on Linux.
    ::shutdown(impl_->acceptor->native_handle(), SHUT_RDWR);
    impl_->acceptor->close(ec);
  }
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  {
    std::unique_lock lock(impl_->conn_mu);
    for (auto& s : impl_->sockets) {
      beast::error_code ec;
      s->shutdown(tcp::socket::shutdown_both, ec);
    }
    impl_->conn_cv.wait(lock, [&] { return impl_->live_connections == 0; });
  }
  {
    std::lock_guard lock(impl_->stop_mu);
    impl_->stopped = true;
  }
  impl_->stop_cv.notify_all();
}

void HttpServer::wait() {
  std::unique_lock lock(impl_->stop_mu);
  impl_->stop_cv.wait(lock, [&] { return impl_->stopped; });
}

}  // namespace vpsim::service
