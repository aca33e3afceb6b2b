#include "crossing/server.hpp"

#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <deque>
#include <fmt/format.h>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include "crossing/config.hpp"
#include "crossing/trace_io.hpp"

namespace crossing {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class WsConnection;

}  // namespace

struct Server::Impl {
  explicit Impl(ServerOptions o) : options(std::move(o)), acceptor(ioc), timer(ioc), signals(ioc) {}

  ServerOptions options;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::steady_timer timer;
  net::signal_set signals;
  std::thread thread;
  std::chrono::steady_clock::time_point epoch = std::chrono::steady_clock::now();
  std::map<std::string, std::unique_ptr<Session>> sessions;
  std::map<std::string, std::set<std::shared_ptr<WsConnection>>> clients;
  std::size_t next_id = 1;
  bool stopped = false;

  double now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch).count();
  }

  void listen();
  void accept();
  void schedule_tick();
  void tick();
  void broadcast(const std::string& id, const nlohmann::json& message);
  void attach(const std::shared_ptr<WsConnection>& c);
  void detach(const std::shared_ptr<WsConnection>& c);
  void on_message(const std::shared_ptr<WsConnection>& c, const std::string& text);
  http::response<http::string_body> route(const http::request<http::string_body>& req);
  std::string open_session(const nlohmann::json& body);
  void shutdown();
};

namespace {

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket socket, Server::Impl& server, std::string session)
      : ws_(std::move(socket)), server_(server), session_(std::move(session)) {}

  const std::string& session() const noexcept { return session_; }

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->server_.attach(self);
      self->read();
    });
  }

  void send(std::string text) {
    if (closed_) return;
    if (queue_.size() >= server_.options.max_queued_messages) {
      // A client that cannot keep up is dropped instead of stalling the tick.
      close();
      return;
    }
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).socket().close(ec);
    server_.detach(shared_from_this());
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->server_.on_message(self, text);
      if (!self->closed_) self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->close();
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty() && !self->closed_) self->write();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& server_;
  std::string session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool closed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, Server::Impl& server)
      : stream_(std::move(socket)), server_(server) {}

  void start() { read(); }

 private:
  void read() {
    request_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) return;
                       self->dispatch();
                     });
  }

  void dispatch() {
    if (websocket::is_upgrade(request_)) {
      const std::string target(request_.target());
      const std::string prefix = "/sessions/";
      const std::string suffix = "/ws";
      if (target.size() > prefix.size() + suffix.size() && target.rfind(prefix, 0) == 0 &&
          target.compare(target.size() - suffix.size(), suffix.size(), suffix) == 0) {
        const std::string id =
            target.substr(prefix.size(), target.size() - prefix.size() - suffix.size());
        if (server_.sessions.count(id)) {
          stream_.expires_never();
          std::make_shared<WsConnection>(stream_.release_socket(), server_, id)
              ->start(std::move(request_));
          return;
        }
      }
      respond(server_.route(request_));
      return;
    }
    respond(server_.route(request_));
  }

  void respond(http::response<http::string_body> res) {
    auto shared = std::make_shared<http::response<http::string_body>>(std::move(res));
    http::async_write(stream_, *shared,
                      [self = shared_from_this(), shared](beast::error_code ec, std::size_t) {
                        if (ec) return;
                        if (shared->need_eof()) {
                          beast::error_code ignored;
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                          return;
                        }
                        self->read();
                      });
  }

  beast::tcp_stream stream_;
  Server::Impl& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
};

http::response<http::string_body> reply(const http::request<http::string_body>& req,
                                        http::status status, std::string body,
                                        std::string content_type = "application/json") {
  http::response<http::string_body> res{status, req.version()};
  res.set(http::field::server, "crossing");
  res.set(http::field::content_type, content_type);
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

http::response<http::string_body> json_error(const http::request<http::string_body>& req,
                                             http::status status, const std::string& message) {
  return reply(req, status, nlohmann::json{{"error", message}}.dump());
}

bool plain_file_name(const std::string& name) {
  return !name.empty() && name.find('/') == std::string::npos &&
         name.find('\\') == std::string::npos && name != "." && name != "..";
}

}  // namespace

void Server::Impl::listen() {
  const tcp::endpoint endpoint{net::ip::make_address(options.address), options.port};
  acceptor.open(endpoint.protocol());
  acceptor.set_option(net::socket_base::reuse_address(true));
  acceptor.bind(endpoint);
  acceptor.listen(net::socket_base::max_listen_connections);
  accept();
  schedule_tick();
}

void Server::Impl::accept() {
  acceptor.async_accept(ioc, [this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpConnection>(std::move(socket), *this)->start();
    accept();
  });
}

void Server::Impl::schedule_tick() {
  timer.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(options.tick_interval)));
  timer.async_wait([this](beast::error_code ec) {
    if (ec || stopped) return;
    tick();
    schedule_tick();
  });
}

void Server::Impl::tick() {
  const double t = now();
  for (auto& [id, session] : sessions) {
    for (const auto& message : session->advance(t)) broadcast(id, message);
  }
}

void Server::Impl::broadcast(const std::string& id, const nlohmann::json& message) {
  const auto it = clients.find(id);
  if (it == clients.end()) return;
  const std::string text = message.dump();
  // Copy: send() may drop a slow client from the set.
  const auto targets = it->second;
  for (const auto& c : targets) c->send(text);
}

void Server::Impl::attach(const std::shared_ptr<WsConnection>& c) {
  const auto it = sessions.find(c->session());
  if (it == sessions.end()) {
    c->close();
    return;
  }
  clients[c->session()].insert(c);
  it->second->client_connected(now());
  c->send(it->second->hello().dump());
  c->send(it->second->snapshot().dump());
}

void Server::Impl::detach(const std::shared_ptr<WsConnection>& c) {
  auto& set = clients[c->session()];
  if (set.erase(c) == 0) return;
  const auto it = sessions.find(c->session());
  if (it != sessions.end()) it->second->client_disconnected(now());
}

void Server::Impl::on_message(const std::shared_ptr<WsConnection>& c, const std::string& text) {
  const auto it = sessions.find(c->session());
  if (it == sessions.end()) return;
  nlohmann::json message;
  try {
    message = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    c->send(nlohmann::json{{"type", "error"}, {"message", "malformed JSON"}}.dump());
    return;
  }
  auto result = it->second->handle(message, now());
  for (const auto& m : result.to_sender) c->send(m.dump());
  for (const auto& m : result.broadcast) broadcast(c->session(), m);
}

std::string Server::Impl::open_session(const nlohmann::json& body) {
  if (!body.is_object()) throw ConfigError("request body must be a JSON object");
  std::vector<std::string> overrides;
  if (const auto it = body.find("set"); it != body.end()) {
    if (!it->is_array()) throw ConfigError("'set' must be an array of \"key=value\" strings");
    for (const auto& item : *it) {
      if (!item.is_string()) throw ConfigError("'set' entries must be strings");
      overrides.push_back(item.get<std::string>());
    }
  }
  ScenarioConfig config;
  if (const auto it = body.find("config"); it != body.end() && it->is_string()) {
    config = parse_scenario(it->get<std::string>(), overrides);
  } else if (const auto it2 = body.find("scenario"); it2 != body.end() && it2->is_string()) {
    const auto name = it2->get<std::string>();
    if (!plain_file_name(name)) throw ConfigError("scenario must be a file name from GET /scenarios");
    config = load_scenario({options.scenario_dir / name}, overrides);
  } else {
    throw ConfigError("request needs 'scenario' or 'config'");
  }
  SessionOptions session_options = options.session;
  if (const auto it = body.find("pace"); it != body.end()) {
    if (!it->is_number() || !(it->get<double>() > 0.0)) throw ConfigError("'pace' must be positive");
    session_options.pace = it->get<double>();
  }
  const std::string id = fmt::format("s{}", next_id++);
  auto session = std::make_unique<Session>(id, std::move(config), session_options);
  session->advance(now());
  sessions.emplace(id, std::move(session));
  return id;
}

http::response<http::string_body> Server::Impl::route(const http::request<http::string_body>& req) {
  const std::string target(req.target());
  const std::string path = target.substr(0, target.find('?'));

  if (req.method() == http::verb::options) return reply(req, http::status::no_content, "");

  if (path == "/scenarios" && req.method() == http::verb::get) {
    nlohmann::json list = nlohmann::json::array();
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(options.scenario_dir, ec)) {
      if (entry.is_regular_file() && entry.path().extension() == ".cfg") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      try {
        const auto config = load_scenario({file});
        list.push_back({{"file", file.filename().string()},
                        {"name", config.name},
                        {"model", std::string(to_string(config.model.kind))}});
      } catch (const std::exception&) {
        // Parameter and tuning files are not scenarios.
      }
    }
    return reply(req, http::status::ok, list.dump());
  }

  if (path == "/sessions" && req.method() == http::verb::get) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [id, session] : sessions) {
      list.push_back({{"id", id},
                      {"scenario", session->config().name},
                      {"state", std::string(to_string(session->state()))}});
    }
    return reply(req, http::status::ok, list.dump());
  }

  if (path == "/sessions" && req.method() == http::verb::post) {
    try {
      const auto body = req.body().empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body());
      const auto id = open_session(body);
      const auto& session = *sessions.at(id);
      return reply(req, http::status::created,
                   nlohmann::json{{"id", id}, {"hello", session.hello()}, {"state", session.snapshot()}}
                       .dump());
    } catch (const nlohmann::json::exception& e) {
      return json_error(req, http::status::bad_request, std::string("malformed JSON: ") + e.what());
    } catch (const std::exception& e) {
      return json_error(req, http::status::bad_request, e.what());
    }
  }

  const std::string prefix = "/sessions/";
  if (path.rfind(prefix, 0) == 0 && req.method() == http::verb::get) {
    const auto rest = path.substr(prefix.size());
    const auto slash = rest.find('/');
    const auto id = rest.substr(0, slash);
    const auto leaf = slash == std::string::npos ? std::string() : rest.substr(slash + 1);
    const auto it = sessions.find(id);
    if (it == sessions.end()) return json_error(req, http::status::not_found, "unknown session");
    if (leaf == "trace") {
      return reply(req, http::status::ok, trace_to_csv(it->second->trace()), "text/csv");
    }
    if (leaf == "inputs") {
      return reply(req, http::status::ok, format_inputs(it->second->input_log()) + "\n", "text/plain");
    }
  }
  return json_error(req, http::status::not_found, "no such endpoint");
}

void Server::Impl::shutdown() {
  if (stopped) return;
  stopped = true;
  beast::error_code ec;
  acceptor.close(ec);
  timer.cancel();
  signals.cancel(ec);
  for (auto& [id, set] : clients) {
    const auto copy = set;
    for (const auto& c : copy) c->close();
  }
  ioc.stop();
}

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() { stop(); }

unsigned short Server::start() {
  impl_->listen();
  const auto port = impl_->acceptor.local_endpoint().port();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
  return port;
}

void Server::run() {
  impl_->listen();
  impl_->signals.add(SIGINT);
  impl_->signals.add(SIGTERM);
  impl_->signals.async_wait([this](beast::error_code ec, int) {
    if (!ec) impl_->shutdown();
  });
  std::cerr << "listening on http://" << impl_->options.address << ":"
            << impl_->acceptor.local_endpoint().port() << "\n";
  impl_->ioc.run();
}

void Server::stop() {
  if (!impl_) return;
  net::post(impl_->ioc, [impl = impl_.get()] { impl->shutdown(); });
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace crossing
