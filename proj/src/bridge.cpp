#include "glide/bridge.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <cmath>
#include <random>

namespace glide {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using steady = std::chrono::steady_clock;

namespace {

double steady_seconds() {
  return std::chrono::duration<double>(steady::now().time_since_epoch()).count();
}

std::string new_session_id() {
  std::random_device rd;
  return hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
}

}  // namespace

// ---------------------------------------------------------------------------

void LiveUserSource::apply(double push_speed, double torque) {
  latest_ = Input{push_speed, torque, clock_()};
}

HandleState LiveUserSource::tick(const UserPerception& p) {
  const double now = clock_();
  double torque = 0.0;
  if (latest_ && now - latest_->received <= staleness_) {
    push_ = latest_->push_speed;
    torque = latest_->torque;
  } else {
    push_ = std::max(0.0, push_ - decay_ * p.dt);
  }
  return HandleState{push_, 0.0, torque};
}

std::optional<std::string> clamp_input(double& push_speed, double& torque, const InputLimits& limits) {
  std::string msg;
  if (!std::isfinite(push_speed)) {
    push_speed = 0.0;
    msg += "push_speed is not finite; using 0. ";
  } else if (push_speed < 0.0 || push_speed > limits.max_push) {
    const double c = std::clamp(push_speed, 0.0, limits.max_push);
    msg += "push_speed " + std::to_string(push_speed) + " clamped to " + std::to_string(c) + ". ";
    push_speed = c;
  }
  if (!std::isfinite(torque)) {
    torque = 0.0;
    msg += "torque is not finite; using 0. ";
  } else if (std::abs(torque) > limits.torque_range) {
    const double c = std::clamp(torque, -limits.torque_range, limits.torque_range);
    msg += "torque " + std::to_string(torque) + " clamped to " + std::to_string(c) + ". ";
    torque = c;
  }
  if (msg.empty()) return std::nullopt;
  msg.pop_back();
  return msg;
}

ojson FrameWriter::frame(const std::string& type) {
  return {{"type", type}, {"session", session}, {"seq", seq++}};
}

// ---------------------------------------------------------------------------

SessionRunner::SessionRunner(const BridgeConfig& cfg, std::string session_id, Send send, Send close,
                             Clock clock)
    : cfg_(cfg), pending_(cfg.sim), send_(std::move(send)), close_(std::move(close)), clock_(std::move(clock)) {
  out_.session = std::move(session_id);
  if (!clock_) clock_ = steady_seconds;
}

SessionRunner::~SessionRunner() {
  disconnect();
  join();
}

void SessionRunner::start() { thread_ = std::thread([this] { loop(); }); }

void SessionRunner::push_inbound(std::string text) {
  {
    std::lock_guard lk(mu_);
    inbound_.push_back(std::move(text));
  }
  cv_.notify_one();
}

void SessionRunner::disconnect() {
  {
    std::lock_guard lk(mu_);
    stop_ = true;
  }
  cv_.notify_one();
}

void SessionRunner::join() {
  if (thread_.joinable()) thread_.join();
}

std::vector<std::filesystem::path> SessionRunner::logs() const {
  std::lock_guard lk(logs_mu_);
  return logs_;
}

void SessionRunner::loop() {
  try {
    reset();
  } catch (const std::exception& e) {
    protocol_error(std::string("cannot start session: ") + e.what());
    return;
  }
  send_hello();
  auto deadline = steady::now();
  bool was_running = false;
  for (;;) {
    std::deque<std::string> batch;
    bool stop = false;
    {
      std::unique_lock lk(mu_);
      const auto ready = [&] { return stop_ || !inbound_.empty(); };
      const bool stepping = running_ && !ended_;
      if (!ready()) {
        if (!stepping) cv_.wait(lk, ready);
        else if (cfg_.speed > 0.0) cv_.wait_until(lk, deadline, ready);
      }
      batch.swap(inbound_);
      stop = stop_;
    }
    for (const auto& text : batch) {
      if (closed_) break;
      handle(text);
    }
    if (stop || closed_) break;
    if (!running_ || ended_) {
      was_running = false;
      continue;
    }
    if (!was_running) {
      was_running = true;
      deadline = steady::now();
    }
    if (cfg_.speed > 0.0 && steady::now() < deadline) continue;

    const ojson& rec = sim_->step();
    log_.push_back(rec.dump());
    const double t = rec["t"].get<double>();
    // ticks carrying cues or events always go out; the rest are decimated
    const bool notable = rec.contains("announcement") || !rec["haptics"].empty() || !rec["events"].empty();
    if (sim_->finished() || notable || t - last_sent_ >= 1.0 / cfg_.tick_rate - 1e-9) {
      send_tick(rec);
      last_sent_ = t;
    }
    if (sim_->finished()) {
      ended_ = true;
      finish_log();
      ojson end = out_.frame("trial_end");
      end["status"] = std::string(to_string(sim_->status()));
      end["message"] = sim_->message();
      end["metrics"] = sim_->metrics().to_json();
      send_(end.dump());
    }
    if (cfg_.speed > 0.0) {
      deadline += std::chrono::duration_cast<steady::duration>(
          std::chrono::duration<double>(cfg_.sim.dt / cfg_.speed));
      if (steady::now() - deadline > std::chrono::milliseconds(500)) deadline = steady::now();
    }
  }
  if (sim_ && !ended_) {
    sim_->abort("session closed");
    finish_log();
  }
}

void SessionRunner::reset() {
  auto live = std::make_unique<LiveUserSource>(cfg_.staleness, cfg_.stale_decay, clock_);
  live_ = live.get();
  sim_ = std::make_unique<Simulation>(pending_, cfg_.map, std::move(live));
  ++resets_;
  log_.clear();
  log_.push_back(sim_->header_line());
  ended_ = false;
  running_ = cfg_.autostart;
  last_sent_ = -1e9;
  if (sim_->finished()) {
    ended_ = true;
    running_ = false;
    finish_log();
  }
}

void SessionRunner::finish_log() {
  if (!sim_) return;
  log_.push_back(sim_->end_line());
  std::filesystem::create_directories(cfg_.log_dir);
  const auto path = cfg_.log_dir / ("session-" + out_.session + "-" + std::to_string(resets_) + ".jsonl");
  write_log(log_, path);
  std::lock_guard lk(logs_mu_);
  logs_.push_back(path);
}

void SessionRunner::send_hello() {
  ojson h = out_.frame("hello");
  h["protocol"] = kProtocol;
  h["map_digest"] = map_digest(sim_->map());
  h["map"] = ojson::parse(serialize_map(sim_->map()));
  h["config"] = config_to_json(sim_->config());
  h["tick_rate"] = cfg_.tick_rate;
  h["status"] = std::string(to_string(sim_->status()));
  send_(h.dump());
  if (sim_->finished()) {
    ojson end = out_.frame("trial_end");
    end["status"] = std::string(to_string(sim_->status()));
    end["message"] = sim_->message();
    end["metrics"] = sim_->metrics().to_json();
    send_(end.dump());
  }
}

void SessionRunner::send_tick(const ojson& rec) {
  ojson f = out_.frame("tick");
  for (const char* key : {"tick", "t", "truth", "est", "converged", "handle", "steer", "brake", "advisory",
                          "guidance", "haptics", "events"})
    f[key] = rec[key];
  if (rec.contains("announcement")) f["announcement"] = rec["announcement"];
  const LocalCostmap& cm = sim_->costmap();
  if (cm.size() > 0) {
    const int factor = std::max(1, (cm.size() + 31) / 32);
    const LocalCostmap small = cm.downsample(factor);
    f["costmap"] = {{"origin", {small.origin().x, small.origin().y}},
                    {"resolution", small.resolution()},
                    {"size", small.size()},
                    {"data", std::vector<int>(small.costs().begin(), small.costs().end())}};
  }
  send_(f.dump());
}

void SessionRunner::warn(const std::string& what) {
  ojson w = out_.frame("warning");
  w["message"] = what;
  send_(w.dump());
}

void SessionRunner::protocol_error(const std::string& what) {
  ojson e = out_.frame("error");
  e["message"] = what;
  send_(e.dump());
  closed_ = true;
  close_("");
}

void SessionRunner::handle(const std::string& text) {
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return protocol_error("frame is not valid JSON");
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return protocol_error("frame has no type");
  if (msg.value("session", "") != out_.session) return protocol_error("frame session id does not match");
  if (!msg.contains("seq") || !msg["seq"].is_number_unsigned())
    return protocol_error("frame has no sequence number");
  const auto seq = msg["seq"].get<std::uint64_t>();
  if (last_client_seq_ && seq <= *last_client_seq_)
    return protocol_error("sequence number " + std::to_string(seq) + " does not increase");
  last_client_seq_ = seq;

  const std::string type = msg["type"];
  if (type == "input") {
    if (!msg.contains("push_speed") || !msg["push_speed"].is_number() || !msg.contains("torque") ||
        !msg["torque"].is_number())
      return protocol_error("input needs numeric push_speed and torque");
    double push = msg["push_speed"].get<double>();
    double torque = msg["torque"].get<double>();
    const auto w = clamp_input(push, torque, InputLimits{3.0, cfg_.sim.torque.range});
    live_->apply(push, torque);
    if (w) warn(*w);
  } else if (type == "control") {
    handle_control(msg);
  } else {
    protocol_error("unknown message type '" + type + "'");
  }
}

void SessionRunner::handle_control(const nlohmann::json& msg) {
  const std::string action = msg.value("action", "");
  const bool fresh = sim_->tick() == 0 && !ended_;
  const auto reconfigure = [&](SimConfig next) {
    const SimConfig saved = pending_;
    pending_ = std::move(next);
    if (!fresh) return warn("'" + action + "' takes effect after the next reset");
    try {
      reset();
    } catch (const std::exception& e) {
      pending_ = saved;
      reset();
      return warn(std::string("'") + action + "' rejected: " + e.what());
    }
    send_hello();
  };
  if (action == "start") {
    if (ended_) return warn("trial has ended; send reset first");
    running_ = true;
  } else if (action == "pause") {
    running_ = false;
  } else if (action == "reset") {
    if (!ended_ && sim_->tick() > 0) {
      sim_->abort("reset by client");
      finish_log();
    }
    try {
      reset();
    } catch (const std::exception& e) {
      pending_ = cfg_.sim;
      reset();
      warn(std::string("reset with defaults: ") + e.what());
    }
    send_hello();
  } else if (action == "set_mode") {
    auto mode = parse_mode(msg.value("value", ""));
    if (!mode) return warn("unknown mode");
    SimConfig next = pending_;
    next.mode = *mode;
    reconfigure(std::move(next));
  } else if (action == "set_goal") {
    if (!msg.contains("value") || !msg["value"].is_string()) return warn("set_goal needs a destination name");
    SimConfig next = pending_;
    next.goal = msg["value"].get<std::string>();
    reconfigure(std::move(next));
  } else if (action == "set_route") {
    if (!msg.contains("value") || !msg["value"].is_array()) return warn("set_route needs a list of directions");
    SimConfig next = pending_;
    next.user.policy.kind = PolicyKind::Scripted;
    next.user.policy.route.clear();
    for (const auto& d : msg["value"]) {
      auto dir = d.is_string() ? parse_direction(d.get<std::string>()) : std::nullopt;
      if (!dir) return warn("set_route: unknown direction " + d.dump());
      next.user.policy.route.push_back(*dir);
    }
    reconfigure(std::move(next));
  } else {
    protocol_error("unknown control action '" + action + "'");
  }
}

// ---------------------------------------------------------------------------

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  using Done = std::function<void(Connection*)>;

  Connection(tcp::socket socket, const BridgeConfig& cfg, bool reject, Done done)
      : ws_(std::move(socket)), cfg_(cfg), reject_(reject), done_(std::move(done)) {}

  void run() {
    auto self = shared_from_this();
    ws_.async_accept([self](beast::error_code ec) { self->on_accept(ec); });
  }

  // Called on the network thread.
  void shutdown() {
    if (runner_) {
      runner_->disconnect();
      runner_->join();
    }
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

  std::vector<std::filesystem::path> logs() const { return runner_ ? runner_->logs() : std::vector<std::filesystem::path>{}; }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return finish();
    if (reject_) {
      FrameWriter w{new_session_id(), 0};
      ojson e = w.frame("error");
      e["message"] = "another client is connected";
      queue(e.dump());
      request_close();
      return;
    }
    std::weak_ptr<Connection> weak = shared_from_this();
    auto executor = ws_.get_executor();
    auto send = [weak, executor](std::string s) {
      asio::post(executor, [weak, s = std::move(s)]() mutable {
        if (auto c = weak.lock()) c->queue(std::move(s));
      });
    };
    auto close = [weak, executor](std::string) {
      asio::post(executor, [weak] {
        if (auto c = weak.lock()) c->request_close();
      });
    };
    runner_ = std::make_unique<SessionRunner>(cfg_, new_session_id(), send, close, nullptr);
    runner_->start();
    do_read();
  }

  void do_read() {
    auto self = shared_from_this();
    ws_.async_read(buf_, [self](beast::error_code ec, std::size_t) {
      if (ec) return self->finish();
      if (self->runner_) self->runner_->push_inbound(beast::buffers_to_string(self->buf_.data()));
      self->buf_.consume(self->buf_.size());
      self->do_read();
    });
  }

  void queue(std::string s) {
    out_.push_back(std::move(s));
    if (!writing_) write_next();
  }

  void write_next() {
    if (out_.empty()) {
      writing_ = false;
      if (closing_) do_close();
      return;
    }
    writing_ = true;
    ws_.text(true);
    auto self = shared_from_this();
    ws_.async_write(asio::buffer(out_.front()), [self](beast::error_code ec, std::size_t) {
      self->out_.pop_front();
      if (ec) {
        self->out_.clear();
        self->writing_ = false;
        return;
      }
      self->write_next();
    });
  }

  void request_close() {
    closing_ = true;
    if (!writing_) do_close();
  }

  void do_close() {
    if (closed_) return;
    closed_ = true;
    auto self = shared_from_this();
    ws_.async_close(websocket::close_code::normal, [self](beast::error_code) {});
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    if (runner_) {
      runner_->disconnect();
      runner_->join();
    }
    if (done_) done_(this);
  }

  websocket::stream<beast::tcp_stream> ws_;
  BridgeConfig cfg_;
  bool reject_;
  Done done_;
  beast::flat_buffer buf_;
  std::deque<std::string> out_;
  bool writing_ = false;
  bool closing_ = false;
  bool closed_ = false;
  bool finished_ = false;
  std::unique_ptr<SessionRunner> runner_;
};

}  // namespace

struct BridgeServer::Impl {
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> guard;
  std::thread io_thread;
  std::shared_ptr<Connection> active;

  mutable std::mutex mu;
  std::condition_variable cv;
  bool stopped = false;
  std::vector<std::filesystem::path> logs;

  void accept(const BridgeConfig& cfg) {
    acceptor.async_accept([this, &cfg](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      const bool busy = active != nullptr;
      auto conn = std::make_shared<Connection>(std::move(socket), cfg, busy, [this](Connection* c) {
        if (active.get() == c) {
          auto l = c->logs();
          std::lock_guard lk(mu);
          logs.insert(logs.end(), l.begin(), l.end());
          active.reset();
        }
      });
      if (!busy) active = conn;
      conn->run();
      accept(cfg);
    });
  }
};

BridgeServer::BridgeServer(BridgeConfig cfg) : impl_(std::make_unique<Impl>()), cfg_(std::move(cfg)) {
  if (!cfg_.map) throw ConfigError("bridge needs a map");
  if (!(cfg_.tick_rate > 0.0)) throw ConfigError("bridge tick_rate must be positive");
  if (!(cfg_.speed >= 0.0)) throw ConfigError("bridge speed must be >= 0");
}

BridgeServer::~BridgeServer() { stop(); }

void BridgeServer::start() {
  beast::error_code ec;
  const auto addr = asio::ip::make_address(cfg_.address, ec);
  if (ec) throw std::runtime_error("bad bind address '" + cfg_.address + "'");
  const tcp::endpoint ep(addr, cfg_.port);
  impl_->acceptor.open(ep.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(ep, ec);
  if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec)
    throw std::runtime_error("cannot bind " + cfg_.address + ":" + std::to_string(cfg_.port) + ": " + ec.message());
  port_ = impl_->acceptor.local_endpoint().port();
  impl_->guard.emplace(impl_->ioc.get_executor());
  impl_->accept(cfg_);
  impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
}

void BridgeServer::stop() {
  if (!impl_->io_thread.joinable()) return;
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    if (impl_->active) {
      impl_->active->shutdown();
      auto l = impl_->active->logs();
      std::lock_guard lk(impl_->mu);
      impl_->logs.insert(impl_->logs.end(), l.begin(), l.end());
      impl_->active.reset();
    }
    impl_->ioc.stop();
  });
  impl_->io_thread.join();
  {
    std::lock_guard lk(impl_->mu);
    impl_->stopped = true;
  }
  impl_->cv.notify_all();
}

void BridgeServer::wait() {
  std::unique_lock lk(impl_->mu);
  impl_->cv.wait(lk, [&] { return impl_->stopped; });
}

std::vector<std::filesystem::path> BridgeServer::logs() const {
  std::lock_guard lk(impl_->mu);
  return impl_->logs;
}

}  // namespace glide
