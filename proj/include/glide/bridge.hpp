#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "glide/engine.hpp"

namespace glide {

inline constexpr const char* kProtocol = "glide-session/1";

using Clock = std::function<double()>;  // seconds, monotone

/// Handle input from an interactive client. Latest input wins; once it goes
/// stale the push decays to zero at `decay` m/s^2 (dead-man behaviour).
class LiveUserSource : public UserSource {
 public:
  struct Input {
    double push_speed = 0.0;
    double torque = 0.0;
    double received = 0.0;  // clock time
  };

  LiveUserSource(double staleness, double decay, Clock clock)
      : staleness_(staleness), decay_(decay), clock_(std::move(clock)) {}

  void apply(double push_speed, double torque);
  HandleState tick(const UserPerception& p) override;
  const std::optional<Input>& latest() const { return latest_; }

 private:
  double staleness_;
  double decay_;
  Clock clock_;
  std::optional<Input> latest_;
  double push_ = 0.0;
};

struct InputLimits {
  double max_push = 3.0;     // m/s
  double torque_range = 5.0; // N m
};

/// Clamps an input into range; returns a warning when anything changed.
std::optional<std::string> clamp_input(double& push_speed, double& torque, const InputLimits& limits);

struct BridgeConfig {
  SimConfig sim;
  std::shared_ptr<const ScenarioMap> map;
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  double tick_rate = 30.0;     // Tick frames per second of simulated time
  double speed = 1.0;          // wall-clock pacing factor; 0 runs unpaced
  double staleness = 0.5;      // s
  double stale_decay = 2.0;    // m/s^2
  std::filesystem::path log_dir = ".";
  bool autostart = false;      // start stepping without waiting for a start control
};

/// Session protocol frames. Every outbound frame carries the session id and a
/// strictly increasing sequence number.
struct FrameWriter {
  std::string session;
  std::uint64_t seq = 0;
  ojson frame(const std::string& type);
};

/// Per-session simulation loop. Owns the Simulation; all input arrives through
/// `push_inbound` and all output leaves through the `send` callback.
class SessionRunner {
 public:
  using Send = std::function<void(std::string)>;

  SessionRunner(const BridgeConfig& cfg, std::string session_id, Send send, Send close, Clock clock);
  ~SessionRunner();

  void start();
  void push_inbound(std::string text);
  /// Client went away; finishes the log and stops the loop.
  void disconnect();
  void join();

  /// Paths of the logs written so far.
  std::vector<std::filesystem::path> logs() const;

 private:
  void loop();
  void handle(const std::string& text);
  void handle_control(const nlohmann::json& msg);
  void reset();
  void finish_log();
  void send_hello();
  void send_tick(const ojson& rec);
  void warn(const std::string& what);
  void protocol_error(const std::string& what);

  BridgeConfig cfg_;
  SimConfig pending_;
  FrameWriter out_;
  Send send_;
  Send close_;
  Clock clock_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> inbound_;
  bool stop_ = false;

  std::thread thread_;
  std::unique_ptr<Simulation> sim_;
  LiveUserSource* live_ = nullptr;
  std::vector<std::string> log_;
  bool running_ = false;
  bool ended_ = false;
  bool closed_ = false;
  std::optional<std::uint64_t> last_client_seq_;
  double last_sent_ = -1e9;
  int resets_ = 0;
  mutable std::mutex logs_mu_;
  std::vector<std::filesystem::path> logs_;
};

/// WebSocket server accepting one interactive client at a time.
class BridgeServer {
 public:
  explicit BridgeServer(BridgeConfig cfg);
  ~BridgeServer();

  /// Binds and starts the network thread. Throws std::runtime_error when the
  /// endpoint cannot be bound.
  void start();
  unsigned short port() const { return port_; }
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  /// Logs written by finished sessions.
  std::vector<std::filesystem::path> logs() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  BridgeConfig cfg_;
  unsigned short port_ = 0;
};

}  // namespace glide
