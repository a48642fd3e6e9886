#include <gtest/gtest.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <set>

#include <json.hpp>

#include "glide/bridge.hpp"
#include "support.hpp"

using namespace glide;
using nlohmann::json;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

// Thread-safe frame collector standing in for a client.
struct Inbox {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<json> frames;
  bool closed = false;

  void push(const std::string& s) {
    std::lock_guard lk(mu);
    frames.push_back(json::parse(s));
    cv.notify_all();
  }
  void close() {
    std::lock_guard lk(mu);
    closed = true;
    cv.notify_all();
  }
  // Waits for the first frame of `type` at or after index `from`.
  std::optional<json> wait_for(const std::string& type, std::size_t from = 0, double seconds = 60.0) {
    std::unique_lock lk(mu);
    std::optional<json> found;
    cv.wait_for(lk, std::chrono::duration<double>(seconds), [&] {
      for (std::size_t i = from; i < frames.size(); ++i)
        if (frames[i]["type"] == type) {
          found = frames[i];
          return true;
        }
      return false;
    });
    return found;
  }
  // Waits for frame `i` in arrival order.
  std::optional<json> at(std::size_t i, double seconds = 60.0) {
    std::unique_lock lk(mu);
    if (!cv.wait_for(lk, std::chrono::duration<double>(seconds), [&] { return frames.size() > i; })) return {};
    return frames[i];
  }
  std::vector<json> snapshot() {
    std::lock_guard lk(mu);
    return frames;
  }
};

struct FakeClock {
  std::atomic<double> now{0.0};
  Clock fn() {
    return [this] { return now.load(); };
  }
};

BridgeConfig bridge_cfg(const std::string& tag) {
  BridgeConfig bc;
  bc.sim = test::scenario("straight_glide");
  bc.sim.truth_localization = true;
  bc.map = test::shared_map("straight_corridor");
  bc.speed = 0.0;  // unpaced
  bc.log_dir = test::temp_dir("bridge-" + tag);
  return bc;
}

struct Session {
  Inbox inbox;
  FakeClock clock;
  std::string id = "s1";
  std::uint64_t seq = 0;
  SessionRunner runner;

  explicit Session(const BridgeConfig& bc)
      : runner(bc, id, [this](std::string s) { inbox.push(s); }, [this](std::string) { inbox.close(); },
               clock.fn()) {
    runner.start();
  }
  void send(json msg) {
    msg["session"] = id;
    msg["seq"] = ++seq;
    runner.push_inbound(msg.dump());
  }
  void input(double push, double torque) { send({{"type", "input"}, {"push_speed", push}, {"torque", torque}}); }
  void control(const std::string& action) { send({{"type", "control"}, {"action", action}}); }
};

}  // namespace

TEST(Bridge, LiveInputGoesStaleAndDecays) {
  double now = 0.0;
  LiveUserSource src(0.5, 2.0, [&] { return now; });
  UserPerception p;
  p.dt = 0.02;
  EXPECT_EQ(src.tick(p).push_speed, 0.0);
  src.apply(0.8, 0.4);
  now = 0.3;
  HandleState h = src.tick(p);
  EXPECT_EQ(h.push_speed, 0.8);
  EXPECT_EQ(h.torque, 0.4);
  EXPECT_EQ(h.lateral_offset, 0.0);
  now = 0.6;  // stale: push decays at 2 m/s^2 and torque drops
  h = src.tick(p);
  EXPECT_NEAR(h.push_speed, 0.76, 1e-12);
  EXPECT_EQ(h.torque, 0.0);
  for (int i = 0; i < 100; ++i) h = src.tick(p);
  EXPECT_EQ(h.push_speed, 0.0);
  src.apply(0.5, 0.0);  // fresh input wins again
  EXPECT_EQ(src.tick(p).push_speed, 0.5);
}

TEST(Bridge, ClampInput) {
  double push = 5.0, torque = -9.0;
  const auto w = clamp_input(push, torque, InputLimits{});
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(push, 3.0);
  EXPECT_EQ(torque, -5.0);
  push = 0.8, torque = 0.1;
  EXPECT_FALSE(clamp_input(push, torque, InputLimits{}).has_value());
  push = std::nan(""), torque = 0.0;
  EXPECT_TRUE(clamp_input(push, torque, InputLimits{}).has_value());
  EXPECT_EQ(push, 0.0);
}

TEST(Bridge, HelloCarriesMapDigestAndConfig) {
  const BridgeConfig bc = bridge_cfg("hello");
  Session s(bc);
  const auto hello = s.inbox.wait_for("hello");
  ASSERT_TRUE(hello);
  EXPECT_EQ((*hello)["protocol"], kProtocol);
  EXPECT_EQ((*hello)["session"], "s1");
  EXPECT_EQ((*hello)["seq"], 0);
  EXPECT_EQ((*hello)["map_digest"], map_digest(*bc.map));
  EXPECT_EQ(map_digest(load_map_text((*hello)["map"].dump())), map_digest(*bc.map));
  EXPECT_EQ((*hello)["config"]["mode"], "glide-directed");
}

TEST(Bridge, PushMovesTheDeviceAndTheLogRefeedsIdentically) {
  const BridgeConfig bc = bridge_cfg("push");
  Session s(bc);
  ASSERT_TRUE(s.inbox.wait_for("hello"));
  s.input(0.8, 0.0);
  s.control("start");
  const auto end = s.inbox.wait_for("trial_end", 0, 120.0);
  ASSERT_TRUE(end);
  EXPECT_EQ((*end)["status"], "arrived");
  const auto frames = s.inbox.snapshot();
  std::uint64_t last_seq = 0;
  double first_x = -1.0, last_x = -1.0;
  bool saw_costmap = false;
  for (const auto& f : frames) {
    if (f["seq"].get<std::uint64_t>() > 0) EXPECT_GT(f["seq"].get<std::uint64_t>(), last_seq);
    last_seq = f["seq"];
    if (f["type"] != "tick") continue;
    if (first_x < 0) first_x = f["truth"][0];
    last_x = f["truth"][0];
    if (f["tick"].get<int>() > 5) EXPECT_EQ(f["handle"]["push"], 0.8);
    if (f.contains("costmap")) {
      saw_costmap = true;
      EXPECT_LE(f["costmap"]["size"].get<int>(), 32);
    }
  }
  EXPECT_GT(last_x - first_x, 30.0);
  EXPECT_TRUE(saw_costmap);
  s.runner.disconnect();
  s.runner.join();
  const auto logs = s.runner.logs();
  ASSERT_EQ(logs.size(), 1u);
  const ParsedLog recorded = parse_log(read_log(logs[0]));
  EXPECT_EQ(recorded.end["status"], "arrived");
  const RunResult again = rerun(recorded, bc.map);
  EXPECT_EQ(join_log(again.log), test::slurp(logs[0]));
}

TEST(Bridge, StaleInputHaltsTheDevice) {
  BridgeConfig bc = bridge_cfg("stale");
  bc.sim.timeout = 20.0;
  Session s(bc);
  ASSERT_TRUE(s.inbox.wait_for("hello"));
  s.input(7.5, 0.0);  // the clamp warning tells us the input landed
  ASSERT_TRUE(s.inbox.wait_for("warning"));
  s.clock.now = 10.0;  // and the client never sends again
  s.control("start");
  const auto end = s.inbox.wait_for("trial_end", 0, 120.0);
  ASSERT_TRUE(end);
  EXPECT_EQ((*end)["status"], "timeout");
  double x0 = -1.0, x_end = 0.0, push = -1.0;
  for (const auto& f : s.inbox.snapshot())
    if (f["type"] == "tick") {
      if (x0 < 0) x0 = f["truth"][0];
      x_end = f["truth"][0];
      push = f["handle"]["push"];
    }
  EXPECT_EQ(push, 0.0);
  // input that was already stale at the first tick never moves the device
  EXPECT_NEAR(x_end - x0, 0.0, 1e-9);
}

TEST(Bridge, OutOfRangeInputIsClampedWithAWarning) {
  Session s(bridge_cfg("clamp"));
  ASSERT_TRUE(s.inbox.wait_for("hello"));
  s.input(7.5, 0.0);
  const auto w = s.inbox.wait_for("warning");
  ASSERT_TRUE(w);
  EXPECT_NE((*w)["message"].get<std::string>().find("clamped"), std::string::npos);
}

TEST(Bridge, UnknownMessageTypeClosesTheSession) {
  Session s(bridge_cfg("unknown"));
  ASSERT_TRUE(s.inbox.wait_for("hello"));
  s.send({{"type", "teleport"}});
  const auto e = s.inbox.wait_for("error");
  ASSERT_TRUE(e);
  EXPECT_NE((*e)["message"].get<std::string>().find("teleport"), std::string::npos);
  std::unique_lock lk(s.inbox.mu);
  EXPECT_TRUE(s.inbox.cv.wait_for(lk, std::chrono::seconds(10), [&] { return s.inbox.closed; }));
}

TEST(Bridge, SequenceAndSessionAreChecked) {
  {
    Session s(bridge_cfg("seq"));
    ASSERT_TRUE(s.inbox.wait_for("hello"));
    s.input(0.1, 0.0);
    json stale{{"type", "input"}, {"push_speed", 0.1}, {"torque", 0.0}, {"session", "s1"}, {"seq", 1}};
    s.runner.push_inbound(stale.dump());
    const auto e = s.inbox.wait_for("error");
    ASSERT_TRUE(e);
    EXPECT_NE((*e)["message"].get<std::string>().find("does not increase"), std::string::npos);
  }
  {
    Session s(bridge_cfg("sid"));
    ASSERT_TRUE(s.inbox.wait_for("hello"));
    json other{{"type", "input"}, {"push_speed", 0.1}, {"torque", 0.0}, {"session", "zz"}, {"seq", 1}};
    s.runner.push_inbound(other.dump());
    ASSERT_TRUE(s.inbox.wait_for("error"));
  }
}

TEST(Bridge, ControlsReconfigureBeforeTheFirstTick) {
  Session s(bridge_cfg("ctl"));
  ASSERT_TRUE(s.inbox.wait_for("hello"));
  s.send({{"type", "control"}, {"action", "set_goal"}, {"value", "nowhere"}});
  const auto w = s.inbox.wait_for("warning");
  ASSERT_TRUE(w);
  EXPECT_NE((*w)["message"].get<std::string>().find("rejected"), std::string::npos);
  const std::size_t mark = s.inbox.snapshot().size();
  s.send({{"type", "control"}, {"action", "set_mode"}, {"value", "user-directed"}});
  const auto hello = s.inbox.wait_for("hello", mark);
  ASSERT_TRUE(hello);
  EXPECT_EQ((*hello)["config"]["mode"], "user-directed");
  s.send({{"type", "control"}, {"action", "fly"}});
  ASSERT_TRUE(s.inbox.wait_for("error"));
}

TEST(Bridge, DisconnectAbortsAndKeepsTheLog) {
  BridgeConfig bc = bridge_cfg("abort");
  bc.speed = 1.0;  // paced so the trial is still running when the client leaves
  Session s(bc);
  ASSERT_TRUE(s.inbox.wait_for("hello"));
  s.input(0.5, 0.0);
  s.control("start");
  ASSERT_TRUE(s.inbox.wait_for("tick"));
  s.runner.disconnect();
  s.runner.join();
  const auto logs = s.runner.logs();
  ASSERT_EQ(logs.size(), 1u);
  const ParsedLog log = parse_log(read_log(logs[0]));
  EXPECT_EQ(log.end["status"], "aborted");
  EXPECT_EQ(log.end["message"], "session closed");
  const RunResult again = rerun(log, bc.map);
  EXPECT_EQ(join_log(again.log), test::slurp(logs[0]));
}

TEST(Bridge, WebSocketLoopback) {
  BridgeConfig bc = bridge_cfg("ws");
  bc.port = 0;
  BridgeServer server(bc);
  server.start();
  ASSERT_GT(server.port(), 0);

  asio::io_context ioc;
  const auto connect = [&](websocket::stream<tcp::socket>& ws) {
    ws.next_layer().connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), server.port()));
    ws.handshake("127.0.0.1", "/");
  };
  const auto read = [](websocket::stream<tcp::socket>& ws) {
    beast::flat_buffer buf;
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  };

  websocket::stream<tcp::socket> ws(ioc);
  connect(ws);
  const json hello = read(ws);
  EXPECT_EQ(hello["type"], "hello");
  EXPECT_EQ(hello["map_digest"], map_digest(*bc.map));
  const std::string sid = hello["session"];

  // a second client is turned away
  websocket::stream<tcp::socket> ws2(ioc);
  connect(ws2);
  const json busy = read(ws2);
  EXPECT_EQ(busy["type"], "error");

  ws.write(asio::buffer(json{{"type", "input"}, {"session", sid}, {"seq", 1}, {"push_speed", 0.8}, {"torque", 0.0}}.dump()));
  ws.write(asio::buffer(json{{"type", "control"}, {"session", sid}, {"seq", 2}, {"action", "start"}}.dump()));
  json f;
  double x0 = -1.0, x = 0.0;
  do {
    f = read(ws);
    if (f["type"] == "tick") {
      if (x0 < 0) x0 = f["truth"][0];
      x = f["truth"][0];
    }
  } while (f["type"] != "trial_end");
  EXPECT_EQ(f["status"], "arrived");
  EXPECT_GT(x - x0, 30.0);
  beast::error_code ec;
  ws.close(websocket::close_code::normal, ec);
  server.stop();
  EXPECT_EQ(server.logs().size(), 1u);
}

TEST(Bridge, BindFailureIsReported) {
  BridgeConfig bc = bridge_cfg("bind");
  bc.port = 0;
  BridgeServer a(bc);
  a.start();
  bc.port = a.port();
  BridgeServer b(bc);
  EXPECT_THROW(b.start(), std::runtime_error);
}

TEST(Bridge, CueTicksAreNeverDecimated) {
  BridgeConfig bc = bridge_cfg("cues");
  bc.sim = test::scenario("ud_kitchen");
  bc.map = test::shared_map("three_destinations");
  bc.tick_rate = 1.0;  // one routine frame per simulated second
  Session s(bc);
  ASSERT_TRUE(s.inbox.wait_for("hello"));
  s.input(0.6, 0.0);
  s.control("start");
  std::set<std::string> announced;
  bool acked = false, twisted = false;
  std::optional<json> end;
  for (std::size_t i = 0; !end; ++i) {
    const auto f = s.inbox.at(i);
    ASSERT_TRUE(f);
    if ((*f)["type"] == "trial_end") end = f;
    if ((*f)["type"] != "tick") continue;
    if (f->contains("announcement")) {
      announced.insert((*f)["announcement"]["node"]);
      if ((*f)["announcement"]["node"] == "J2" && !twisted) s.input(0.6, 0.8), twisted = true;
    }
    for (const auto& h : (*f)["haptics"])
      if (h["meaning"] == "RightAck") acked = true, s.input(0.6, 0.0);
  }
  EXPECT_EQ(announced, (std::set<std::string>{"J1", "J2"}));
  EXPECT_TRUE(acked);
  EXPECT_EQ((*end)["status"], "arrived");
}
