#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glide/floorplan.hpp"
#include "glide/modes.hpp"
#include "glide/planning.hpp"
#include "glide/sensing.hpp"
#include "glide/simuser.hpp"
#include "glide/vehicle.hpp"

namespace glide {

using ojson = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kLogFormat = "glide-log/1";
inline constexpr const char* kConfigFormat = "glide-scenario/1";

// ---------------------------------------------------------------------------
// Configuration

/// An obstacle missing from the floor plan, optionally moving at constant
/// velocity between `appear` and `vanish`.
struct ObstacleSpec {
  Obstacle shape = DiscObstacle{};
  double appear = 0.0;
  std::optional<double> vanish;
  Vec2 velocity;
  double jitter = 0.0;  // std of a per-seed position perturbation, m
};

struct EventConfig {
  double misalignment_offset = 0.25;  // theta_mis, m
  double misalignment_dwell = 0.5;    // t_mis, s
  double safety_distance = 0.1;       // d_safe, m
  double rearm_margin = 0.05;         // m beyond d_safe before another collision counts
  double intervention_hold = 1.0;     // s of brake after an intervention
  double backup_distance = 0.5;       // m the experimenter pulls the device back
  double stuck_time = 3.0;            // s of avoidance braking before a recovery
};

struct SimConfig {
  std::string map;  // path relative to the config file, or a bundled map name
  ModeKind mode = ModeKind::GlideDirected;
  std::uint64_t seed = 1;
  double dt = 0.02;
  double controller_period = 0.1;
  double timeout = 300.0;

  std::string start_node;
  double start_heading = 0.0;  // rad
  std::string goal;            // destination name

  UserModelConfig user;
  VehicleParams vehicle;
  OdomNoiseParams odometry{0.02, 0.01, 0.02};
  DepthSensorParams sensor;
  CostmapConfig costmap;
  bool truth_localization = false;  // bypass MCL and use the true pose
  LocalizerConfig localization;
  PlannerConfig planner;
  ControllerConfig controller;
  GuidanceConfig guidance;
  TorqueConfig torque;
  BlockageConfig blockage;
  EventConfig events;
  std::vector<ObstacleSpec> obstacles;

  int period_ticks() const;
  void validate() const;
};

/// Reads a scenario document; unknown keys are errors. Throws ConfigError.
SimConfig parse_config(const nlohmann::json& doc);
SimConfig load_config(const std::filesystem::path& path);
/// Full canonical form including defaults.
ojson config_to_json(const SimConfig& cfg);
std::string config_hash(const SimConfig& cfg);

/// Resolves `cfg.map` against `base_dir`, then the bundled map directory.
std::filesystem::path resolve_map_path(const std::string& map, const std::filesystem::path& base_dir);
std::filesystem::path asset_dir();

// ---------------------------------------------------------------------------
// Events and metrics

struct DetectedEvent {
  enum class Kind : std::uint8_t { Misalignment, PotentialCollision };
  Kind kind;
  double value = 0.0;  // offset or gap that triggered the event
};

/// Edge-triggered misalignment and near-collision detection on the truth.
class EventDetector {
 public:
  explicit EventDetector(EventConfig cfg = {}) : cfg_(cfg) {}
  /// `gap` is the distance from the device footprint to the nearest obstacle.
  std::vector<DetectedEvent> step(double now, double lateral_offset, double gap);

 private:
  EventConfig cfg_;
  std::optional<double> mis_since_;
  bool mis_latched_ = false;
  bool collision_armed_ = true;
};

struct TrialMetrics {
  bool completed = false;
  double time = 0.0;
  int misalignment_events = 0;
  int potential_collisions = 0;

  int errors() const { return misalignment_events + potential_collisions; }
  ojson to_json() const;
  bool operator==(const TrialMetrics&) const = default;
};

enum class TrialStatus : std::uint8_t { Running, Arrived, Timeout, Fault, Aborted };

std::string_view to_string(TrialStatus s);

// ---------------------------------------------------------------------------
// Simulation

/// Replays a fixed sequence of handle states, one per tick; zero push after
/// the end.
class RecordedUserSource : public UserSource {
 public:
  explicit RecordedUserSource(std::vector<HandleState> stream) : stream_(std::move(stream)) {}
  HandleState tick(const UserPerception&) override;

 private:
  std::vector<HandleState> stream_;
  std::size_t next_ = 0;
};

struct PoseHistoryEntry {
  Pose2 pose;
  double travelled;
};

class Simulation {
 public:
  /// Uses a SimUser built from the config when `user` is null.
  Simulation(SimConfig cfg, std::shared_ptr<const ScenarioMap> map,
             std::unique_ptr<UserSource> user = nullptr);

  const std::string& header_line() const { return header_; }
  /// Advances one tick and returns its log record.
  const ojson& step();
  bool finished() const { return status_ != TrialStatus::Running; }
  TrialStatus status() const { return status_; }
  const std::string& message() const { return message_; }
  std::string end_line() const;
  /// Ends a running trial early (session closed, input stream exhausted).
  void abort(std::string message);
  /// Online counters.
  TrialMetrics metrics() const;

  const SimConfig& config() const { return cfg_; }
  const ScenarioMap& map() const { return *map_; }
  std::uint64_t tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * cfg_.dt; }
  const VehicleState& truth() const { return vstate_; }
  const PoseEstimate& estimate() const { return est_; }
  const GlobalPlan& plan() const;
  const LocalCostmap& costmap() const { return costmap_.costmap(); }
  std::vector<Obstacle> obstacles_at(double t) const;
  std::string guidance_state() const;

 private:
  void controller_tick(double t, ojson& events);
  void intervene(double t, ojson& events, const char* reason);
  void replan(double t, ojson& events, const char* reason);
  double truth_gap(double t) const;

  SimConfig cfg_;
  std::shared_ptr<const ScenarioMap> map_;
  std::unique_ptr<UserSource> user_;
  Rng sensor_rng_;
  Rng obstacle_rng_;
  std::vector<ObstacleSpec> obstacles_;  // after per-seed jitter

  VehicleState vstate_;
  PoseEstimate est_;
  std::unique_ptr<Localizer> localizer_;
  CostmapBuilder costmap_;
  TorqueInterpreter torque_;
  EventDetector detector_;
  BlockageMonitor blockage_;
  std::optional<GlideDirectedGuidance> glide_;
  std::optional<UserDirectedGuidance> ud_;
  GlobalPlan glide_plan_;
  Pose2 goal_pose_;

  std::uint64_t tick_ = 0;
  TrialStatus status_ = TrialStatus::Running;
  std::string message_;
  std::string header_;
  ojson record_;

  // outputs of the latest controller tick, applied from the next tick on
  double steer_cmd_ = 0.0;
  bool brake_cmd_ = false;
  Advisory advisory_ = Advisory::None;
  double steer_applied_ = 0.0;
  bool brake_applied_ = false;
  double hold_until_ = -1.0;
  bool force_replan_ = false;
  std::optional<double> avoid_brake_since_;

  std::vector<HapticPattern> pending_haptics_;
  std::optional<JunctionAnnouncement> pending_announcement_;
  std::deque<TwistCommand> twists_;
  std::optional<double> nearest_range_;
  std::deque<PoseHistoryEntry> history_;
  double travelled_ = 0.0;

  int misalignments_ = 0;
  int collisions_ = 0;
};

struct ParsedLog;

struct RunResult {
  std::vector<std::string> log;  // header, tick records, end record
  TrialMetrics metrics;
  TrialStatus status = TrialStatus::Running;
  std::string message;
};

RunResult run(const SimConfig& cfg, std::shared_ptr<const ScenarioMap> map,
              std::unique_ptr<UserSource> user = nullptr);

/// Re-feeds the handle stream of a recorded log with the recorded config and
/// seed. A recording that was aborted is aborted at the same tick.
RunResult rerun(const ParsedLog& recorded, std::shared_ptr<const ScenarioMap> map);

/// Loads the config and its map and runs it.
RunResult run_file(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed = {});

std::string join_log(const std::vector<std::string>& lines);
std::vector<std::string> split_log(std::string_view text);
void write_log(const std::vector<std::string>& lines, const std::filesystem::path& path);
std::vector<std::string> read_log(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Log analysis

struct ParsedLog {
  nlohmann::json header;
  std::vector<nlohmann::json> ticks;
  nlohmann::json end;
};

/// Checks framing (header first, strictly increasing ticks, end record last).
/// Throws CorruptLog naming the last valid tick.
ParsedLog parse_log(const std::vector<std::string>& lines);

/// Aggregates completion and event counts from the records alone.
TrialMetrics metrics(const std::vector<std::string>& lines);
TrialMetrics metrics(const ParsedLog& log);

/// Handle states as recorded tick by tick.
std::vector<HandleState> handle_stream(const ParsedLog& log);

/// Emits tick records at `rate` times wall-clock speed (0 = as fast as
/// possible). `sleep` receives the delay in seconds before each record after
/// the first.
void replay(const std::vector<std::string>& lines, double rate,
            const std::function<void(const nlohmann::json&)>& sink,
            const std::function<void(double)>& sleep = {});

}  // namespace glide
