// glide: headless runner, batch reporter, map validator, log replayer and
// live session server. Exit codes: 0 success, 1 fault or failed run, 2 usage
// or input error.
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "glide/bridge.hpp"
#include "glide/engine.hpp"
#include "glide/report.hpp"

using namespace glide;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run.jsonl";
  std::string mode;
  std::string inputs;
};

std::shared_ptr<const ScenarioMap> map_for(const SimConfig& cfg, const std::filesystem::path& config_path) {
  return std::make_shared<const ScenarioMap>(load_map(resolve_map_path(cfg.map, config_path.parent_path())));
}

SimConfig config_for(const std::string& path, std::optional<std::uint64_t> seed, const std::string& mode) {
  SimConfig cfg = load_config(path);
  if (seed) cfg.seed = *seed;
  if (!mode.empty()) {
    auto m = parse_mode(mode);
    if (!m) throw ConfigError("unknown mode '" + mode + "'");
    cfg.mode = *m;
  }
  return cfg;
}

int cmd_run(const RunArgs& a) {
  RunResult r;
  if (!a.inputs.empty()) {
    const ParsedLog recorded = parse_log(read_log(a.inputs));
    SimConfig cfg = parse_config(recorded.header.at("config"));
    const std::filesystem::path base = a.config.empty() ? std::filesystem::path(a.inputs).parent_path()
                                                        : std::filesystem::path(a.config).parent_path();
    auto map = std::make_shared<const ScenarioMap>(load_map(resolve_map_path(cfg.map, base)));
    r = rerun(recorded, std::move(map));
  } else {
    if (a.config.empty()) throw ConfigError("run needs --config or --inputs");
    SimConfig cfg = config_for(a.config, a.seed, a.mode);
    r = run(cfg, map_for(cfg, a.config));
  }
  write_log(r.log, a.out);
  ojson summary{{"status", std::string(to_string(r.status))},
                {"message", r.message},
                {"metrics", r.metrics.to_json()},
                {"log", a.out}};
  std::filesystem::path metrics_path(a.out);
  metrics_path.replace_extension(".metrics.json");
  std::ofstream(metrics_path) << summary.dump(2) << '\n';
  std::cout << summary.dump() << '\n';
  return r.status == TrialStatus::Arrived ? kOk : kFailed;
}

int cmd_batch(const std::string& spec_path, const std::string& out, int workers) {
  BatchSpec spec = load_batch(spec_path);
  if (!out.empty()) spec.out_dir = out;
  if (workers > 0) spec.workers = workers;
  const BatchReport rep = run_batch(spec);
  std::cout << rep.to_csv();
  for (const auto& f : rep.failures)
    std::cerr << "failed: " << to_string(f.cell.mode) << " trial " << f.cell.trial << " seed " << f.cell.seed
              << " (" << f.cell.config.string() << "): " << to_string(f.status) << " " << f.message << '\n';
  std::cerr << "wrote " << (spec.out_dir / "summary.csv").string() << '\n';
  return rep.complete() ? kOk : kFailed;
}

int cmd_validate_map(const std::vector<std::string>& paths) {
  int errors = 0;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      std::cout << path << ": error: cannot open file\n";
      ++errors;
      continue;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ScenarioMap map;
    try {
      map = parse_map(text);
    } catch (const Error& e) {
      std::cout << path << ": error: " << e.what() << '\n';
      ++errors;
      continue;
    }
    const auto issues = check_map(map);
    for (const auto& i : issues) {
      const bool err = i.severity == MapIssue::Severity::Error;
      errors += err;
      std::cout << path << ": " << (err ? "error" : "warning") << ": " << i.message << '\n';
    }
    if (issues.empty()) std::cout << path << ": ok\n";
  }
  return errors ? kFailed : kOk;
}

int cmd_replay(const std::string& path, double rate, bool emit) {
  const auto lines = read_log(path);
  replay(lines, rate, [&](const nlohmann::json& rec) {
    if (emit) std::cout << rec.dump() << '\n';
  });
  const ParsedLog log = parse_log(lines);
  const TrialMetrics m = metrics(log);
  ojson out{{"status", log.end.value("status", "")}, {"ticks", log.ticks.size()}, {"metrics", m.to_json()}};
  std::cout << out.dump() << '\n';
  return kOk;
}

int cmd_serve(const std::string& config, const std::string& mode, unsigned short port, double speed,
              const std::string& log_dir) {
  SimConfig cfg = config_for(config, std::nullopt, mode);
  BridgeConfig bc;
  bc.map = map_for(cfg, config);
  bc.sim = std::move(cfg);
  bc.port = port;
  bc.speed = speed;
  bc.log_dir = log_dir;

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);  // worker threads inherit the mask

  BridgeServer server(bc);
  server.start();
  std::cerr << "listening on ws://" << bc.address << ":" << server.port() << '\n';
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  for (const auto& l : server.logs()) std::cerr << "wrote " << l.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated passive guidance device: run, batch, validate-map, replay, serve"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  RunArgs ra;
  bool run_serve = false;
  unsigned short port = 8765;
  double speed = 1.0;
  std::string log_dir = ".";
  auto* run_cmd = app.add_subcommand("run", "Run one trial headless and write its event log");
  run_cmd->add_option("--config", ra.config, "Scenario config (JSON)");
  run_cmd->add_option("--seed", ra.seed, "Seed override");
  run_cmd->add_option("--out", ra.out, "Event log output path")->capture_default_str();
  run_cmd->add_option("--mode", ra.mode, "Mode override: glide-directed or user-directed");
  run_cmd->add_option("--inputs", ra.inputs, "Re-feed the handle stream of a recorded log");
  run_cmd->add_flag("--serve", run_serve, "Serve the scenario to a live client instead");
  run_cmd->add_option("--port", port, "Port for --serve (0 picks a free port)")->capture_default_str();

  std::string batch_spec, batch_out;
  int workers = 0;
  auto* batch_cmd = app.add_subcommand("batch", "Run a batch and write Avg/SD/Min/Max tables");
  batch_cmd->add_option("spec", batch_spec, "Batch spec (JSON)")->required();
  batch_cmd->add_option("--out", batch_out, "Output directory (overrides the spec)");
  batch_cmd->add_option("--workers", workers, "Parallel workers (overrides the spec)");

  std::vector<std::string> map_paths;
  auto* val_cmd = app.add_subcommand("validate-map", "Check scenario maps and list violations");
  val_cmd->add_option("maps", map_paths, "Map files")->required();

  std::string log_path;
  double rate = 0.0;
  bool emit = false;
  auto* replay_cmd = app.add_subcommand("replay", "Validate and play back an event log");
  replay_cmd->add_option("log", log_path, "Event log")->required();
  replay_cmd->add_option("--rate", rate, "Playback speed multiple; 0 is immediate")->capture_default_str();
  replay_cmd->add_flag("--emit", emit, "Print tick records to stdout");

  std::string serve_config, serve_mode;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a scenario to a live WebSocket client");
  serve_cmd->add_option("--config", serve_config, "Scenario config (JSON)")->required();
  serve_cmd->add_option("--mode", serve_mode, "Mode override");
  serve_cmd->add_option("--port", port, "Port (0 picks a free port)")->capture_default_str();
  serve_cmd->add_option("--speed", speed, "Wall-clock pacing factor; 0 is unpaced")->capture_default_str();
  serve_cmd->add_option("--log-dir", log_dir, "Directory for session logs")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) {
      if (run_serve) return cmd_serve(ra.config, ra.mode, port, speed, log_dir);
      return cmd_run(ra);
    }
    if (*batch_cmd) return cmd_batch(batch_spec, batch_out, workers);
    if (*val_cmd) return cmd_validate_map(map_paths);
    if (*replay_cmd) return cmd_replay(log_path, rate, emit);
    if (*serve_cmd) return cmd_serve(serve_config, serve_mode, port, speed, log_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const MalformedMap& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvariantViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const CorruptLog& e) {
    std::cerr << "error: corrupt log: " << e.what() << '\n';
    return kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
