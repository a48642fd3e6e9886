#include "glide/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace glide {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw ConfigError("batch: " + what); }

template <class T>
T field(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(std::string("'") + key + "' has the wrong type");
  }
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

BatchSpec parse_batch(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) fail("document must be an object");
  static const std::vector<std::string> top{"format", "runs", "out_dir", "workers", "write_logs"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (std::find(top.begin(), top.end(), it.key()) == top.end()) fail("'" + it.key() + "' is not a recognised key");
  if (field<std::string>(doc, "format", "") != kBatchFormat) fail(std::string("format must be ") + kBatchFormat);
  BatchSpec spec;
  spec.out_dir = field<std::string>(doc, "out_dir", "batch_out");
  spec.workers = field<int>(doc, "workers", 1);
  spec.write_logs = field<bool>(doc, "write_logs", true);
  if (spec.workers < 1) fail("'workers' must be at least 1");
  if (!doc.contains("runs") || !doc["runs"].is_array() || doc["runs"].empty()) fail("'runs' must be a non-empty array");
  static const std::vector<std::string> keys{"config", "mode", "trial", "seeds", "repetitions"};
  for (const auto& r : doc["runs"]) {
    if (!r.is_object()) fail("each run must be an object");
    for (auto it = r.begin(); it != r.end(); ++it)
      if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
        fail("run key '" + it.key() + "' is not recognised");
    BatchEntry e;
    const std::string cfg = field<std::string>(r, "config", "");
    if (cfg.empty()) fail("each run needs a 'config'");
    e.config = std::filesystem::path(cfg).is_absolute() ? std::filesystem::path(cfg) : base_dir / cfg;
    if (r.contains("mode")) {
      auto m = parse_mode(field<std::string>(r, "mode", ""));
      if (!m) fail("unknown mode '" + r["mode"].dump() + "'");
      e.mode = *m;
    }
    e.trial = field<int>(r, "trial", 1);
    e.repetitions = field<int>(r, "repetitions", 1);
    if (r.contains("seeds")) {
      const auto& s = r["seeds"];
      if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() || !s[1].is_number_unsigned())
        fail("'seeds' must be [first, count]");
      e.first_seed = s[0].get<std::uint64_t>();
      e.count = s[1].get<int>();
    }
    if (e.count < 1 || e.repetitions < 1) fail("seed count and repetitions must be at least 1");
    spec.entries.push_back(std::move(e));
  }
  return spec;
}

BatchSpec load_batch(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open batch spec '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("batch spec '" + path.string() + "' is not valid JSON: " + e.what());
  }
  BatchSpec spec = parse_batch(doc, path.parent_path());
  if (spec.out_dir.is_relative()) spec.out_dir = path.parent_path() / spec.out_dir;
  return spec;
}

std::vector<BatchCell> expand(const BatchSpec& spec) {
  std::vector<BatchCell> cells;
  for (const auto& e : spec.entries) {
    const ModeKind mode = e.mode ? *e.mode : load_config(e.config).mode;
    const auto n = static_cast<std::uint64_t>(e.count) * static_cast<std::uint64_t>(e.repetitions);
    for (std::uint64_t i = 0; i < n; ++i)
      cells.push_back({cells.size(), mode, e.trial, e.first_seed + i, e.config});
  }
  return cells;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.avg = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : values) ss += (v - s.avg) * (v - s.avg);
  s.sd = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

BatchReport aggregate(const std::vector<CellResult>& results) {
  struct Acc {
    std::vector<double> time, errors;
    std::size_t runs = 0, failed = 0;
  };
  std::map<std::pair<int, int>, Acc> groups;  // (mode, trial)
  BatchReport rep;
  for (const auto& r : results) {
    Acc& a = groups[{static_cast<int>(r.cell.mode), r.cell.trial}];
    ++a.runs;
    if (r.status != TrialStatus::Arrived) {
      ++a.failed;
      rep.failures.push_back({r.cell, r.status, r.message, r.metrics, {}});
      continue;
    }
    a.time.push_back(r.metrics.time / 60.0);
    a.errors.push_back(static_cast<double>(r.metrics.errors()));
  }
  for (const auto& [key, a] : groups) {
    const auto mode = static_cast<ModeKind>(key.first);
    rep.time.push_back({mode, key.second, summarize(a.time), a.runs, a.failed});
    rep.errors.push_back({mode, key.second, summarize(a.errors), a.runs, a.failed});
  }
  return rep;
}

ojson BatchReport::to_json() const {
  const auto rows = [](const std::vector<TableRow>& t) {
    ojson out = ojson::array();
    for (const auto& r : t)
      out.push_back({{"mode", std::string(to_string(r.mode))},
                     {"trial", r.trial},
                     {"avg", r.stats.avg},
                     {"sd", r.stats.sd},
                     {"min", r.stats.min},
                     {"max", r.stats.max},
                     {"n", r.stats.n},
                     {"runs", r.runs},
                     {"complete", r.complete()}});
    return out;
  };
  ojson fails = ojson::array();
  for (const auto& f : failures)
    fails.push_back({{"mode", std::string(to_string(f.cell.mode))},
                     {"trial", f.cell.trial},
                     {"seed", f.cell.seed},
                     {"config", f.cell.config.string()},
                     {"status", std::string(to_string(f.status))},
                     {"message", f.message}});
  return {{"format", "glide-summary/1"},
          {"tables", {{"time_min", rows(time)}, {"errors", rows(errors)}}},
          {"failures", fails}};
}

std::string BatchReport::to_csv() const {
  std::ostringstream os;
  os << "table,mode,trial,avg,sd,min,max,n,runs,complete\n";
  const auto rows = [&](const char* name, const std::vector<TableRow>& t) {
    for (const auto& r : t)
      os << name << ',' << to_string(r.mode) << ',' << r.trial << ',' << fmt(r.stats.avg) << ','
         << fmt(r.stats.sd) << ',' << fmt(r.stats.min) << ',' << fmt(r.stats.max) << ',' << r.stats.n << ','
         << r.runs << ',' << (r.complete() ? "yes" : "no") << '\n';
  };
  rows("time_min", time);
  rows("errors", errors);
  return os.str();
}

std::vector<CellResult> run_cells(const BatchSpec& spec) {
  const std::vector<BatchCell> cells = expand(spec);
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      CellResult& r = results[i];
      r.cell = cells[i];
      try {
        SimConfig cfg = load_config(cells[i].config);
        cfg.seed = cells[i].seed;
        cfg.mode = cells[i].mode;
        auto map = std::make_shared<const ScenarioMap>(
            load_map(resolve_map_path(cfg.map, cells[i].config.parent_path())));
        RunResult run_result = run(cfg, std::move(map));
        r.status = run_result.status;
        r.message = run_result.message;
        r.metrics = run_result.metrics;
        r.log = std::move(run_result.log);
      } catch (const std::exception& e) {
        r.status = TrialStatus::Fault;
        r.message = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(spec.workers, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

BatchReport run_batch(const BatchSpec& spec) {
  const std::vector<CellResult> results = run_cells(spec);
  BatchReport rep = aggregate(results);
  std::filesystem::create_directories(spec.out_dir);
  {
    std::ofstream(spec.out_dir / "summary.json") << rep.to_json().dump(2) << '\n';
    std::ofstream(spec.out_dir / "summary.csv") << rep.to_csv();
    std::ofstream runs(spec.out_dir / "runs.csv");
    runs << "index,mode,trial,seed,status,time_s,misalignment_events,potential_collisions,log\n";
    for (const auto& r : results) {
      std::string log_name;
      if (spec.write_logs && !r.log.empty()) {
        std::filesystem::create_directories(spec.out_dir / "logs");
        log_name = "logs/cell" + std::to_string(r.cell.index) + ".jsonl";
        write_log(r.log, spec.out_dir / log_name);
      }
      runs << r.cell.index << ',' << to_string(r.cell.mode) << ',' << r.cell.trial << ',' << r.cell.seed << ','
           << to_string(r.status) << ',' << fmt(r.metrics.time) << ',' << r.metrics.misalignment_events << ','
           << r.metrics.potential_collisions << ',' << log_name << '\n';
    }
  }
  return rep;
}

}  // namespace glide
