#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "glide/engine.hpp"

namespace glide {

inline constexpr const char* kBatchFormat = "glide-batch/1";

/// One line of a batch: a scenario run for `count` consecutive seeds,
/// `repetitions` times over (each repetition continues the seed range).
struct BatchEntry {
  std::filesystem::path config;
  std::optional<ModeKind> mode;  // overrides the scenario's mode
  int trial = 1;
  std::uint64_t first_seed = 1;
  int count = 1;
  int repetitions = 1;
};

struct BatchSpec {
  std::vector<BatchEntry> entries;
  std::filesystem::path out_dir;
  int workers = 1;
  bool write_logs = true;
};

/// Reads a glide-batch/1 document; relative config paths resolve against
/// `base_dir`. Throws ConfigError.
BatchSpec parse_batch(const nlohmann::json& doc, const std::filesystem::path& base_dir);
BatchSpec load_batch(const std::filesystem::path& path);

struct BatchCell {
  std::size_t index = 0;
  ModeKind mode = ModeKind::GlideDirected;
  int trial = 1;
  std::uint64_t seed = 1;
  std::filesystem::path config;
};

std::vector<BatchCell> expand(const BatchSpec& spec);

struct CellResult {
  BatchCell cell;
  TrialStatus status = TrialStatus::Running;
  std::string message;
  TrialMetrics metrics;
  std::vector<std::string> log;
};

struct Summary {
  double avg = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

Summary summarize(const std::vector<double>& values);

struct TableRow {
  ModeKind mode = ModeKind::GlideDirected;
  int trial = 1;
  Summary stats;
  std::size_t runs = 0;
  std::size_t failed = 0;
  bool complete() const { return failed == 0; }
};

/// Rows ordered by mode (Glide-directed first) then trial.
struct BatchReport {
  std::vector<TableRow> time;    // minutes
  std::vector<TableRow> errors;  // misalignment events + potential collisions
  std::vector<CellResult> failures;

  bool complete() const { return failures.empty(); }
  ojson to_json() const;
  std::string to_csv() const;
};

BatchReport aggregate(const std::vector<CellResult>& results);

/// Runs every cell on `spec.workers` threads; results come back in cell order.
std::vector<CellResult> run_cells(const BatchSpec& spec);

/// run_cells + aggregate, writing summary.json, summary.csv, runs.csv and
/// (optionally) one log per cell under `spec.out_dir`.
BatchReport run_batch(const BatchSpec& spec);

}  // namespace glide
