#include <gtest/gtest.h>

#include <json.hpp>

#include "glide/report.hpp"
#include "support.hpp"

using namespace glide;
using nlohmann::json;

namespace {

CellResult cell(ModeKind mode, int trial, TrialStatus status, double time_s, int misalign, int collisions) {
  CellResult r;
  r.cell.mode = mode;
  r.cell.trial = trial;
  r.status = status;
  r.metrics.time = time_s;
  r.metrics.misalignment_events = misalign;
  r.metrics.potential_collisions = collisions;
  r.metrics.completed = status == TrialStatus::Arrived;
  return r;
}

}  // namespace

TEST(Report, SummaryUsesSampleDeviation) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  // shifted sum-of-squares form as the oracle
  double s1 = 0.0, s2 = 0.0;
  for (double x : v) s1 += x - 5.0, s2 += (x - 5.0) * (x - 5.0);
  const double n = static_cast<double>(v.size());
  const double sd = std::sqrt((s2 - s1 * s1 / n) / (n - 1.0));
  const Summary s = summarize(v);
  EXPECT_DOUBLE_EQ(s.avg, 5.0);
  EXPECT_NEAR(s.sd, sd, 1e-12);
  EXPECT_NEAR(s.sd, 2.1380899352993950, 1e-12);
  EXPECT_EQ(s.min, 2.0);
  EXPECT_EQ(s.max, 9.0);
  EXPECT_EQ(s.n, 8u);
  EXPECT_EQ(summarize({3.5}).sd, 0.0);
  EXPECT_EQ(summarize({}).n, 0u);
}

TEST(Report, AggregateGroupsByModeAndTrial) {
  std::vector<CellResult> rs{
      cell(ModeKind::UserDirected, 1, TrialStatus::Arrived, 120.0, 1, 0),
      cell(ModeKind::GlideDirected, 2, TrialStatus::Arrived, 60.0, 0, 1),
      cell(ModeKind::GlideDirected, 1, TrialStatus::Arrived, 90.0, 2, 1),
      cell(ModeKind::GlideDirected, 1, TrialStatus::Arrived, 30.0, 0, 0),
      cell(ModeKind::UserDirected, 1, TrialStatus::Timeout, 600.0, 9, 9),
  };
  const BatchReport rep = aggregate(rs);
  ASSERT_EQ(rep.time.size(), 3u);
  EXPECT_EQ(rep.time[0].mode, ModeKind::GlideDirected);
  EXPECT_EQ(rep.time[0].trial, 1);
  EXPECT_DOUBLE_EQ(rep.time[0].stats.avg, 1.0);  // minutes
  EXPECT_DOUBLE_EQ(rep.errors[0].stats.avg, 1.5);
  EXPECT_EQ(rep.time[1].trial, 2);
  EXPECT_EQ(rep.time[2].mode, ModeKind::UserDirected);
  // the timed-out run is left out of the statistics and flagged
  EXPECT_EQ(rep.time[2].stats.n, 1u);
  EXPECT_EQ(rep.time[2].runs, 2u);
  EXPECT_FALSE(rep.time[2].complete());
  EXPECT_DOUBLE_EQ(rep.errors[2].stats.max, 1.0);
  ASSERT_EQ(rep.failures.size(), 1u);
  EXPECT_EQ(rep.failures[0].status, TrialStatus::Timeout);
  EXPECT_FALSE(rep.complete());

  const std::string csv = rep.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "table,mode,trial,avg,sd,min,max,n,runs,complete");
  EXPECT_NE(csv.find("time_min,user-directed,1,2,0,2,2,1,2,no"), std::string::npos) << csv;
  const ojson j = rep.to_json();
  EXPECT_EQ(j["format"], "glide-summary/1");
  EXPECT_EQ(j["tables"]["errors"].size(), 3u);
  EXPECT_EQ(j["failures"][0]["status"], "timeout");
}

TEST(Report, BatchSpecParsing) {
  const auto base = test::assets() / "batch";
  const BatchSpec spec = load_batch(base / "study.json");
  EXPECT_EQ(spec.entries.size(), 6u);
  const auto cells = expand(spec);
  ASSERT_EQ(cells.size(), 54u);
  EXPECT_EQ(cells[0].seed, 101u);
  EXPECT_EQ(cells[8].seed, 109u);
  EXPECT_EQ(cells[27].mode, ModeKind::UserDirected);
  for (std::size_t i = 0; i < cells.size(); ++i) EXPECT_EQ(cells[i].index, i);

  json doc = json::parse(test::slurp(base / "study.json"));
  doc["runs"][0]["repetitions"] = 2;
  doc["runs"][0]["mode"] = "user-directed";
  const auto twice = expand(parse_batch(doc, base));
  EXPECT_EQ(twice.size(), 63u);
  EXPECT_EQ(twice[17].seed, 118u);
  EXPECT_EQ(twice[0].mode, ModeKind::UserDirected);

  doc["runs"][0]["seed"] = 5;
  EXPECT_THROW(parse_batch(doc, base), ConfigError);
  doc = json::parse(test::slurp(base / "study.json"));
  doc["parallel"] = true;
  EXPECT_THROW(parse_batch(doc, base), ConfigError);
  doc = json::parse(test::slurp(base / "study.json"));
  doc["runs"][0]["seeds"] = {1};
  EXPECT_THROW(parse_batch(doc, base), ConfigError);
  EXPECT_THROW(load_batch(base / "absent.json"), ConfigError);
}

TEST(Report, RunBatchWritesTablesAndLogs) {
  const auto out = test::temp_dir("batch");
  BatchSpec spec;
  spec.out_dir = out;
  spec.workers = 2;
  BatchEntry e;
  e.config = test::scenario_path("straight_glide");
  e.first_seed = 5;
  e.count = 2;
  spec.entries.push_back(e);
  const BatchReport rep = run_batch(spec);
  EXPECT_TRUE(rep.complete());
  ASSERT_EQ(rep.time.size(), 1u);
  EXPECT_EQ(rep.time[0].stats.n, 2u);
  EXPECT_TRUE(std::filesystem::exists(out / "summary.json"));
  EXPECT_EQ(test::slurp(out / "summary.csv"), rep.to_csv());
  const std::string runs = test::slurp(out / "runs.csv");
  EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 3);
  // each stored log reproduces its cell
  SimConfig c = test::scenario("straight_glide");
  c.seed = 6;
  const RunResult r = run(c, test::shared_map("straight_corridor"));
  EXPECT_EQ(test::slurp(out / "logs" / "cell1.jsonl"), join_log(r.log));
}
