#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "openlock/harness.hpp"

using namespace openlock;
namespace fs = std::filesystem;

namespace {

RunRecord rec(std::string cond, std::uint64_t seed, int idx, int attempts, bool done = true) {
  return {std::move(cond), seed, idx, "t" + std::to_string(idx), attempts, done ? 2 : 1, done};
}

std::vector<RunRecord> fixture() {
  return {rec("ce4", 1, 0, 10), rec("ce4", 1, 1, 8), rec("ce4", 2, 0, 12),
          rec("ce4", 2, 1, 6),  rec("cc4", 1, 0, 5), rec("cc4", 2, 0, 7, false)};
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("openlock_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Comparison comparison(std::string name, double ma, double mb, double t, double p) {
  Comparison c;
  c.name = std::move(name);
  c.a = "a";
  c.b = "b";
  c.mean_a = ma;
  c.mean_b = mb;
  stats::TTestResult r;
  r.t = t;
  r.df = 30;
  r.p_two_sided = p;
  c.test = r;
  return c;
}

Summary passing_summary() {
  Summary s;
  s.records = 100;
  s.completion_rate = 1.0;
  s.comparisons.push_back(comparison("baseline", 12.0, 6.0, 5.0, 0.0001));
  s.comparisons.push_back(comparison("ce4-transfer", 8.0, 10.0, -3.0, 0.004));
  s.comparisons.push_back(comparison("cc4-transfer", 5.0, 5.2, -0.5, 0.6));
  for (const char* name : {"cc3-cc4", "cc3-ce4", "ce3-cc4", "ce3-ce4"}) {
    s.trials.push_back({name, 0, 40, 9.0});
    s.trials.push_back({name, 5, 40, 4.0});
  }
  return s;
}

bool passed(const std::vector<TrendCheck>& checks, std::string_view name) {
  for (const auto& c : checks) {
    if (c.name == name) return c.passed;
  }
  ADD_FAILURE() << "missing check " << name;
  return false;
}

}  // namespace

TEST(Condition, ParseAndNames) {
  for (auto name : kConditionNames) EXPECT_EQ(Condition::parse(name).name(), name);
  const auto c = Condition::parse("ce3-cc4");
  EXPECT_TRUE(c.is_transfer());
  EXPECT_EQ(c.trial_count(), 7);
  EXPECT_EQ(c.transfer_trial_index(), 6);
  EXPECT_EQ(Condition::parse("CE4").trial_count(), 5);
  EXPECT_THROW(Condition::parse("cc3"), ConfigError);
  EXPECT_THROW(Condition::parse("cc4-ce3"), ConfigError);
  EXPECT_THROW(Condition::parse("xx"), ConfigError);
}

TEST(Condition, TrialLayouts) {
  const auto t = Condition::parse("cc3-ce4").trials(7);
  ASSERT_EQ(t.size(), 7u);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(t[i].schema, SchemaKind::CC3);
  EXPECT_EQ(t[6].schema, SchemaKind::CE4);
  EXPECT_EQ(Condition::parse("cc4").trials(7).size(), 5u);
}

TEST(AgentSeed, DistinctAndStable) {
  std::set<std::uint64_t> seeds;
  for (int i = 0; i < 1000; ++i) seeds.insert(agent_seed(7, i));
  EXPECT_EQ(seeds.size(), 1000u);
  EXPECT_EQ(agent_seed(7, 3), agent_seed(7, 3));
  EXPECT_NE(agent_seed(7, 3), agent_seed(8, 3));
  // splitmix64 reference output for input 0.
  EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
}

TEST(RunCondition, RecordCountsAndShape) {
  auto transfer = Condition::parse("cc3-ce4");
  auto baseline = Condition::parse("cc4");
  RunOptions options;
  options.agent.mode = LikelihoodMode::Mean;
  const auto t = run_condition(transfer, 7, options);
  const auto b = run_condition(baseline, 7, options);
  EXPECT_EQ(t.size(), 280u);
  EXPECT_EQ(b.size(), 200u);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(t[i].condition, "cc3-ce4");
    EXPECT_EQ(t[i].trial_index, static_cast<int>(i % 7));
    EXPECT_EQ(t[i].agent_seed, agent_seed(7, static_cast<int>(i / 7)));
    EXPECT_GE(t[i].attempts_used, 1);
    EXPECT_LE(t[i].attempts_used, 30);
  }
}

TEST(RunCondition, DeterministicAcrossThreadCounts) {
  auto c = Condition::parse("ce3-cc4");
  c.agents = 6;
  RunOptions one;
  one.threads = 1;
  RunOptions many;
  many.threads = 3;
  const auto a = run_condition(c, 11, one);
  EXPECT_EQ(a, run_condition(c, 11, many));
  EXPECT_EQ(to_csv(a), to_csv(run_condition(c, 11, one)));
  EXPECT_NE(a, run_condition(c, 12, one));
}

TEST(RunCondition, ObserverFactoryIsCalledPerAgent) {
  auto c = Condition::parse("cc4");
  c.agents = 3;
  c.attempt_budget = 5;
  struct Count : AgentObserver {
    int* trials;
    explicit Count(int* t) : trials(t) {}
    void on_trial(const TrialResult&) override { ++*trials; }
  };
  std::vector<int> counts(3, 0);
  RunOptions options;
  options.threads = 1;
  options.observers = [&](const Condition&, int i) { return std::make_unique<Count>(&counts[i]); };
  run_condition(c, 1, options);
  EXPECT_EQ(counts, (std::vector<int>{5, 5, 5}));
}

TEST(Summarize, Fixture) {
  const auto s = summarize(fixture());
  EXPECT_EQ(s.records, 6);
  EXPECT_NEAR(s.completion_rate, 5.0 / 6.0, 1e-12);
  const auto* ce0 = s.find("ce4", 0);
  ASSERT_NE(ce0, nullptr);
  EXPECT_DOUBLE_EQ(ce0->mean, 11.0);
  EXPECT_DOUBLE_EQ(ce0->median, 11.0);
  EXPECT_DOUBLE_EQ(ce0->stderr_mean, 1.0);
  EXPECT_EQ(ce0->n, 2);
  EXPECT_DOUBLE_EQ(s.find("ce4", 1)->mean, 7.0);
  EXPECT_DOUBLE_EQ(s.find("cc4", 0)->completion_rate, 0.5);
  EXPECT_EQ(s.find("cc4", 1), nullptr);
  // Per-agent means: ce4 (9, 9), cc4 (5, 7). se = 1, t = 3, df = 1.
  const auto* base = s.comparison("baseline");
  ASSERT_NE(base, nullptr);
  ASSERT_TRUE(base->test.has_value());
  EXPECT_DOUBLE_EQ(base->mean_a, 9.0);
  EXPECT_DOUBLE_EQ(base->mean_b, 6.0);
  EXPECT_NEAR(base->test->t, 3.0, 1e-12);
  EXPECT_NEAR(base->test->df, 1.0, 1e-12);
  EXPECT_EQ(s.comparison("ce4-transfer"), nullptr);
}

TEST(Summarize, DegenerateComparisonKeepsError) {
  const std::vector<RunRecord> r{rec("ce4", 1, 0, 5), rec("ce4", 2, 0, 5), rec("cc4", 1, 0, 5), rec("cc4", 2, 0, 5)};
  const auto s = summarize(r);
  const auto* base = s.comparison("baseline");
  ASSERT_NE(base, nullptr);
  EXPECT_FALSE(base->test.has_value());
  EXPECT_FALSE(base->error.empty());
  EXPECT_TRUE(to_json(s)["comparisons"][0].contains("error"));
  EXPECT_EQ(summarize({}).records, 0);
}

TEST(Median, EvenAndOdd) {
  EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
  EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
}

TEST(Csv, RoundTripAndHeader) {
  const auto records = fixture();
  const std::string csv = to_csv(records);
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "condition,agent_seed,trial_index,trial_id,attempts_used,solutions_found,completed");
  std::istringstream again(csv);
  EXPECT_EQ(parse_csv(again), records);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_NE(csv.find(",false\n"), std::string::npos);
}

TEST(Csv, RejectsMalformedInput) {
  std::istringstream bad_header("a,b,c\n");
  EXPECT_THROW(parse_csv(bad_header), std::runtime_error);
  std::istringstream short_row(std::string(kCsvHeader) + "\nce4,1,0\n");
  EXPECT_THROW(parse_csv(short_row), std::runtime_error);
  std::istringstream bad_flag(std::string(kCsvHeader) + "\nce4,1,0,t,3,2,yes\n");
  EXPECT_THROW(parse_csv(bad_flag), std::runtime_error);
}

TEST(WriteResults, WritesBothFiles) {
  const auto dir = temp_dir("write");
  const auto records = fixture();
  write_results(records, summarize(records), dir.string());
  EXPECT_EQ(read_results((dir / "results.csv").string()), records);
  std::ifstream f(dir / "summary.json");
  const auto j = nlohmann::json::parse(f);
  EXPECT_EQ(j["records"], 6);
  EXPECT_EQ(j["trials"].size(), 3u);
  EXPECT_EQ(j["comparisons"][0]["name"], "baseline");
  fs::remove_all(dir);
}

TEST(WriteResults, IoErrorNamesThePath) {
  const std::string missing = "/nonexistent_openlock_dir/sub";
  try {
    write_results(fixture(), summarize(fixture()), missing);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(missing), std::string::npos);
  }
  EXPECT_THROW(read_results("/nonexistent_openlock_dir/results.csv"), IoError);
}

TEST(CheckTrends, AllPassOnSyntheticSummary) {
  const auto checks = check_trends(passing_summary());
  ASSERT_EQ(checks.size(), 5u);
  for (const auto& c : checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
  EXPECT_FALSE(checks[2].blocking);
}

TEST(CheckTrends, EachCheckCanFail) {
  auto s = passing_summary();
  s.comparisons[0].mean_a = 5.0;  // CE4 no longer harder than CC4
  EXPECT_FALSE(passed(check_trends(s), "cc-ce asymmetry"));

  s = passing_summary();
  s.comparisons[1].test->p_two_sided = 0.2;
  EXPECT_FALSE(passed(check_trends(s), "transfer congruence ce4"));

  s = passing_summary();
  s.comparisons[2].test->p_two_sided = 0.01;
  EXPECT_FALSE(passed(check_trends(s), "transfer congruence cc4 (no difference)"));

  s = passing_summary();
  s.trials[3].mean = 12.0;  // cc3-ce4 trial 5 worse than trial 0
  EXPECT_FALSE(passed(check_trends(s), "learning within training"));

  s = passing_summary();
  s.completion_rate = 0.9;
  EXPECT_FALSE(passed(check_trends(s), "completion rate"));

  const auto empty = check_trends(Summary{});
  for (const auto& c : empty) EXPECT_FALSE(c.passed) << c.name;
}
