#pragma once

// Experiment harness: baseline and transfer conditions, per-trial records,
// aggregate statistics and CSV/JSON output.

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "openlock/env.hpp"
#include "openlock/planner.hpp"
#include "openlock/stats.hpp"

namespace openlock {

inline constexpr int kDefaultAgents = 40;
inline constexpr int kDefaultAttemptBudget = 30;
inline constexpr int kTrainingTrials = 6;
inline constexpr int kBaselineTrials = 5;

inline constexpr std::array<std::string_view, 6> kConditionNames = {"cc4",     "ce4",     "cc3-cc4",
                                                                    "cc3-ce4", "ce3-cc4", "ce3-ce4"};

// BASELINE(test): five 4-lever rooms. TRANSFER(train, test): six 3-lever
// rooms of the training schema, then one 4-lever room of the test schema.
struct Condition {
  std::optional<SchemaKind> train;
  SchemaKind test = SchemaKind::CC4;
  int agents = kDefaultAgents;
  int attempt_budget = kDefaultAttemptBudget;

  bool is_transfer() const { return train.has_value(); }

  std::string name() const {
    auto lower = [](std::string_view s) {
      std::string out(s);
      for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      return out;
    };
    return train ? lower(to_string(*train)) + "-" + lower(to_string(test)) : lower(to_string(test));
  }

  int trial_count() const { return is_transfer() ? kTrainingTrials + 1 : kBaselineTrials; }
  int transfer_trial_index() const { return is_transfer() ? kTrainingTrials : -1; }

  std::vector<TrialConfig> trials(std::uint64_t seed) const {
    if (!train) return standard_trial_sequence(SequenceKind::Transfer4, test, seed);
    auto out = standard_trial_sequence(SequenceKind::Training3, *train, seed);
    out.push_back(standard_trial_sequence(SequenceKind::Transfer4, test, seed).front());
    return out;
  }

  static Condition parse(std::string_view name) {
    Condition c;
    const auto dash = name.find('-');
    if (dash == std::string_view::npos) {
      auto test = parse_schema(name);
      if (!test || role_count(*test) != 4) throw ConfigError("unknown baseline condition '" + std::string(name) + "'");
      c.test = *test;
      return c;
    }
    auto train = parse_schema(name.substr(0, dash));
    auto test = parse_schema(name.substr(dash + 1));
    if (!train || !test || role_count(*train) != 3 || role_count(*test) != 4) {
      throw ConfigError("unknown transfer condition '" + std::string(name) + "'");
    }
    c.train = train;
    c.test = *test;
    return c;
  }
};

struct RunRecord {
  std::string condition;
  std::uint64_t agent_seed = 0;
  int trial_index = 0;
  std::string trial_id;
  int attempts_used = 0;
  int solutions_found = 0;
  bool completed = false;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Seed of agent i: splitmix64(master + (i + 1) * golden gamma). Independent
// of scheduling and of the condition, so conditions share agent seeds.
constexpr std::uint64_t agent_seed(std::uint64_t master, int index) {
  return splitmix64(master + static_cast<std::uint64_t>(index + 1) * 0x9E3779B97F4A7C15ull);
}

using ObserverFactory = std::function<std::unique_ptr<AgentObserver>(const Condition&, int agent_index)>;

struct RunOptions {
  AgentOptions agent;
  unsigned threads = 0;  // 0: hardware concurrency
  ObserverFactory observers;
};

inline std::vector<RunRecord> run_agent(const Condition& cond, std::uint64_t seed, const AgentOptions& options,
                                        AgentObserver* observer = nullptr) {
  std::vector<RunRecord> out;
  Agent agent(seed, options);
  const auto trials = cond.trials(seed);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto r = agent.run_trial(trials[i], cond.attempt_budget, observer);
    out.push_back({cond.name(), seed, static_cast<int>(i), r.trial_id, r.attempts_used, r.solutions_found, r.completed});
  }
  return out;
}

// Runs every agent of a condition. Agents are independent; results are merged
// in agent order so the output does not depend on scheduling.
inline std::vector<RunRecord> run_condition(const Condition& cond, std::uint64_t master_seed, const RunOptions& options = {}) {
  std::vector<std::vector<RunRecord>> per_agent(cond.agents);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int i = next++; i < cond.agents; i = next++) {
      try {
        std::unique_ptr<AgentObserver> observer = options.observers ? options.observers(cond, i) : nullptr;
        per_agent[i] = run_agent(cond, agent_seed(master_seed, i), options.agent, observer.get());
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(1, cond.agents)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<RunRecord> out;
  for (auto& rs : per_agent) out.insert(out.end(), rs.begin(), rs.end());
  return out;
}

// ---------------------------------------------------------------------------
// Summaries

struct TrialAggregate {
  std::string condition;
  int trial_index = 0;
  int n = 0;
  double mean = 0.0;
  double median = 0.0;
  double stderr_mean = 0.0;
  double completion_rate = 0.0;
};

struct Comparison {
  std::string name;
  std::string a;
  std::string b;
  int trial_index = -1;  // -1: per-agent mean over all trials
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::optional<stats::TTestResult> test;
  std::string error;
};

struct Summary {
  std::vector<TrialAggregate> trials;
  std::vector<Comparison> comparisons;
  int records = 0;
  double completion_rate = 0.0;

  const TrialAggregate* find(std::string_view condition, int trial_index) const {
    for (const auto& t : trials) {
      if (t.condition == condition && t.trial_index == trial_index) return &t;
    }
    return nullptr;
  }
  const Comparison* comparison(std::string_view name) const {
    for (const auto& c : comparisons) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

inline double median(std::vector<double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

// Attempts of one condition at one trial index, in record order.
inline std::vector<double> attempts_at(const std::vector<RunRecord>& records, std::string_view condition, int trial_index) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.condition == condition && r.trial_index == trial_index) out.push_back(r.attempts_used);
  }
  return out;
}

// Per-agent mean attempts over all trials of a condition, in first-seen agent order.
inline std::vector<double> agent_mean_attempts(const std::vector<RunRecord>& records, std::string_view condition) {
  std::vector<std::uint64_t> order;
  std::map<std::uint64_t, std::pair<double, int>> acc;
  for (const auto& r : records) {
    if (r.condition != condition) continue;
    auto [it, inserted] = acc.try_emplace(r.agent_seed, 0.0, 0);
    if (inserted) order.push_back(r.agent_seed);
    it->second.first += r.attempts_used;
    it->second.second += 1;
  }
  std::vector<double> out;
  for (auto s : order) out.push_back(acc[s].first / acc[s].second);
  return out;
}

inline Comparison compare(std::string name, std::string a, std::string b, std::vector<double> xa, std::vector<double> xb,
                          int trial_index) {
  Comparison c;
  c.name = std::move(name);
  c.a = std::move(a);
  c.b = std::move(b);
  c.trial_index = trial_index;
  c.mean_a = stats::mean(xa);
  c.mean_b = stats::mean(xb);
  try {
    c.test = stats::welch_t(xa, xb);
  } catch (const std::exception& e) {
    c.error = e.what();
  }
  return c;
}

inline Summary summarize(const std::vector<RunRecord>& records) {
  Summary s;
  if (records.empty()) return s;
  s.records = static_cast<int>(records.size());
  std::vector<std::pair<std::string, int>> keys;
  int completed = 0;
  for (const auto& r : records) {
    std::pair<std::string, int> k{r.condition, r.trial_index};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    completed += r.completed ? 1 : 0;
  }
  s.completion_rate = static_cast<double>(completed) / static_cast<double>(records.size());
  std::sort(keys.begin(), keys.end());
  for (const auto& [cond, idx] : keys) {
    TrialAggregate agg{cond, idx};
    const auto x = attempts_at(records, cond, idx);
    int done = 0;
    for (const auto& r : records) {
      if (r.condition == cond && r.trial_index == idx && r.completed) ++done;
    }
    agg.n = static_cast<int>(x.size());
    agg.mean = stats::mean(x);
    agg.median = median(x);
    agg.stderr_mean = x.size() > 1 ? std::sqrt(stats::variance(x) / static_cast<double>(x.size())) : 0.0;
    agg.completion_rate = static_cast<double>(done) / static_cast<double>(x.size());
    s.trials.push_back(agg);
  }
  auto has = [&](std::string_view c) {
    return std::any_of(records.begin(), records.end(), [&](const RunRecord& r) { return r.condition == c; });
  };
  const int transfer = kTrainingTrials;
  if (has("ce3-ce4") && has("cc3-ce4")) {
    s.comparisons.push_back(compare("ce4-transfer", "ce3-ce4", "cc3-ce4", attempts_at(records, "ce3-ce4", transfer),
                                    attempts_at(records, "cc3-ce4", transfer), transfer));
  }
  if (has("cc3-cc4") && has("ce3-cc4")) {
    s.comparisons.push_back(compare("cc4-transfer", "cc3-cc4", "ce3-cc4", attempts_at(records, "cc3-cc4", transfer),
                                    attempts_at(records, "ce3-cc4", transfer), transfer));
  }
  if (has("ce4") && has("cc4")) {
    s.comparisons.push_back(compare("baseline", "ce4", "cc4", agent_mean_attempts(records, "ce4"),
                                    agent_mean_attempts(records, "cc4"), -1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Trend checks over a full six-condition run

struct TrendCheck {
  explicit TrendCheck(std::string n, bool is_blocking = true) : name(std::move(n)), blocking(is_blocking) {}

  std::string name;
  bool passed = false;
  bool blocking = true;
  std::string detail;
};

inline std::vector<TrendCheck> check_trends(const Summary& s, double alpha = 0.05) {
  std::vector<TrendCheck> out;
  auto fmt = [](double v) {
    std::ostringstream o;
    o.precision(4);
    o << v;
    return o.str();
  };
  auto describe = [&](const Comparison& c, double p) {
    return c.a + " " + fmt(c.mean_a) + " vs " + c.b + " " + fmt(c.mean_b) + " t=" + fmt(c.test ? c.test->t : 0.0) +
           " df=" + fmt(c.test ? c.test->df : 0.0) + " p=" + fmt(p);
  };

  TrendCheck base{"cc-ce asymmetry"};
  if (const auto* c = s.comparison("baseline"); c && c->test) {
    const double p = c->test->p_greater();
    base.passed = c->mean_a > c->mean_b && p < alpha;
    base.detail = describe(*c, p) + " (one-sided)";
  } else {
    base.detail = "baseline conditions missing";
  }
  out.push_back(base);

  TrendCheck ce{"transfer congruence ce4"};
  if (const auto* c = s.comparison("ce4-transfer"); c && c->test) {
    ce.passed = c->mean_a < c->mean_b && c->test->p_two_sided < alpha;
    ce.detail = describe(*c, c->test->p_two_sided);
  } else {
    ce.detail = "transfer conditions missing";
  }
  out.push_back(ce);

  TrendCheck cc{"transfer congruence cc4 (no difference)", false};
  if (const auto* c = s.comparison("cc4-transfer"); c && c->test) {
    cc.passed = c->test->p_two_sided > alpha;
    cc.detail = describe(*c, c->test->p_two_sided);
  } else {
    cc.detail = "transfer conditions missing";
  }
  out.push_back(cc);

  TrendCheck learn{"learning within training"};
  learn.passed = true;
  int seen = 0;
  for (const char* name : {"cc3-cc4", "cc3-ce4", "ce3-cc4", "ce3-ce4"}) {
    const auto* first = s.find(name, 0);
    const auto* last = s.find(name, kTrainingTrials - 1);
    if (!first || !last) continue;
    ++seen;
    const bool ok = last->mean < first->mean;
    learn.passed = learn.passed && ok;
    if (!learn.detail.empty()) learn.detail += "; ";
    learn.detail += std::string(name) + " " + fmt(first->mean) + " -> " + fmt(last->mean);
  }
  if (seen < 4) {
    learn.passed = false;
    learn.detail += " (transfer conditions missing)";
  }
  out.push_back(learn);

  TrendCheck done{"completion rate"};
  done.passed = s.records > 0 && s.completion_rate >= 0.95;
  done.detail = fmt(100.0 * s.completion_rate) + "% of " + std::to_string(s.records) + " agent-trials";
  out.push_back(done);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr std::string_view kCsvHeader =
    "condition,agent_seed,trial_index,trial_id,attempts_used,solutions_found,completed";

inline std::string to_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.condition << ',' << r.agent_seed << ',' << r.trial_index << ',' << r.trial_id << ',' << r.attempts_used
        << ',' << r.solutions_found << ',' << (r.completed ? "true" : "false") << '\n';
  }
  return out.str();
}

inline std::vector<RunRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error("results CSV: unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw std::runtime_error("results CSV: bad row '" + line + "'");
    RunRecord r;
    r.condition = f[0];
    r.agent_seed = std::stoull(f[1]);
    r.trial_index = std::stoi(f[2]);
    r.trial_id = f[3];
    r.attempts_used = std::stoi(f[4]);
    r.solutions_found = std::stoi(f[5]);
    if (f[6] != "true" && f[6] != "false") throw std::runtime_error("results CSV: bad completed flag '" + f[6] + "'");
    r.completed = f[6] == "true";
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json to_json(const Summary& s) {
  using nlohmann::json;
  json j;
  j["records"] = s.records;
  j["completion_rate"] = s.completion_rate;
  j["trials"] = json::array();
  for (const auto& t : s.trials) {
    j["trials"].push_back({{"condition", t.condition},
                           {"trial_index", t.trial_index},
                           {"n", t.n},
                           {"mean", t.mean},
                           {"median", t.median},
                           {"stderr", t.stderr_mean},
                           {"completion_rate", t.completion_rate}});
  }
  j["comparisons"] = json::array();
  for (const auto& c : s.comparisons) {
    json cj{{"name", c.name}, {"a", c.a}, {"b", c.b}, {"trial_index", c.trial_index}, {"mean_a", c.mean_a}, {"mean_b", c.mean_b}};
    if (c.test) {
      cj["t"] = c.test->t;
      cj["df"] = c.test->df;
      cj["p_two_sided"] = c.test->p_two_sided;
    } else {
      cj["error"] = c.error;
    }
    j["comparisons"].push_back(cj);
  }
  return j;
}

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Writes <dir>/results.csv and <dir>/summary.json.
inline void write_results(const std::vector<RunRecord>& records, const Summary& summary, const std::string& dir) {
  auto write = [](const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << content;
    if (!f) throw IoError("write failed for '" + path + "'");
  };
  write(dir + "/results.csv", to_csv(records));
  write(dir + "/summary.json", to_json(summary).dump(2) + "\n");
}

inline std::vector<RunRecord> read_results(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return parse_csv(f);
}

}  // namespace openlock
