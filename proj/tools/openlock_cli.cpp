#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "openlock/openlock.hpp"
#include "openlock/service.hpp"

namespace fs = std::filesystem;
using namespace openlock;

namespace {

struct TraceObserver : AgentObserver {
  std::vector<std::string>* lines = nullptr;
  std::string condition;
  int agent = 0;

  void on_attempt(const AttemptLog& log) override {
    json j = attempt_to_json(log);
    j["condition"] = condition;
    j["agent"] = agent;
    lines->push_back(j.dump());
  }
};

struct RunArgs {
  std::string condition = "all";
  int agents = kDefaultAgents;
  int attempts = kDefaultAttemptBudget;
  std::uint64_t seed = 7;
  std::string out = "results";
  std::string mode = "sample";
  std::string weighting = "associative";
  double lambda = 1.0;
  unsigned threads = 0;
  bool check = false;
  std::string trace;
};

int cmd_run(const RunArgs& a) {
  std::vector<Condition> conditions;
  if (a.condition == "all") {
    for (auto name : kConditionNames) conditions.push_back(Condition::parse(name));
  } else {
    conditions.push_back(Condition::parse(a.condition));
  }
  RunOptions options;
  options.threads = a.threads;
  options.agent.mode = a.mode == "mean" ? LikelihoodMode::Mean : LikelihoodMode::Sample;
  options.agent.lambda = a.lambda;
  options.agent.weighting =
      a.weighting == "uniform" ? InstantiationWeighting::Uniform : InstantiationWeighting::Associative;

  std::ofstream trace;
  if (!a.trace.empty()) {
    trace.open(a.trace, std::ios::binary);
    if (!trace) throw IoError("cannot open '" + a.trace + "' for writing");
  }

  std::vector<RunRecord> records;
  for (auto& c : conditions) {
    c.agents = a.agents;
    c.attempt_budget = a.attempts;
    std::vector<std::vector<std::string>> lines(static_cast<std::size_t>(std::max(0, a.agents)));
    if (trace) {
      options.observers = [&lines](const Condition& cond, int i) {
        auto o = std::make_unique<TraceObserver>();
        o->lines = &lines[i];
        o->condition = cond.name();
        o->agent = i;
        return o;
      };
    }
    const auto r = run_condition(c, a.seed, options);
    records.insert(records.end(), r.begin(), r.end());
    for (const auto& per_agent : lines) {
      for (const auto& l : per_agent) trace << l << '\n';
    }
  }

  fs::create_directories(a.out);
  const Summary summary = summarize(records);
  write_results(records, summary, a.out);

  std::cout << "wrote " << records.size() << " records to " << (fs::path(a.out) / "results.csv").string() << "\n";
  for (const auto& t : summary.trials) {
    std::cout << "  " << t.condition << " trial " << t.trial_index << ": mean " << t.mean << " median " << t.median
              << " completion " << t.completion_rate << "\n";
  }
  for (const auto& c : summary.comparisons) {
    std::cout << "  " << c.name << ": " << c.a << " " << c.mean_a << " vs " << c.b << " " << c.mean_b;
    if (c.test) std::cout << " t=" << c.test->t << " df=" << c.test->df << " p=" << c.test->p_two_sided;
    std::cout << "\n";
  }
  if (!a.check) return 0;
  bool ok = true;
  for (const auto& t : check_trends(summary)) {
    std::cout << (t.passed ? "PASS " : "FAIL ") << t.name << (t.blocking ? "" : " [non-blocking]") << ": " << t.detail
              << "\n";
    if (t.blocking && !t.passed) ok = false;
  }
  return ok ? 0 : 1;
}

int cmd_oracle(const std::string& schema_name, std::uint64_t seed) {
  const auto schema = parse_schema(schema_name);
  if (!schema) throw ConfigError("unknown schema '" + schema_name + "'");
  const auto kind = role_count(*schema) == 3 ? SequenceKind::Training3 : SequenceKind::Transfer4;
  const int bound = solution_count(*schema) + 1;
  bool ok = true;
  for (const auto& trial : standard_trial_sequence(kind, *schema, seed)) {
    const auto r = run_oracle(trial);
    const bool pass = r.completed && r.attempts_used <= bound;
    ok = ok && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << r.trial_id << ": " << r.attempts_used << " attempts (bound " << bound
              << "), " << r.solutions_found << " solutions\n";
  }
  return ok ? 0 : 1;
}

int cmd_dump(const std::string& space, int solutions, const std::string& out_path) {
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw IoError("cannot open '" + out_path + "' for writing");
    out = &file;
  }
  const ChainSpace chains{TrialConfig{}};
  if (space == "chains") {
    dump_chains(*out, chains);
  } else if (space == "abstract") {
    dump_abstract(*out, standard_instantiations(solutions));
  } else {
    dump_instantiations(*out, standard_instantiations(solutions), chains);
  }
  return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::string& host, int port, const std::string& static_dir, int idle_minutes) {
  service::ManagerOptions mo;
  mo.idle_timeout = std::chrono::minutes(idle_minutes);
  service::SessionManager manager(mo);
  httplib::Server server;
  service::ServerOptions so;
  so.static_dir = static_dir;
  service::install_routes(server, manager, so);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "listening on http://" << host << ":" << port << std::endl;
  const bool ok = server.listen(host, port);
  manager.close_all();
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OpenLock causal-learning agent and environment"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run experimental conditions and write results.csv / summary.json");
  std::vector<std::string> condition_choices(kConditionNames.begin(), kConditionNames.end());
  condition_choices.push_back("all");
  run_cmd->add_option("--condition", run.condition, "condition name or 'all'")->check(CLI::IsMember(condition_choices));
  run_cmd->add_option("--agents", run.agents, "agents per condition")->check(CLI::PositiveNumber);
  run_cmd->add_option("--attempts", run.attempts, "attempt budget per trial")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", run.seed, "master seed");
  run_cmd->add_option("--out", run.out, "output directory");
  run_cmd->add_option("--mode", run.mode, "likelihood mode")->check(CLI::IsMember({"sample", "mean"}));
  run_cmd->add_option("--weighting", run.weighting, "instantiation weighting")
      ->check(CLI::IsMember({"associative", "uniform"}));
  run_cmd->add_option("--lambda", run.lambda, "GED decay rate")->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", run.threads, "worker threads (0: all cores)");
  run_cmd->add_flag("--check", run.check, "evaluate trend checks; nonzero exit on a blocking failure");
  run_cmd->add_option("--trace", run.trace, "write per-attempt JSON lines to this file");

  std::string oracle_schema;
  std::uint64_t oracle_seed = 0;
  auto* oracle_cmd = app.add_subcommand("oracle", "run the scripted optimal agent on a standard trial sequence");
  oracle_cmd->add_option("--schema", oracle_schema, "cc3, ce3, cc4 or ce4")
      ->required()
      ->check(CLI::IsMember({"cc3", "ce3", "cc4", "ce4", "CC3", "CE3", "CC4", "CE4"}));
  oracle_cmd->add_option("--seed", oracle_seed, "trial sequence seed");

  std::string dump_space = "chains";
  int dump_solutions = 2;
  std::string dump_out;
  auto* dump_cmd = app.add_subcommand("dump", "write a hypothesis space as JSON lines");
  dump_cmd->add_option("--space", dump_space, "chains, abstract or instantiated")
      ->check(CLI::IsMember({"chains", "abstract", "instantiated"}));
  dump_cmd->add_option("--solutions", dump_solutions, "solution count (2 or 3)")->check(CLI::IsMember({2, 3}));
  dump_cmd->add_option("--out", dump_out, "output file (default stdout)");

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  int idle_minutes = 30;
  auto* serve_cmd = app.add_subcommand("serve", "start the session server");
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "port")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--static", static_dir, "directory served at /")->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--idle-timeout", idle_minutes, "session idle timeout in minutes")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*oracle_cmd) return cmd_oracle(oracle_schema, oracle_seed);
    if (*dump_cmd) return cmd_dump(dump_space, dump_solutions, dump_out);
    if (*serve_cmd) return cmd_serve(host, port, static_dir, idle_minutes);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
