#pragma once

// Session server: one environment per session behind a JSON/HTTP protocol,
// with a server-sent-events channel per session.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "openlock/env.hpp"
#include "openlock/harness.hpp"
#include "openlock/json_io.hpp"
#include "openlock/planner.hpp"

namespace openlock::service {

using Clock = std::chrono::steady_clock;

struct ServiceError : std::runtime_error {
  ServiceError(std::string code, int status, const std::string& message)
      : std::runtime_error(message), code(std::move(code)), status(status) {}
  std::string code;
  int status;
};

inline ServiceError bad_request(const std::string& m) { return {"bad_request", 400, m}; }
inline ServiceError not_found(const std::string& m) { return {"not_found", 404, m}; }
inline ServiceError trial_over(const std::string& m) { return {"trial_over", 409, m}; }

inline json error_payload(const ServiceError& e) { return {{"code", e.code}, {"message", e.what()}}; }

enum class SessionMode { Human, SpectateAgent };

inline std::string_view to_string(SessionMode m) { return m == SessionMode::Human ? "HUMAN" : "SPECTATE_AGENT"; }

struct SessionRequest {
  SchemaKind schema = SchemaKind::CC3;
  std::uint64_t seed = 0;
  std::vector<TrialConfig> trials;  // empty: the standard sequence for schema and seed
  int attempt_budget = kDefaultAttemptBudget;
  SessionMode mode = SessionMode::Human;
};

// {schema, seed?, trial_sequence?, attempt_budget?, mode?}
inline SessionRequest parse_session_request(const json& j) {
  if (!j.is_object()) throw bad_request("request body must be a JSON object");
  SessionRequest r;
  if (!j.contains("schema") || !j["schema"].is_string()) throw bad_request("missing field 'schema'");
  const auto kind = parse_schema(j["schema"].get<std::string>());
  if (!kind) throw bad_request("unknown schema '" + j["schema"].get<std::string>() + "'");
  r.schema = *kind;
  if (j.contains("seed")) {
    const auto& seed = j["seed"];
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
      throw bad_request("seed must be a non-negative integer");
    }
    r.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("attempt_budget")) {
    if (!j["attempt_budget"].is_number_integer() || j["attempt_budget"].get<int>() < 1) {
      throw bad_request("attempt_budget must be a positive integer");
    }
    r.attempt_budget = j["attempt_budget"].get<int>();
  }
  if (j.contains("mode")) {
    const std::string m = j["mode"].is_string() ? j["mode"].get<std::string>() : "";
    if (m == "HUMAN") {
      r.mode = SessionMode::Human;
    } else if (m == "SPECTATE_AGENT") {
      r.mode = SessionMode::SpectateAgent;
    } else {
      throw bad_request("mode must be HUMAN or SPECTATE_AGENT");
    }
  }
  if (j.contains("trial_sequence")) {
    if (!j["trial_sequence"].is_array() || j["trial_sequence"].empty()) {
      throw bad_request("trial_sequence must be a nonempty array");
    }
    try {
      for (const auto& t : j["trial_sequence"]) {
        r.trials.push_back(trial_from_json(t));
        if (r.trials.back().schema != r.schema) throw ConfigError("trial schema differs from session schema");
      }
    } catch (const ConfigError& e) {
      throw bad_request(e.what());
    }
  }
  return r;
}

class Session {
 public:
  Session(std::string id, SessionRequest request)
      : id_(std::move(id)), request_(std::move(request)) {
    if (request_.trials.empty()) {
      const auto kind = role_count(request_.schema) == 3 ? SequenceKind::Training3 : SequenceKind::Transfer4;
      request_.trials = standard_trial_sequence(kind, request_.schema, request_.seed);
    }
    env_ = new_trial(request_.trials.front(), request_.attempt_budget);
    if (request_.mode == SessionMode::SpectateAgent) {
      agent_.emplace(request_.seed, AgentOptions{LikelihoodMode::Mean});
      agent_->begin_trial(env_.config, request_.attempt_budget);
    }
  }

  const std::string& id() const { return id_; }
  SessionMode mode() const { return request_.mode; }

  json trial_info() const {
    json levers = json::array();
    for (const auto& l : env_.levers) {
      levers.push_back({{"position", std::string(to_string(l.position))}, {"color", std::string(to_string(l.color))}});
    }
    return {{"trial", trial_to_json(env_.config)},
            {"trial_index", trial_index_},
            {"trial_count", request_.trials.size()},
            {"levers", levers},
            {"attempt_budget", env_.attempt_budget},
            {"actions_per_attempt", kActionsPerAttempt},
            {"solutions_total", env_.config.num_solutions()}};
  }

  json state() const {
    json s = state_to_json(env_);
    s["trial_index"] = trial_index_;
    s["trial_count"] = request_.trials.size();
    s["mode"] = std::string(to_string(request_.mode));
    return s;
  }

  json apply(Action a) {
    if (request_.mode != SessionMode::Human) throw bad_request("session is driven by the agent");
    return apply_step(a);
  }

  // Lets the agent play one attempt; the executed actions are replayed through
  // the session's own environment so both stay in lockstep.
  json agent_attempt() {
    if (!agent_) throw bad_request("session has no agent");
    if (env_.trial_over()) throw trial_over("trial is over");
    struct Capture : AgentObserver {
      const Agent* agent = nullptr;
      std::vector<json> decisions;
      void on_decision(const DecisionView& d) override {
        decisions.push_back(decision_to_json(d, agent->tracker(), agent->chains()));
      }
    } capture;
    capture.agent = &*agent_;
    const AttemptLog log = agent_->run_attempt(&capture);
    json steps = json::array();
    for (std::size_t i = 0; i < log.actions.size(); ++i) {
      json r = apply_step(log.actions[i]);
      if (i < capture.decisions.size()) r["belief"] = capture.decisions[i];
      steps.push_back(std::move(r));
    }
    if (agent_->env().trial_over()) agent_->finish_trial();
    return {{"attempt", attempt_to_json(log)}, {"steps", steps}, {"state", state()}};
  }

  json next_trial() {
    if (trial_index_ + 1 >= static_cast<int>(request_.trials.size())) throw trial_over("no more trials in the sequence");
    results_.push_back(current_record());
    if (agent_ && agent_->in_trial()) agent_->finish_trial();
    ++trial_index_;
    env_ = new_trial(request_.trials[trial_index_], request_.attempt_budget);
    if (agent_) agent_->begin_trial(env_.config, request_.attempt_budget);
    publish({{"type", "trial"}, {"trial_index", trial_index_}, {"state", state()}});
    return {{"trial_info", trial_info()}, {"state", state()}};
  }

  std::string results_csv() const {
    auto rows = results_;
    if (env_.trial_over()) rows.push_back(current_record());
    return to_csv(rows);
  }

  // Event log access for the push channel.
  std::size_t message_count() const { return log_.size(); }
  const json& message(std::size_t i) const { return log_[i]; }
  bool closed() const { return closed_; }
  void close() {
    closed_ = true;
    cv_.notify_all();
  }

  std::mutex& mutex() { return mu_; }
  std::condition_variable& cv() { return cv_; }
  Clock::time_point last_access;

 private:
  json apply_step(Action a) {
    if (env_.trial_over()) throw trial_over("trial is over");
    const json before = state_to_json(env_);
    StepResult r = step(env_, a);
    env_ = std::move(r.state);
    const json after = state_to_json(env_);
    json out = {{"state", state()},
                {"event", event_to_json(r.event)},
                {"attempt_status",
                 {{"attempt_ended", r.attempt_ended},
                  {"door_opened", r.door_opened},
                  {"new_solution", r.new_solution},
                  {"already_found", r.already_found},
                  {"actions_left_in_attempt", env_.actions_left_in_attempt},
                  {"attempts_left_in_trial", env_.attempts_left_in_trial}}},
                {"solutions_found", env_.found_solutions.size()},
                {"trial_complete", env_.trial_complete()}};
    publish({{"type", "action"},
             {"action", action_to_json(a)},
             {"event", event_to_json(r.event)},
             {"state_diff", state_diff(before, after)}});
    return out;
  }

  void publish(json message) {
    message["seq"] = log_.size();
    log_.push_back(std::move(message));
    cv_.notify_all();
  }

  RunRecord current_record() const {
    return {"session", request_.seed, trial_index_, env_.config.trial_id, env_.attempts_used(),
            static_cast<int>(env_.found_solutions.size()), env_.trial_complete()};
  }

  std::string id_;
  SessionRequest request_;
  int trial_index_ = 0;
  EnvState env_;
  std::optional<Agent> agent_;
  std::vector<RunRecord> results_;
  std::vector<json> log_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable cv_;
};

struct ManagerOptions {
  std::chrono::milliseconds idle_timeout = std::chrono::minutes(30);
  std::function<Clock::time_point()> clock = [] { return Clock::now(); };
};

// Owns all sessions. Calls on different sessions run concurrently; calls on
// one session are serialized by its mutex.
class SessionManager {
 public:
  explicit SessionManager(ManagerOptions options = {}) : options_(std::move(options)), ids_(std::random_device{}()) {}

  json create_session(const json& request) {
    auto parsed = parse_session_request(request);
    expire_idle();
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(mu_);
      std::string id;
      do {
        id = new_id();
      } while (sessions_.contains(id));
      s = std::make_shared<Session>(id, std::move(parsed));
      s->last_access = options_.clock();
      sessions_.emplace(id, s);
    }
    std::lock_guard lock(s->mutex());
    return {{"session_id", s->id()},
            {"mode", std::string(to_string(s->mode()))},
            {"trial_info", s->trial_info()},
            {"state", s->state()}};
  }

  json get_state(const std::string& id) {
    return with_session(id, [](Session& s) { return s.state(); });
  }

  json apply_action(const std::string& id, const json& body) {
    Action a;
    try {
      a = action_from_json(body);
    } catch (const ConfigError& e) {
      throw bad_request(e.what());
    } catch (const json::exception& e) {
      throw bad_request(e.what());
    }
    return with_session(id, [&](Session& s) { return s.apply(a); });
  }

  json agent_attempt(const std::string& id) {
    return with_session(id, [](Session& s) { return s.agent_attempt(); });
  }

  json next_trial(const std::string& id) {
    return with_session(id, [](Session& s) { return s.next_trial(); });
  }

  std::string results_csv(const std::string& id) {
    return with_session(id, [](Session& s) { return s.results_csv(); });
  }

  // Looks up a live session and refreshes its idle timer.
  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("no session '" + id + "'");
    const auto now = options_.clock();
    std::shared_ptr<Session> s = it->second;
    if (now - s->last_access > options_.idle_timeout) {
      sessions_.erase(it);
      std::lock_guard slock(s->mutex());
      s->close();
      throw not_found("session '" + id + "' expired");
    }
    s->last_access = now;
    return s;
  }

  // Removes sessions idle for longer than the timeout; returns how many.
  std::size_t expire_idle() {
    std::vector<std::shared_ptr<Session>> expired;
    {
      std::lock_guard lock(mu_);
      const auto now = options_.clock();
      for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (now - it->second->last_access > options_.idle_timeout) {
          expired.push_back(it->second);
          it = sessions_.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& s : expired) {
      std::lock_guard lock(s->mutex());
      s->close();
    }
    return expired.size();
  }

  void close_all() {
    std::map<std::string, std::shared_ptr<Session>> all;
    {
      std::lock_guard lock(mu_);
      all.swap(sessions_);
    }
    for (auto& [id, s] : all) {
      std::lock_guard lock(s->mutex());
      s->close();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  template <class F>
  std::invoke_result_t<F&, Session&> with_session(const std::string& id, F&& f) {
    auto s = find(id);
    std::lock_guard lock(s->mutex());
    return f(*s);
  }

  std::string new_id() {
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << ids_();
    out.width(16);
    out << ids_();
    return out.str();
  }

  ManagerOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 ids_;
};

// ---------------------------------------------------------------------------
// HTTP

inline std::string sse_frame(std::string_view event, const json& data) {
  return "event: " + std::string(event) + "\ndata: " + data.dump() + "\n\n";
}

struct ServerOptions {
  std::string static_dir;  // empty: no static mount
  std::chrono::milliseconds poll_interval{200};
};

inline void install_routes(httplib::Server& server, SessionManager& manager, const ServerOptions& options = {}) {
  auto send_json = [](httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [send_json](auto handler) {
    return [handler, send_json](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const ServiceError& e) {
        send_json(res, error_payload(e), e.status);
      } catch (const ProtocolError& e) {
        send_json(res, error_payload(trial_over(e.what())), 409);
      } catch (const std::exception& e) {
        send_json(res, {{"code", "internal"}, {"message", e.what()}}, 500);
      }
    };
  };
  auto parse_body = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw bad_request(std::string("malformed JSON: ") + e.what());
    }
  };

  server.Post("/sessions", guarded([&manager, send_json, parse_body](const httplib::Request& req, httplib::Response& res) {
                send_json(res, manager.create_session(parse_body(req)), 201);
              }));
  server.Get(R"(/sessions/([0-9a-f]+)/state)", guarded([&manager, send_json](const httplib::Request& req, httplib::Response& res) {
               send_json(res, manager.get_state(req.matches[1]));
             }));
  server.Post(R"(/sessions/([0-9a-f]+)/actions)",
              guarded([&manager, send_json, parse_body](const httplib::Request& req, httplib::Response& res) {
                send_json(res, manager.apply_action(req.matches[1], parse_body(req)));
              }));
  server.Post(R"(/sessions/([0-9a-f]+)/agent-attempt)",
              guarded([&manager, send_json](const httplib::Request& req, httplib::Response& res) {
                send_json(res, manager.agent_attempt(req.matches[1]));
              }));
  server.Post(R"(/sessions/([0-9a-f]+)/next-trial)",
              guarded([&manager, send_json](const httplib::Request& req, httplib::Response& res) {
                send_json(res, manager.next_trial(req.matches[1]));
              }));
  server.Get(R"(/sessions/([0-9a-f]+)/results)", guarded([&manager](const httplib::Request& req, httplib::Response& res) {
               res.set_content(manager.results_csv(req.matches[1]), "text/csv");
             }));

  // Push channel: a state snapshot, then one frame per logged message.
  server.Get(R"(/sessions/([0-9a-f]+)/events)",
             guarded([&manager, options](const httplib::Request& req, httplib::Response& res) {
               auto session = manager.find(req.matches[1]);
               std::size_t cursor = 0;
               json snapshot;
               {
                 std::lock_guard lock(session->mutex());
                 snapshot = session->state();
                 cursor = session->message_count();
               }
               auto sent_snapshot = std::make_shared<bool>(false);
               auto next = std::make_shared<std::size_t>(cursor);
               res.set_header("Cache-Control", "no-cache");
               res.set_chunked_content_provider(
                   "text/event-stream",
                   [session, snapshot, sent_snapshot, next, options](std::size_t, httplib::DataSink& sink) {
                     if (!*sent_snapshot) {
                       *sent_snapshot = true;
                       const auto frame = sse_frame("snapshot", snapshot);
                       return sink.write(frame.data(), frame.size());
                     }
                     std::vector<json> pending;
                     bool closed = false;
                     {
                       std::unique_lock lock(session->mutex());
                       session->cv().wait_for(lock, options.poll_interval, [&] {
                         return session->closed() || session->message_count() > *next;
                       });
                       while (*next < session->message_count()) pending.push_back(session->message((*next)++));
                       closed = session->closed();
                     }
                     for (const auto& m : pending) {
                       const auto frame = sse_frame(m.value("type", "action"), m);
                       if (!sink.write(frame.data(), frame.size())) return false;
                     }
                     if (closed) {
                       sink.done();
                       return true;
                     }
                     return sink.is_writable();
                   });
             }));

  if (!options.static_dir.empty()) {
    if (!server.set_mount_point("/", options.static_dir)) {
      throw std::runtime_error("static directory '" + options.static_dir + "' does not exist");
    }
  }
}

}  // namespace openlock::service
