#include "toolfault/simulator.hpp"

#include <map>

#include "toolfault/error.hpp"
#include "toolfault/rng.hpp"

namespace toolfault {

namespace {

// Stream salts; arbitrary but fixed.
constexpr std::uint64_t kRenderStream = 0x72656e646572ULL;
constexpr std::uint64_t kBackoffStream = 0x6261636b6f6666ULL;

constexpr int kMaxProtocolErrors = 2;

struct ActiveFault {
  const FailureKind* kind = nullptr;
  Manifestation manifestation = Manifestation::ErrorPayload;
  std::int64_t injected_at_ms = 0;
  int failed_serves = 1;
  FaultProfile profile;
};

bool clears(const ActiveFault& f, std::optional<RecoveryTag> tag, std::int64_t now_ms) {
  const Remedy& r = f.kind->remedy;
  if (tag && r.accepts_tag(*tag)) return true;
  return r.transient && f.failed_serves >= f.profile.persistence &&
         now_ms - f.injected_at_ms >= f.profile.window_ms;
}

std::string insert_retry_after(std::string body, std::int64_t retry_after_ms) {
  if (body.size() < 2 || body.front() != '{' || body.back() != '}') return body;
  body.pop_back();
  body += ", \"retry_after_ms\": " + std::to_string(retry_after_ms) + "}";
  return body;
}

class Episode {
 public:
  Episode(const ToolRegistry& tools, const AgentPolicy& agent, const InjectionPlan& plan,
          const SimConfig& config, const EpisodeOptions& options)
      : tools_(tools),
        agent_(agent),
        plan_(plan),
        config_(config),
        options_(options),
        catalog_(options.catalog != nullptr ? *options.catalog : Catalog::shipped()),
        seed_(config.rng_seed == 0 ? plan.seed : mix_seed(plan.seed, config.rng_seed)) {}

  Trajectory run(std::string_view prompt) {
    t_.episode_id = options_.episode_id;
    t_.plan = plan_;
    t_.turns.push_back(make_turn(Role::System, system_prompt(tools_), clock_));
    t_.turns.push_back(make_turn(Role::User, std::string(prompt), clock_));

    for (int step = 0; step < config_.max_steps && !t_.terminal; ++step) {
      const AgentContext ctx{t_,        last_error_, tools_, options_.bank, options_.task,
                             seed_,     config_.retry_budget_per_error};
      AgentAction action;
      try {
        action = agent_.decide(ctx);
      } catch (const ProtocolError& e) {
        on_protocol_error(e.raw());
        continue;
      } catch (const TransportError& e) {
        t_.terminal = Terminal{TerminalKind::Abandoned, e.what()};
        break;
      }
      step_with(action);
    }
    if (!t_.terminal) {
      t_.terminal = Terminal{TerminalKind::StepBudgetExhausted,
                             "no terminal action within " + std::to_string(config_.max_steps) + " steps"};
    }
    return std::move(t_);
  }

 private:
  void on_protocol_error(const std::string& raw) {
    clock_ += config_.turn_cost_ms;
    t_.turns.push_back(make_turn(Role::Assistant, raw, clock_));
    ++t_.protocol_errors;
    if (t_.protocol_errors >= kMaxProtocolErrors) {
      t_.terminal = Terminal{TerminalKind::Abandoned, "repeated protocol errors"};
      return;
    }
    const FailureKind& pe = catalog_.at("protocol_error");
    t_.turns.push_back(make_turn(Role::Function, pe.example_output, clock_));
    last_error_ = classify_raw_failure(pe.example_output,
                                       {"", static_cast<int>(t_.turns.size() - 1)}, catalog_);
  }

  std::int64_t recovery_delay(const RecoveryStep& r, const std::string& key) const {
    const auto it = faults_.find(key);
    const ActiveFault* f = it == faults_.end() ? nullptr : &it->second;
    if (const auto* retry = std::get_if<RetryWithBackoff>(&r.action)) {
      const int attempt = key == last_failed_key_ ? consecutive_reissues_ + 1 : 1;
      const std::optional<std::int64_t> ra = f != nullptr ? f->profile.retry_after_ms : std::nullopt;
      const std::uint64_t seed =
          mix_seed(mix_seed(seed_, kBackoffStream), static_cast<std::uint64_t>(t_.turns.size()));
      return backoff_delay(attempt, *retry, ra, seed);
    }
    if (const auto* wait = std::get_if<WaitUntilHealthy>(&r.action)) {
      const std::int64_t poll = std::max<std::int64_t>(1, wait->poll_interval_ms);
      if (f == nullptr || !f->kind->remedy.transient) return wait->max_wait_ms;
      const std::int64_t elapsed = clock_ + config_.turn_cost_ms - f->injected_at_ms;
      const std::int64_t need = std::max<std::int64_t>(0, f->profile.window_ms - elapsed);
      const std::int64_t polls = std::max<std::int64_t>(1, (need + poll - 1) / poll);
      return std::min(wait->max_wait_ms, polls * poll);
    }
    return 0;
  }

  void step_with(const AgentAction& action) {
    std::int64_t delay = 0;
    const ToolCall* call = nullptr;
    if (const auto* c = std::get_if<CallAction>(&action)) call = &c->call;
    if (const auto* r = std::get_if<RecoveryStep>(&action)) {
      call = &r->call;
      delay = recovery_delay(*r, canonical_call_key(call->name, call->arguments));
    }
    clock_ += config_.turn_cost_ms + delay;
    t_.turns.push_back(make_turn(Role::Assistant, render_action(action), clock_));

    if (const auto* f = std::get_if<FinishAction>(&action)) {
      t_.terminal = Terminal{TerminalKind::Finished, f->answer};
      return;
    }
    if (const auto* g = std::get_if<GiveUpAction>(&action)) {
      t_.terminal = Terminal{TerminalKind::GracefulFailure, g->report};
      return;
    }

    const std::string key = canonical_call_key(call->name, call->arguments);
    if (key == last_failed_key_) {
      if (++consecutive_reissues_ > config_.retry_budget_per_error) {
        t_.terminal = Terminal{TerminalKind::Abandoned,
                               "retry budget of " + std::to_string(config_.retry_budget_per_error) +
                                   " exhausted for " + call->name};
        return;
      }
    } else {
      consecutive_reissues_ = 0;
    }
    serve(*call, key, recovery_tag_of(action));
  }

  void serve(const ToolCall& call, const std::string& key, std::optional<RecoveryTag> tag) {
    const int call_index = ++t_.tool_calls;
    const std::size_t turn_pos = t_.turns.size();
    const std::uint64_t render_seed =
        mix_seed(mix_seed(seed_, kRenderStream), static_cast<std::uint64_t>(call_index));
    const ToolSpec* tool = tools_.find(call.name);

    std::string normal;
    if (tool != nullptr) {
      const auto it = tool->scripted_responses.find(key);
      if (it != tool->scripted_responses.end()) normal = it->second;
    }

    std::string content;
    if (auto it = faults_.find(key); it != faults_.end()) {
      ActiveFault& f = it->second;
      if (clears(f, tag, clock_)) {
        faults_.erase(it);
        content = normal_or_natural(call, tool, normal, render_seed);
      } else {
        ++f.failed_serves;
        content = render_failure(*f.kind, f.manifestation, normal, render_seed, f.profile.retry_after_ms);
      }
    } else if (const FailureKind* planned = planned_fault(call_index)) {
      ActiveFault f;
      f.kind = planned;
      f.manifestation = call_index == plan_.turn_index ? plan_.manifestation : planned->default_manifestation;
      f.injected_at_ms = clock_;
      f.profile = plan_.profile;
      if (call_index != plan_.turn_index) f.profile.retry_after_ms.reset();
      content = render_failure(*f.kind, f.manifestation, normal, render_seed, f.profile.retry_after_ms);
      faults_[key] = f;
      t_.injections.push_back({turn_pos, call_index, planned->id});
    } else {
      content = normal_or_natural(call, tool, normal, render_seed);
    }

    t_.turns.push_back(make_turn(Role::Function, content, clock_));
    last_error_ = detect_failure(content, {call.name, static_cast<int>(turn_pos)}, catalog_);
    last_failed_key_ = last_error_ ? key : std::string();
    if (!last_error_) consecutive_reissues_ = 0;
  }

  const FailureKind* planned_fault(int call_index) const {
    if (plan_.clean()) return nullptr;
    if (call_index == plan_.turn_index) return &catalog_.at(*plan_.kind);
    if (plan_.cascade && call_index == plan_.cascade->turn_index) return &catalog_.at(plan_.cascade->kind);
    return nullptr;
  }

  // Agent-caused failures: unknown tools, missing arguments and calls with
  // no scripted response.
  std::string normal_or_natural(const ToolCall& call, const ToolSpec* tool, const std::string& normal,
                                std::uint64_t seed) const {
    if (tool == nullptr) {
      return render_failure(catalog_.at("tool_not_found"), Manifestation::ErrorPayload, "", seed);
    }
    if (!missing_required(*tool, call.arguments).empty()) {
      return render_failure(catalog_.at("missing_argument"), Manifestation::ErrorPayload, "", seed);
    }
    if (normal.empty()) {
      return render_failure(catalog_.at("http_404"), Manifestation::ErrorPayload, "", seed);
    }
    return normal;
  }

  const ToolRegistry& tools_;
  const AgentPolicy& agent_;
  const InjectionPlan& plan_;
  const SimConfig& config_;
  const EpisodeOptions& options_;
  const Catalog& catalog_;
  const std::uint64_t seed_;

  Trajectory t_;
  std::int64_t clock_ = 0;
  std::optional<ErrorSignature> last_error_;
  std::map<std::string, ActiveFault> faults_;
  std::string last_failed_key_;
  int consecutive_reissues_ = 0;
};

}  // namespace

void SimConfig::validate() const {
  if (max_steps < 3) throw ConfigError("max_steps must be >= 3");
  if (retry_budget_per_error < 1 || retry_budget_per_error > 4) {
    throw ConfigError("retry_budget_per_error must be in [1, 4]");
  }
  if (turn_cost_ms < 0) throw ConfigError("turn_cost_ms must be >= 0");
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  j = {{"max_steps", c.max_steps},
       {"retry_budget_per_error", c.retry_budget_per_error},
       {"turn_cost_ms", c.turn_cost_ms},
       {"clock_mode", "simulated"},
       {"rng_seed", c.rng_seed}};
}

void from_json(const nlohmann::json& j, SimConfig& c) {
  c = SimConfig{};
  c.max_steps = j.value("max_steps", c.max_steps);
  c.retry_budget_per_error = j.value("retry_budget_per_error", c.retry_budget_per_error);
  c.turn_cost_ms = j.value("turn_cost_ms", c.turn_cost_ms);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
}

std::string render_failure(const FailureKind& kind, Manifestation manifestation,
                           std::string_view normal_response, std::uint64_t seed,
                           std::optional<std::int64_t> retry_after_ms) {
  switch (manifestation) {
    case Manifestation::ErrorPayload:
      return retry_after_ms ? insert_retry_after(kind.example_output, *retry_after_ms) : kind.example_output;
    case Manifestation::SilentFailure:
      return "";
    case Manifestation::MalformedOutput: {
      std::string_view body = normal_response;
      if (body.size() < 2 || (body.front() != '{' && body.front() != '[')) body = "{}";
      // Any proper prefix of an object or array leaves a bracket unclosed.
      Rng rng(seed);
      const auto cut = 1 + rng.below(body.size() - 1);
      return std::string(body.substr(0, cut));
    }
    case Manifestation::PartialOutput: {
      auto doc = nlohmann::json::parse(normal_response, nullptr, false);
      nlohmann::json out = nlohmann::json::object();
      if (!doc.is_discarded() && doc.is_object()) {
        const std::size_t keep = doc.size() / 2;
        std::size_t i = 0;
        for (auto it = doc.begin(); it != doc.end() && i < keep; ++it, ++i) out[it.key()] = it.value();
      }
      out["incomplete"] = true;
      return out.dump();
    }
  }
  return kind.example_output;
}

std::string render_failure(const FailureKind& kind, Manifestation manifestation, const ToolSpec& tool,
                           std::uint64_t seed) {
  const std::string normal =
      tool.scripted_responses.empty() ? std::string("{}") : tool.scripted_responses.begin()->second;
  return render_failure(kind, manifestation, normal, seed);
}

std::int64_t backoff_delay(int attempt, const RetryWithBackoff& policy,
                           std::optional<std::int64_t> retry_after_ms, std::uint64_t seed) {
  if (retry_after_ms && policy.respect_retry_after) return *retry_after_ms;
  std::int64_t ceiling = std::max<std::int64_t>(0, policy.base_delay_ms);
  for (int i = 1; i < attempt && ceiling < policy.cap_ms; ++i) ceiling *= 2;
  ceiling = std::min(ceiling, policy.cap_ms);
  if (ceiling <= 0) return 0;
  Rng rng(seed);
  return rng.between(0, ceiling);
}

std::int64_t advance_backoff(std::int64_t clock_ms, int attempt, const RetryWithBackoff& policy,
                             std::optional<std::int64_t> retry_after_ms, std::uint64_t seed) {
  if (attempt < 1) throw ConfigError("attempt_number must be >= 1");
  return clock_ms + backoff_delay(attempt, policy, retry_after_ms, seed);
}

std::string system_prompt(const ToolRegistry& tools) {
  std::string out =
      "You are a tool-using agent. Answer each turn with\n"
      "Thought: <reasoning>\nAction: <tool name or Finish>\nAction Input: <JSON object>\n"
      "Prefix corrective steps with \"Recovery:\". Finish takes "
      "{\"return_type\": \"give_answer\" | \"give_up_and_restart\", \"final_answer\": <text>}.\n"
      "Tools:\n";
  for (const auto& t : tools.tools()) {
    out += "- " + t.name + ": " + t.description + " (";
    for (std::size_t i = 0; i < t.parameters.size(); ++i) {
      const auto& p = t.parameters[i];
      if (i > 0) out += ", ";
      out += p.name + ": " + std::string(to_string(p.type)) + (p.required ? "" : "?");
    }
    out += ")\n";
  }
  return out;
}

Trajectory run_episode(std::string_view prompt, const ToolRegistry& tools, const AgentPolicy& agent,
                       const InjectionPlan& plan, const SimConfig& config, const EpisodeOptions& options) {
  config.validate();
  const Catalog& catalog = options.catalog != nullptr ? *options.catalog : Catalog::shipped();
  validate(plan, catalog);
  if (tools.empty()) throw ConfigError("tool registry is empty");
  if (!plan.clean() && plan.turn_index > config.max_steps) {
    throw ConfigError("injection turn exceeds max_steps");
  }
  Episode episode(tools, agent, plan, config, options);
  return episode.run(prompt);
}

}  // namespace toolfault
