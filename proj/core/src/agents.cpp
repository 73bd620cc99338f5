#include "toolfault/agents.hpp"

#include "toolfault/call_analysis.hpp"
#include "toolfault/error.hpp"
#include "toolfault/rng.hpp"

namespace toolfault {

namespace {

constexpr std::uint64_t kHallucinationSalt = 0x68616c6cULL;
constexpr std::uint64_t kCriticSalt = 0x637269746963ULL;
constexpr int kReflectAttempts = 3;

const TaskPlan& require_plan(const AgentContext& ctx) {
  if (ctx.plan == nullptr || ctx.plan->steps.empty()) {
    throw ConfigError("scripted agents need a task plan");
  }
  return *ctx.plan;
}

std::string describe(const ErrorSignature& sig) {
  std::string out = sig.kind;
  if (!sig.message.empty()) out += " (" + sig.message + ")";
  return out;
}

std::string substitute(std::string text, std::string_view slot, std::string_view value) {
  for (std::size_t pos = text.find(slot); pos != std::string::npos; pos = text.find(slot, pos + value.size())) {
    text.replace(pos, slot.size(), value);
  }
  return text;
}

// Answer built from the last successful response of the final step.
std::string final_answer(const AgentContext& ctx, const CallView& view, const TaskPlan& plan) {
  const int last = static_cast<int>(plan.steps.size()) - 1;
  for (auto it = view.calls.rbegin(); it != view.calls.rend(); ++it) {
    if (it->step == last && it->function_turn && !it->failure) {
      return answer_from_response(ctx.trajectory.turns[*it->function_turn].content);
    }
  }
  return {};
}

AgentAction call_step(const TaskPlan& plan, int step) {
  const TaskStep& s = plan.steps[static_cast<std::size_t>(step)];
  return CallAction{"Step " + std::to_string(step + 1) + " of the plan: call " + s.tool + ".",
                    ToolCall{s.tool, s.arguments}};
}

// Shared skeleton: finish when every step succeeded, call the next open
// step, or hand the current error event to `on_error`.
template <class OnError>
AgentAction drive(const AgentContext& ctx, OnError&& on_error) {
  const TaskPlan& plan = require_plan(ctx);
  const CallView view = analyze_calls(ctx.trajectory.turns, &plan, ctx.tools);
  const int step = next_open_step(view, plan);
  if (step == static_cast<int>(plan.steps.size())) {
    return FinishAction{"All steps completed.", final_answer(ctx, view, plan)};
  }
  const auto event = error_event(view, step);
  if (event.empty()) return call_step(plan, step);
  return on_error(plan, step, event);
}

AgentAction reflect_step(const AgentContext& ctx, const std::vector<const CallRecord*>& event) {
  const int attempts = static_cast<int>(event.size()) - 1;
  const int budget = std::min(kReflectAttempts, ctx.retry_budget);
  const ToolCall& call = event.back()->call;
  if (attempts < budget && attempts < kReflectAttempts - 1) {
    return RecoveryStep{RetryWithBackoff{kReflectAttempts, 0, 0, false},
                        "The call failed; retrying it as is (attempt " + std::to_string(attempts + 1) + ").",
                        call};
  }
  if (attempts < budget) {
    return RecoveryStep{ReformatArguments{"re-serialize the arguments"},
                        "Retries failed; reissuing with reformatted arguments.", call};
  }
  return GiveUpAction{"Retries did not help.",
                      "Could not complete the task: " + describe(*event.front()->failure), false};
}

// Runs a flattened script: entry i is the i-th recovery turn of the event.
// `escalate` enables the switch-then-terminate fallback on exhaustion.
AgentAction run_script(const AgentContext& ctx, const std::vector<RecoveryAction>& flat,
                       const std::vector<const CallRecord*>& event, const std::string& label,
                       bool escalate) {
  const ErrorSignature& sig = *event.front()->failure;
  const ToolCall& origin = event.front()->call;
  const ToolCall& current = event.back()->call;
  const auto alternatives = ctx.tools.alternatives(origin.name);
  const std::size_t taken = event.size() - 1;

  std::string fallback_report;
  for (const auto& a : flat) {
    if (const auto* t = std::get_if<TerminateGracefully>(&a)) fallback_report = t->report;
  }

  if (taken < flat.size()) {
    const RecoveryAction& next = flat[taken];
    if (const auto* t = std::get_if<TerminateGracefully>(&next)) {
      return GiveUpAction{label + ": the failure is not recoverable here; reporting it.",
                          render_report(t->report, origin.name, sig), true};
    }
    if (std::holds_alternative<SwitchTool>(next)) {
      return RecoveryStep{next, label + ": switching to " + alternatives.front()->name + ".",
                          ToolCall{alternatives.front()->name, origin.arguments}};
    }
    return RecoveryStep{next, label + ": applying " + std::string(to_string(tag_of(next))) + ".", current};
  }

  const bool switched = current.name != origin.name;
  if (escalate && !switched && !alternatives.empty()) {
    return RecoveryStep{SwitchTool{}, label + ": script exhausted; switching to " + alternatives.front()->name + ".",
                        ToolCall{alternatives.front()->name, origin.arguments}};
  }
  return GiveUpAction{label + ": recovery options exhausted.", render_report(fallback_report, origin.name, sig), true};
}

}  // namespace

std::string render_report(std::string report, std::string_view tool, const ErrorSignature& sig) {
  if (report.empty()) report = "Stopped: {tool} failed with {error}.";
  return substitute(substitute(std::move(report), "{tool}", tool), "{error}", describe(sig));
}

std::string answer_from_response(std::string_view body) {
  auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::string(body);
  std::string out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!out.empty()) out += "; ";
    out += it.key() + ": " + (it->is_string() ? it->get<std::string>() : it->dump());
  }
  return out;
}

AgentAction VanillaPolicy::decide(const AgentContext& ctx) const {
  return drive(ctx, [&](const TaskPlan& plan, int step, const std::vector<const CallRecord*>& event) -> AgentAction {
    const CallRecord& first = *event.front();
    const double draw = keyed_unit(mix_seed(ctx.seed, kHallucinationSalt), first.function_turn.value_or(0));
    if (draw < p_) {
      const TaskStep& s = plan.steps[static_cast<std::size_t>(step)];
      std::string fields;
      for (const auto& f : s.expected_fields) fields += (fields.empty() ? "" : ", ") + f;
      return FinishAction{"The task looks complete.",
                          "Task completed successfully; retrieved " + fields + " from " + s.tool + "."};
    }
    return GiveUpAction{"The tool returned an error.",
                        "Could not complete the task: " + describe(*first.failure), false};
  });
}

AgentAction ReflectPolicy::decide(const AgentContext& ctx) const {
  return drive(ctx, [&](const TaskPlan&, int, const std::vector<const CallRecord*>& event) {
    return reflect_step(ctx, event);
  });
}

bool critic_oracle_access(std::uint64_t seed, std::size_t error_turn, double p) {
  return keyed_unit(mix_seed(seed, kCriticSalt), error_turn) < p;
}

AgentAction CriticPolicy::decide(const AgentContext& ctx) const {
  return drive(ctx, [&](const TaskPlan&, int, const std::vector<const CallRecord*>& event) -> AgentAction {
    const CallRecord& first = *event.front();
    if (ctx.bank == nullptr || !critic_oracle_access(ctx.seed, first.function_turn.value_or(0), p_)) {
      return reflect_step(ctx, event);
    }
    const bool has_alt = !ctx.tools.alternatives(first.call.name).empty();
    const int budget = std::min(kReflectAttempts, ctx.retry_budget);
    // Best-first: the nearest exemplar whose script has an applicable
    // corrective step; pure-termination scripts only when none does.
    const auto candidates = retrieve_top_k(*ctx.bank, *first.failure, k_);
    const RecoveryExemplar* chosen = candidates.front().exemplar;
    for (const auto& c : candidates) {
      const auto flat = flatten_script(c.exemplar->script, has_alt, budget);
      if (!flat.empty() && !std::holds_alternative<TerminateGracefully>(flat.front())) {
        chosen = c.exemplar;
        break;
      }
    }
    std::vector<RecoveryAction> flat = flatten_script(chosen->script, has_alt, budget);
    // At most three recovery attempts, then terminate.
    std::vector<RecoveryAction> capped;
    for (const auto& a : flat) {
      if (std::holds_alternative<TerminateGracefully>(a)) continue;
      if (static_cast<int>(capped.size()) == kReflectAttempts) break;
      capped.push_back(a);
    }
    for (const auto& a : flat) {
      if (std::holds_alternative<TerminateGracefully>(a)) {
        capped.push_back(a);
        break;
      }
    }
    return run_script(ctx, capped, event, "Oracle " + chosen->id, false);
  });
}

AgentAction PaladinPolicy::decide(const AgentContext& ctx) const {
  return drive(ctx, [&](const TaskPlan&, int, const std::vector<const CallRecord*>& event) {
    const CallRecord& first = *event.front();
    const bool has_alt = !ctx.tools.alternatives(first.call.name).empty();
    if (ctx.bank == nullptr) {
      return run_script(ctx, flatten_script(generic_recovery_chain(), has_alt, ctx.retry_budget), event,
                        "Generic recovery", true);
    }
    const RecoveryExemplar& e = retrieve(*ctx.bank, *first.failure);
    return run_script(ctx, flatten_script(e.script, has_alt, ctx.retry_budget), event,
                      "Exemplar " + e.id, true);
  });
}

std::vector<RecoveryAction> generic_recovery_chain() {
  return {RetryWithBackoff{3, 500, 8000, true}, SwitchTool{SwitchStrategy::Alternative},
          TerminateGracefully{"Stopped after {tool} kept failing with {error}."}};
}

std::vector<RecoveryAction> flatten_script(const std::vector<RecoveryAction>& script, bool has_alternative,
                                           int retry_budget) {
  std::vector<RecoveryAction> out;
  int reissues = 0;
  for (const auto& a : script) {
    if (const auto* r = std::get_if<RetryWithBackoff>(&a)) {
      for (int i = 0; i < r->max_attempts && reissues < retry_budget; ++i, ++reissues) out.push_back(a);
      continue;
    }
    if (std::holds_alternative<SwitchTool>(a)) {
      if (has_alternative) {
        out.push_back(a);
        reissues = 0;
      }
      continue;
    }
    if (std::holds_alternative<TerminateGracefully>(a)) {
      out.push_back(a);
      break;
    }
    if (reissues < retry_budget) {
      out.push_back(a);
      ++reissues;
    }
  }
  return out;
}

std::unique_ptr<AgentPolicy> make_scripted_agent(std::string_view name) {
  if (name == "vanilla") return std::make_unique<VanillaPolicy>();
  if (name == "toolbench") return std::make_unique<ToolBenchPolicy>();
  if (name == "reflect") return std::make_unique<ReflectPolicy>();
  if (name == "critic") return std::make_unique<CriticPolicy>();
  if (name == "paladin") return std::make_unique<PaladinPolicy>();
  throw ConfigError("unknown agent '" + std::string(name) + "'");
}

std::vector<std::string> scripted_agent_names() {
  return {"vanilla", "toolbench", "reflect", "critic", "paladin"};
}

}  // namespace toolfault
