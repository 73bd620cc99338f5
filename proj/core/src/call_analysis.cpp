#include "toolfault/call_analysis.hpp"

#include "toolfault/error.hpp"

namespace toolfault {

namespace {

bool same_capability(const ToolRegistry& tools, const std::string& a, const std::string& b) {
  if (a == b) return true;
  const ToolSpec* ta = tools.find(a);
  const ToolSpec* tb = tools.find(b);
  return ta != nullptr && tb != nullptr && !ta->capability.empty() && ta->capability == tb->capability;
}

int match_step(const TaskPlan& plan, const ToolRegistry& tools, const ToolCall& call,
               const std::vector<bool>& done) {
  int first = -1;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const TaskStep& s = plan.steps[i];
    if (s.arguments != call.arguments || !same_capability(tools, s.tool, call.name)) continue;
    if (!done[i]) return static_cast<int>(i);
    if (first < 0) first = static_cast<int>(i);
  }
  return first;
}

}  // namespace

CallView analyze_calls(const std::vector<Turn>& turns, const TaskPlan* plan, const ToolRegistry& tools,
                       const Catalog& catalog) {
  CallView view;
  std::vector<bool> done(plan != nullptr ? plan->steps.size() : 0, false);
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (turns[i].role != Role::Assistant) continue;
    AgentAction action;
    try {
      action = parse_action(turns[i].content);
    } catch (const ProtocolError&) {
      view.protocol_error_turns.push_back(i);
      continue;
    }
    if (std::holds_alternative<FinishAction>(action) || std::holds_alternative<GiveUpAction>(action)) {
      view.final_action = std::move(action);
      continue;
    }
    CallRecord rec;
    rec.assistant_turn = i;
    rec.recovery = std::holds_alternative<RecoveryStep>(action);
    rec.tag = recovery_tag_of(action);
    rec.call = rec.recovery ? std::get<RecoveryStep>(action).call : std::get<CallAction>(action).call;
    if (i + 1 < turns.size() && turns[i + 1].role == Role::Function) {
      rec.function_turn = i + 1;
      rec.failure = detect_failure(turns[i + 1].content,
                                   {rec.call.name, static_cast<int>(i + 1)}, catalog);
    }
    if (plan != nullptr) {
      rec.step = match_step(*plan, tools, rec.call, done);
      if (rec.step >= 0 && rec.function_turn && !rec.failure) done[static_cast<std::size_t>(rec.step)] = true;
    }
    view.calls.push_back(std::move(rec));
  }
  return view;
}

bool step_completed(const CallView& view, int step) {
  for (const auto& c : view.calls) {
    if (c.step == step && c.function_turn && !c.failure) return true;
  }
  return false;
}

int next_open_step(const CallView& view, const TaskPlan& plan) {
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    if (!step_completed(view, static_cast<int>(i))) return static_cast<int>(i);
  }
  return static_cast<int>(plan.steps.size());
}

std::vector<const CallRecord*> error_event(const CallView& view, int step) {
  std::vector<const CallRecord*> out;
  bool started = false;
  for (const auto& c : view.calls) {
    if (c.step != step) continue;
    if (!started && !c.failure) continue;
    started = true;
    out.push_back(&c);
  }
  return out;
}

}  // namespace toolfault
