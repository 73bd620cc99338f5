#pragma once

#include <optional>
#include <vector>

#include "toolfault/action_grammar.hpp"
#include "toolfault/taxonomy.hpp"
#include "toolfault/tools.hpp"
#include "toolfault/trajectory.hpp"

namespace toolfault {

// One tool call and its served response, reconstructed from turn text.
// Agents and the grader share this view so that they agree on which calls
// belong to which task step.
struct CallRecord {
  std::size_t assistant_turn = 0;
  std::optional<std::size_t> function_turn;
  ToolCall call;
  bool recovery = false;
  std::optional<RecoveryTag> tag;
  std::optional<ErrorSignature> failure;
  int step = -1;  // index into TaskPlan::steps, -1 when unmatched
};

struct CallView {
  std::vector<CallRecord> calls;
  std::vector<std::size_t> protocol_error_turns;  // assistant turns that failed to parse
  std::optional<AgentAction> final_action;        // Finish or GiveUp, if reached
};

// Steps match on equal arguments and either the step's tool or one sharing
// its capability. Repeated steps resolve to the first one not yet done.
CallView analyze_calls(const std::vector<Turn>& turns, const TaskPlan* plan, const ToolRegistry& tools,
                       const Catalog& catalog = Catalog::shipped());

bool step_completed(const CallView& view, int step);

// First plan step without a successful call; plan size when all are done.
int next_open_step(const CallView& view, const TaskPlan& plan);

// Calls on `step` from its earliest failure on, i.e. the current error event.
// Empty when the step has not failed.
std::vector<const CallRecord*> error_event(const CallView& view, int step);

}  // namespace toolfault
