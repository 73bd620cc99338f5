#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "toolfault/recovery_bank.hpp"

namespace toolfault {

// Assistant turns follow the ToolBench surface grammar:
//
//   [Recovery: ]Thought: [<tag>] <text>
//   Action: <tool name | Finish>
//   Action Input: <JSON object>
//
// Finish takes {"return_type": "give_answer" | "give_up_and_restart",
// "final_answer": <text>}. The bracketed tag names the recovery action and
// only appears on Recovery: turns.

struct ToolCall {
  std::string name;
  nlohmann::json arguments = nlohmann::json::object();

  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct CallAction {
  std::string thought;
  ToolCall call;
};

// A corrective step: the action taken plus the call it (re)issues.
struct RecoveryStep {
  RecoveryAction action;
  std::string thought;
  ToolCall call;
};

struct FinishAction {
  std::string thought;
  std::string answer;
};

// Ends the episode without an answer. `recovery` marks a scripted
// TerminateGracefully, which serializes as a Recovery: turn.
struct GiveUpAction {
  std::string thought;
  std::string report;
  bool recovery = false;
};

using AgentAction = std::variant<CallAction, RecoveryStep, FinishAction, GiveUpAction>;

std::string render_action(const AgentAction& action);

// Throws ProtocolError carrying `text` when the turn does not follow the
// grammar. Tags parse to the action's default parameters.
AgentAction parse_action(std::string_view text);

// Tag of a parsed Recovery: turn, if any.
std::optional<RecoveryTag> recovery_tag_of(const AgentAction& action);

// Default-parameter action for a tag.
RecoveryAction default_action(RecoveryTag tag);

}  // namespace toolfault
