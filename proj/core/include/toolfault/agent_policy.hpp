#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "toolfault/action_grammar.hpp"
#include "toolfault/recovery_bank.hpp"
#include "toolfault/taxonomy.hpp"
#include "toolfault/tools.hpp"
#include "toolfault/trajectory.hpp"

namespace toolfault {

// Everything a policy may look at when choosing the next action. Policies
// keep no state between calls; whatever they need is re-derived from the
// trajectory so that decide() is a pure function of its inputs.
struct AgentContext {
  const Trajectory& trajectory;
  const std::optional<ErrorSignature>& last_error;
  const ToolRegistry& tools;
  const ExemplarBank* bank = nullptr;  // null disables retrieval
  const TaskPlan* plan = nullptr;
  std::uint64_t seed = 0;
  int retry_budget = 3;
};

class AgentPolicy {
 public:
  virtual ~AgentPolicy() = default;
  virtual std::string name() const = 0;
  // May throw ProtocolError (unparsable model output) or TransportError.
  virtual AgentAction decide(const AgentContext& context) const = 0;
};

}  // namespace toolfault
