#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "toolfault/agent_policy.hpp"

namespace toolfault {

// Scripted policies need a task plan in the context; they throw ConfigError
// without one.

// Never recovers. On an error it claims success with probability
// `hallucination_p` (a Finish naming the failed step's fields), else gives up.
class VanillaPolicy : public AgentPolicy {
 public:
  explicit VanillaPolicy(double hallucination_p = 0.5) : p_(hallucination_p) {}
  std::string name() const override { return "vanilla"; }
  AgentAction decide(const AgentContext& context) const override;

 private:
  double p_;
};

// Vanilla with zero hallucination: always gives up on an error.
class ToolBenchPolicy : public VanillaPolicy {
 public:
  ToolBenchPolicy() : VanillaPolicy(0.0) {}
  std::string name() const override { return "toolbench"; }
};

// Error-agnostic local retries: two immediate retries, a third with
// reformatted arguments, then give up. Never switches tools.
class ReflectPolicy : public AgentPolicy {
 public:
  std::string name() const override { return "reflect"; }
  AgentAction decide(const AgentContext& context) const override;
};

// With probability p per error event, consults the bank (top-k) and runs the
// most applicable script, capped at three recovery attempts; otherwise
// behaves like ReflectPolicy.
class CriticPolicy : public AgentPolicy {
 public:
  explicit CriticPolicy(double p = 0.7, std::size_t k = 3) : p_(p), k_(k) {}
  std::string name() const override { return "critic"; }
  AgentAction decide(const AgentContext& context) const override;

 private:
  double p_;
  std::size_t k_;
};

// Whether the critic consults the bank for the error event whose first
// failure sits at `error_turn`.
bool critic_oracle_access(std::uint64_t seed, std::size_t error_turn, double p = 0.7);

// Retrieves the nearest exemplar (k = 1) and runs its script in order. When
// the script runs out without success it switches to an alternative tool if
// one exists, else terminates. Without a bank it runs the generic chain
// retry -> switch -> terminate.
class PaladinPolicy : public AgentPolicy {
 public:
  std::string name() const override { return "paladin"; }
  AgentAction decide(const AgentContext& context) const override;
};

// Script used when retrieval is disabled.
std::vector<RecoveryAction> generic_recovery_chain();

// One entry per recovery turn: retries expand to one entry per attempt,
// switches are dropped when the tool has no alternative, and reissues beyond
// `retry_budget` consecutive calls are dropped.
std::vector<RecoveryAction> flatten_script(const std::vector<RecoveryAction>& script,
                                           bool has_alternative, int retry_budget);

// Substitutes {tool} and {error} ("kind (message)") in a termination report;
// an empty template gets a default one.
std::string render_report(std::string report, std::string_view tool, const ErrorSignature& sig);

// "key: value; ..." over a JSON object response; other text is returned as is.
std::string answer_from_response(std::string_view body);

// "vanilla", "toolbench", "reflect", "critic", "paladin". Throws ConfigError.
std::unique_ptr<AgentPolicy> make_scripted_agent(std::string_view name);

std::vector<std::string> scripted_agent_names();

}  // namespace toolfault
