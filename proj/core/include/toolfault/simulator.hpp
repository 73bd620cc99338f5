#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "toolfault/agent_policy.hpp"
#include "toolfault/recovery_bank.hpp"
#include "toolfault/taxonomy.hpp"
#include "toolfault/tools.hpp"
#include "toolfault/trajectory.hpp"

namespace toolfault {

struct SimConfig {
  int max_steps = 20;
  int retry_budget_per_error = 3;
  std::int64_t turn_cost_ms = 100;
  std::uint64_t rng_seed = 0;

  // Throws ConfigError: max_steps >= 3, retry budget in [1, 4].
  void validate() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

// Text of a failed call. ErrorPayload: the catalog example body (with a
// retry_after_ms field when given). MalformedOutput: a strict proper prefix
// of `normal_response`. SilentFailure: empty. PartialOutput: the first half
// of the response's top-level fields plus "incomplete": true.
std::string render_failure(const FailureKind& kind, Manifestation manifestation,
                           std::string_view normal_response, std::uint64_t seed,
                           std::optional<std::int64_t> retry_after_ms = std::nullopt);

// Same, using the tool's first scripted response as the normal response.
std::string render_failure(const FailureKind& kind, Manifestation manifestation, const ToolSpec& tool,
                           std::uint64_t seed);

// Full-jitter delay: Retry-After when present and respected, otherwise
// uniform [0, min(cap, base * 2^(attempt-1))].
std::int64_t backoff_delay(int attempt, const RetryWithBackoff& policy,
                           std::optional<std::int64_t> retry_after_ms, std::uint64_t seed);

std::int64_t advance_backoff(std::int64_t clock_ms, int attempt, const RetryWithBackoff& policy,
                             std::optional<std::int64_t> retry_after_ms, std::uint64_t seed);

std::string system_prompt(const ToolRegistry& tools);

struct EpisodeOptions {
  std::string episode_id;
  const ExemplarBank* bank = nullptr;
  const TaskPlan* task = nullptr;
  const Catalog* catalog = nullptr;  // defaults to the shipped catalog
};

Trajectory run_episode(std::string_view prompt, const ToolRegistry& tools, const AgentPolicy& agent,
                       const InjectionPlan& plan, const SimConfig& config,
                       const EpisodeOptions& options = {});

}  // namespace toolfault
