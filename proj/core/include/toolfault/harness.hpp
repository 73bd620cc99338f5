#pragma once

#include <cstdint>
#include <vector>

#include "toolfault/agent_policy.hpp"
#include "toolfault/benchgen.hpp"
#include "toolfault/metrics.hpp"
#include "toolfault/recovery_bank.hpp"
#include "toolfault/trajectory.hpp"

namespace toolfault {

struct RunOptions {
  // Null or retrieval disabled: the agent gets no bank. Cards with hidden
  // kinds get this bank minus those kinds.
  const ExemplarBank* bank = nullptr;
  bool retrieval = true;
  int jobs = 1;
  // Non-zero overrides each card's SimConfig::rng_seed.
  std::uint64_t seed = 0;
  const Catalog* catalog = nullptr;
};

struct SuiteRun {
  std::vector<Trajectory> trajectories;  // in card order
  std::vector<EpisodeGrade> grades;      // in card order
};

// Runs and grades every card on up to `jobs` threads. Results are indexed
// by card, so they do not depend on scheduling. The first exception thrown
// by any episode is rethrown after all workers stop.
SuiteRun run_suite(const std::vector<EpisodeCard>& cards, const AgentPolicy& agent, const RunOptions& options = {});

}  // namespace toolfault
