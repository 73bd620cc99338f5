#include "toolfault/harness.hpp"

#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "toolfault/error.hpp"
#include "toolfault/simulator.hpp"

namespace toolfault {

SuiteRun run_suite(const std::vector<EpisodeCard>& cards, const AgentPolicy& agent, const RunOptions& options) {
  if (options.jobs < 1) throw ConfigError("jobs must be >= 1");
  const Catalog& catalog = options.catalog != nullptr ? *options.catalog : Catalog::shipped();

  // Banks are built up front so workers only read shared state.
  std::map<std::set<std::string>, ExemplarBank> hidden_banks;
  if (options.bank != nullptr && options.retrieval) {
    for (const auto& c : cards) {
      if (!c.hidden_kinds.empty() && !hidden_banks.contains(c.hidden_kinds)) {
        hidden_banks.emplace(c.hidden_kinds, options.bank->without_kinds(c.hidden_kinds));
      }
    }
  }
  const auto bank_for = [&](const EpisodeCard& c) -> const ExemplarBank* {
    if (options.bank == nullptr || !options.retrieval) return nullptr;
    if (c.hidden_kinds.empty()) return options.bank;
    return &hidden_banks.at(c.hidden_kinds);
  };

  SuiteRun run;
  run.trajectories.resize(cards.size());
  run.grades.resize(cards.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const auto worker = [&] {
    for (std::size_t i = next++; i < cards.size(); i = next++) {
      try {
        const EpisodeCard& card = cards[i];
        SimConfig config = card.config;
        if (options.seed != 0) config.rng_seed = options.seed;
        EpisodeOptions eo;
        eo.episode_id = card.episode_id;
        eo.bank = bank_for(card);
        eo.task = &card.task.plan;
        eo.catalog = &catalog;
        run.trajectories[i] = run_episode(card.task.prompt, card.task.tools, agent, card.plan, config, eo);
        run.grades[i] = grade_episode(run.trajectories[i], card, catalog);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = cards.size();
      }
    }
  };

  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(options.jobs), cards.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return run;
}

}  // namespace toolfault
