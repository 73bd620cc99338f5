#include <benchmark/benchmark.h>

#include "toolfault/agents.hpp"
#include "toolfault/benchgen.hpp"
#include "toolfault/harness.hpp"
#include "toolfault/metrics.hpp"
#include "toolfault/rng.hpp"

using namespace toolfault;

namespace {

std::vector<EpisodeGrade> synthetic_grades(std::size_t n) {
  Rng rng(5);
  std::vector<EpisodeGrade> out(n);
  for (auto& g : out) {
    g.episode_id = "b";
    g.failures_encountered = static_cast<int>(rng.below(3));
    g.failures_recovered = g.failures_encountered == 0 ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(g.failures_encountered) + 1));
    g.task_success = rng.bernoulli(0.6);
    g.steps_taken = 2 + static_cast<int>(rng.below(8));
  }
  return out;
}

void BM_Retrieve(benchmark::State& state) {
  const ExemplarBank& bank = ExemplarBank::shipped();
  const ErrorSignature sig =
      classify_raw_failure(R"({"error": "Service unavailable due to overload or maintenance", "status": 503})", {"t", 3});
  for (auto _ : state) benchmark::DoNotOptimize(&retrieve(bank, sig));
}
BENCHMARK(BM_Retrieve);

void BM_RunEpisode(benchmark::State& state) {
  const Task& task = builtin_task_pool().front();
  InjectionPlan plan;
  plan.kind = "http_429";
  plan.profile.persistence = 2;
  EpisodeOptions o;
  o.task = &task.plan;
  o.bank = &ExemplarBank::shipped();
  const PaladinPolicy paladin;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_episode(task.prompt, task.tools, paladin, plan, SimConfig{}, o));
  }
}
BENCHMARK(BM_RunEpisode);

void BM_StandardSuite(benchmark::State& state) {
  const Suite suite = generate_suite(builtin_task_pool(), standard_desk_spec());
  const PaladinPolicy paladin;
  for (auto _ : state) benchmark::DoNotOptimize(run_suite(suite.cards, paladin, {&ExemplarBank::shipped()}));
}
BENCHMARK(BM_StandardSuite)->Unit(benchmark::kMillisecond);

void BM_Aggregate(benchmark::State& state) {
  const auto grades = synthetic_grades(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(grades));
}
BENCHMARK(BM_Aggregate)->Arg(200)->Arg(2000);

void BM_Bootstrap(benchmark::State& state) {
  const auto grades = synthetic_grades(200);
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_ci(grades, Metric::RR, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_Bootstrap)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

// The packaged benchmark_main archive carries LTO bytecode from another
// compiler build, so main is defined here.
BENCHMARK_MAIN();
