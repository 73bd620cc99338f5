#include <gtest/gtest.h>

#include <functional>

#include "toolfault/agents.hpp"
#include "toolfault/error.hpp"
#include "toolfault/simulator.hpp"
#include "toolfault/task_pool.hpp"

using namespace toolfault;

namespace {

// Test double: the action depends only on the number of assistant turns so far.
class StubAgent : public AgentPolicy {
 public:
  explicit StubAgent(std::function<AgentAction(const AgentContext&, int)> f) : f_(std::move(f)) {}
  std::string name() const override { return "stub"; }
  AgentAction decide(const AgentContext& ctx) const override { return f_(ctx, ctx.trajectory.assistant_turns()); }

 private:
  std::function<AgentAction(const AgentContext&, int)> f_;
};

const Task& task() { return builtin_task_pool().front(); }

ToolCall first_call() {
  const TaskStep& s = task().plan.steps.front();
  return {s.tool, s.arguments};
}

std::string normal_response() {
  const ToolCall c = first_call();
  return task().tools.find(c.name)->scripted_responses.at(canonical_call_key(c.name, c.arguments));
}

InjectionPlan plan_for(const std::string& kind, std::uint64_t seed = 5) {
  InjectionPlan p;
  p.kind = kind;
  p.manifestation = Catalog::shipped().at(kind).default_manifestation;
  p.seed = seed;
  return p;
}

Trajectory run(const AgentPolicy& agent, const InjectionPlan& plan, SimConfig cfg = {}) {
  EpisodeOptions o;
  o.episode_id = "ep-test";
  o.task = &task().plan;
  o.bank = &ExemplarBank::shipped();
  return run_episode(task().prompt, task().tools, agent, plan, cfg, o);
}

}  // namespace

TEST(Backoff, FullJitterStaysWithinCappedExponentialCeiling) {
  const RetryWithBackoff policy{5, 500, 8000, true};
  for (int attempt = 1; attempt <= 8; ++attempt) {
    std::int64_t ceiling = 500;
    for (int i = 1; i < attempt; ++i) ceiling = std::min<std::int64_t>(ceiling * 2, 8000);
    std::int64_t max_seen = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const auto d = backoff_delay(attempt, policy, std::nullopt, seed);
      ASSERT_GE(d, 0);
      ASSERT_LE(d, ceiling);
      max_seen = std::max(max_seen, d);
    }
    EXPECT_GT(max_seen, ceiling / 2) << "attempt " << attempt;
  }
}

TEST(Backoff, RetryAfterIsHonouredExactly) {
  const RetryWithBackoff policy{3, 500, 8000, true};
  EXPECT_EQ(backoff_delay(1, policy, 1200, 17), 1200);
  EXPECT_EQ(advance_backoff(5000, 2, policy, 1200, 17), 6200);
  RetryWithBackoff ignore = policy;
  ignore.respect_retry_after = false;
  EXPECT_LE(backoff_delay(1, ignore, 1200, 17), 500);
  EXPECT_THROW((void)advance_backoff(0, 0, policy, std::nullopt, 1), ConfigError);
}

TEST(Backoff, SameSeedSameDelay) {
  const RetryWithBackoff policy{};
  EXPECT_EQ(backoff_delay(3, policy, std::nullopt, 99), backoff_delay(3, policy, std::nullopt, 99));
}

TEST(Simulator, CleanEpisodeFinishesWithoutInjections) {
  PaladinPolicy paladin;
  const Trajectory t = run(paladin, InjectionPlan{});
  ASSERT_TRUE(t.terminal.has_value());
  EXPECT_EQ(t.terminal->kind, TerminalKind::Finished);
  EXPECT_TRUE(t.injections.empty());
  EXPECT_EQ(t.tool_calls, static_cast<int>(task().plan.steps.size()));
  EXPECT_NO_THROW(validate_structure(t));
}

TEST(Simulator, InjectedFailureIsObservedAsPlanned) {
  PaladinPolicy paladin;
  for (const auto& k : Catalog::shipped().kinds()) {
    if (!k.injectable) continue;
    const Trajectory t = run(paladin, plan_for(k.id));
    ASSERT_EQ(t.injections.size(), 1u) << k.id;
    EXPECT_EQ(t.injections[0].kind, k.id);
    EXPECT_EQ(t.injections[0].call_index, 1);
    const Turn& fn = t.turns.at(t.injections[0].turn);
    EXPECT_EQ(fn.role, Role::Function);
    const auto sig = detect_failure(fn.content, {first_call().name, 0});
    ASSERT_TRUE(sig.has_value()) << k.id;
    EXPECT_EQ(sig->kind, k.id);
    EXPECT_NO_THROW(validate_structure(t));
  }
}

TEST(Simulator, DeterministicForSamePlanAndSeed) {
  PaladinPolicy paladin;
  ReflectPolicy reflect;
  for (const std::string kind : {"http_429", "http_503", "timeout", "http_404"}) {
    EXPECT_EQ(run(paladin, plan_for(kind, 31)), run(paladin, plan_for(kind, 31)));
    EXPECT_EQ(run(reflect, plan_for(kind, 31)), run(reflect, plan_for(kind, 31)));
  }
}

TEST(Simulator, ClockIsTurnCostPlusRecoveryDelay) {
  // 429 with Retry-After 1200: the retry turn lands exactly 100 + 1200 ms
  // after the failed call.
  InjectionPlan p = plan_for("http_429");
  p.profile.retry_after_ms = 1200;
  const StubAgent agent([](const AgentContext&, int n) -> AgentAction {
    if (n == 0) return CallAction{"call", first_call()};
    if (n == 1) return RecoveryStep{RetryWithBackoff{}, "retry", first_call()};
    return FinishAction{"done", "ok"};
  });
  const Trajectory t = run(agent, p);
  ASSERT_GE(t.turns.size(), 6u);
  EXPECT_EQ(t.turns[2].simulated_time_ms, 100);
  EXPECT_EQ(t.turns[4].simulated_time_ms, 100 + 100 + 1200);
  EXPECT_EQ(t.turns[5].content, normal_response());
  EXPECT_EQ(t.simulated_ms(), 1400 + 100);
}

TEST(Simulator, TransientFaultHoldsForPersistenceAndWindow) {
  InjectionPlan p = plan_for("http_503");
  p.profile = {2, 3000, std::nullopt};
  const StubAgent agent([](const AgentContext& ctx, int) -> AgentAction {
    if (ctx.trajectory.assistant_turns() == 0) return CallAction{"call", first_call()};
    if (ctx.last_error) return RecoveryStep{WaitUntilHealthy{1000, 16000}, "wait", first_call()};
    return FinishAction{"done", "ok"};
  });
  const Trajectory t = run(agent, p);
  // The first wait polls to the end of the 3000 ms window, but the fault
  // needs a second failed serve; the next wait is a single poll.
  ASSERT_EQ(t.terminal->kind, TerminalKind::Finished);
  EXPECT_EQ(t.tool_calls, 3);
  EXPECT_EQ(t.turns[4].simulated_time_ms - t.turns[3].simulated_time_ms, 100 + 3000);
  EXPECT_TRUE(detect_failure(t.turns[5].content, {}).has_value());
  EXPECT_EQ(t.turns[6].simulated_time_ms - t.turns[5].simulated_time_ms, 100 + 1000);
  EXPECT_FALSE(detect_failure(t.turns[7].content, {}).has_value());
}

TEST(Simulator, RetryBudgetAbandonsEpisode) {
  InjectionPlan p = plan_for("http_401");
  SimConfig cfg;
  cfg.retry_budget_per_error = 2;
  const StubAgent agent([](const AgentContext&, int n) -> AgentAction {
    if (n == 0) return CallAction{"call", first_call()};
    return RecoveryStep{RetryWithBackoff{}, "again", first_call()};
  });
  const Trajectory t = run(agent, p, cfg);
  EXPECT_EQ(t.terminal->kind, TerminalKind::Abandoned);
  EXPECT_EQ(t.tool_calls, 3);  // first call plus two reissues
}

TEST(Simulator, TerminalFailureIgnoresRetries) {
  const StubAgent agent([](const AgentContext& ctx, int n) -> AgentAction {
    if (n == 0) return CallAction{"call", first_call()};
    if (n <= 3) return RecoveryStep{RetryWithBackoff{}, "again", first_call()};
    return GiveUpAction{"stop", render_report("", first_call().name, *ctx.last_error), true};
  });
  const Trajectory t = run(agent, plan_for("http_403"));
  EXPECT_EQ(t.terminal->kind, TerminalKind::GracefulFailure);
  for (std::size_t i = 3; i < t.turns.size(); i += 2) {
    EXPECT_NE(t.turns[i].content.find("403"), std::string::npos) << i;
  }
}

TEST(Simulator, ManifestationsRenderAsDescribed) {
  const FailureKind& k = Catalog::shipped().at("http_500");
  const std::string normal = normal_response();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::string m = render_failure(k, Manifestation::MalformedOutput, normal, seed);
    ASSERT_LT(m.size(), normal.size());
    ASSERT_GT(m.size(), 0u);
    EXPECT_EQ(normal.compare(0, m.size(), m), 0);
    EXPECT_TRUE(nlohmann::json::parse(m, nullptr, false).is_discarded());
  }
  EXPECT_EQ(render_failure(k, Manifestation::SilentFailure, normal, 1), "");
  const auto partial = nlohmann::json::parse(render_failure(k, Manifestation::PartialOutput, normal, 1));
  EXPECT_TRUE(partial.at("incomplete").get<bool>());
  EXPECT_EQ(partial.size(), nlohmann::json::parse(normal).size() / 2 + 1);
  EXPECT_EQ(render_failure(k, Manifestation::ErrorPayload, normal, 1, 700),
            R"({"error": "Unexpected server error", "status": 500, "retry_after_ms": 700})");
}

TEST(Simulator, NaturalFailuresFromBadCalls) {
  const StubAgent agent([](const AgentContext&, int n) -> AgentAction {
    if (n == 0) return CallAction{"call", {"no_such_tool", {{"x", 1}}}};
    if (n == 1) return CallAction{"call", {first_call().name, nlohmann::json::object()}};
    return FinishAction{"done", ""};
  });
  const Trajectory t = run(agent, InjectionPlan{});
  EXPECT_EQ(classify_raw_failure(t.turns[3].content, {}).kind, "tool_not_found");
  EXPECT_EQ(classify_raw_failure(t.turns[5].content, {}).kind, "missing_argument");
  EXPECT_TRUE(t.injections.empty());
}

TEST(Simulator, ProtocolErrorsAreLoggedThenAbandon) {
  const StubAgent agent([](const AgentContext&, int) -> AgentAction {
    (void)parse_action("The weather is probably fine.");
    return FinishAction{};
  });
  const Trajectory t = run(agent, InjectionPlan{});
  EXPECT_EQ(t.protocol_errors, 2);
  EXPECT_EQ(t.terminal->kind, TerminalKind::Abandoned);
  EXPECT_EQ(t.turns[2].content, "The weather is probably fine.");
  EXPECT_EQ(classify_raw_failure(t.turns[3].content, {}).kind, "protocol_error");
}

TEST(Simulator, StepBudgetExhausted) {
  SimConfig cfg;
  cfg.max_steps = 5;
  const StubAgent agent([](const AgentContext&, int) -> AgentAction { return CallAction{"call", first_call()}; });
  const Trajectory t = run(agent, InjectionPlan{}, cfg);
  EXPECT_EQ(t.terminal->kind, TerminalKind::StepBudgetExhausted);
  EXPECT_EQ(t.assistant_turns(), 5);
}

TEST(Simulator, ConfigValidation) {
  PaladinPolicy paladin;
  SimConfig cfg;
  cfg.max_steps = 2;
  EXPECT_THROW(run(paladin, InjectionPlan{}, cfg), ConfigError);
  cfg = {};
  cfg.retry_budget_per_error = 5;
  EXPECT_THROW(run(paladin, InjectionPlan{}, cfg), ConfigError);
  InjectionPlan late = plan_for("http_500");
  late.turn_index = 30;
  EXPECT_THROW(run(paladin, late), ConfigError);
  EXPECT_THROW(run_episode("x", ToolRegistry{}, paladin, InjectionPlan{}, SimConfig{}), ConfigError);
}
