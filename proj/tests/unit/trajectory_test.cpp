#include <gtest/gtest.h>

#include "toolfault/error.hpp"
#include "toolfault/trajectory.hpp"

using namespace toolfault;

namespace {

Trajectory sample() {
  Trajectory t;
  t.episode_id = "ep-0001";
  t.turns = {make_turn(Role::System, "You can call tools.", 0),
             make_turn(Role::User, "Weather in Oslo?", 0),
             make_turn(Role::Assistant, "Thought: x\nAction: get_weather\nAction Input: {}", 100),
             make_turn(Role::Function, R"({"error": "Rate limit exceeded", "status": 429})", 100),
             make_turn(Role::Assistant, "Recovery: Thought: [retry_with_backoff] wait\nAction: get_weather\nAction Input: {}", 1300),
             make_turn(Role::Function, R"({"city": "Oslo"})", 1300),
             make_turn(Role::Assistant, "Thought: done\nAction: Finish\nAction Input: {\"final_answer\": \"Oslo\"}", 1400)};
  t.plan.kind = "http_429";
  t.plan.turn_index = 1;
  t.plan.profile.retry_after_ms = 1200;
  t.plan.seed = 99;
  t.terminal = Terminal{TerminalKind::Finished, "Oslo"};
  t.injections = {{3, 1, "http_429"}};
  t.tool_calls = 2;
  return t;
}

}  // namespace

TEST(Trajectory, RecoveryFlagFollowsPrefix) {
  EXPECT_TRUE(make_turn(Role::Assistant, "Recovery: Thought: x", 0).is_recovery);
  EXPECT_FALSE(make_turn(Role::Assistant, "Thought: Recovery: x", 0).is_recovery);
  EXPECT_FALSE(make_turn(Role::Function, "Recovery: x", 0).is_recovery);
}

TEST(Trajectory, SerializeParseRoundTrip) {
  const Trajectory t = sample();
  EXPECT_NO_THROW(validate_structure(t));
  const std::string line = serialize_trajectory(t);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(parse_trajectory(line), t);
  EXPECT_EQ(t.assistant_turns(), 3);
  EXPECT_EQ(t.simulated_ms(), 1400);
}

TEST(Trajectory, MessagesUseChatShape) {
  const auto m = messages_json(sample().turns);
  ASSERT_EQ(m.size(), 7u);
  EXPECT_EQ(m[0]["role"], "system");
  EXPECT_EQ(m[3]["content"][0]["type"], "text");
}

TEST(Trajectory, StructureViolations) {
  Trajectory t = sample();
  t.turns[4].simulated_time_ms = 50;
  EXPECT_THROW(validate_structure(t), MalformedTrace);

  t = sample();
  t.turns[4].is_recovery = false;
  EXPECT_THROW(validate_structure(t), MalformedTrace);

  t = sample();
  std::swap(t.turns[0], t.turns[1]);
  EXPECT_THROW(validate_structure(t), MalformedTrace);

  t = sample();
  t.turns.insert(t.turns.begin() + 3, make_turn(Role::System, "again", 100));
  EXPECT_THROW(validate_structure(t), MalformedTrace);

  EXPECT_THROW((void)parse_trajectory("not json"), MalformedTrace);
  EXPECT_THROW((void)parse_trajectory(R"({"messages": 3})"), MalformedTrace);
}

TEST(Trajectory, InjectionPlanValidation) {
  InjectionPlan p;
  EXPECT_NO_THROW(validate(p));
  p.kind = "http_500";
  p.cascade = CascadeFault{"http_503", 1};
  EXPECT_THROW(validate(p), ConfigError);
  p.cascade = CascadeFault{"http_503", 2};
  EXPECT_NO_THROW(validate(p));
  p.kind = "http_999";
  EXPECT_THROW(validate(p), Error);
  p = {};
  p.turn_index = 0;
  p.kind = "http_500";
  EXPECT_THROW(validate(p), ConfigError);

  InjectionPlan q;
  q.kind = "timeout";
  q.profile = {2, 1500, std::nullopt};
  q.cascade = CascadeFault{"http_429", 3};
  const nlohmann::json j = q;
  EXPECT_EQ(j.get<InjectionPlan>(), q);
}
