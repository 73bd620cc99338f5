#include <gtest/gtest.h>

#include <tuple>

#include "toolfault/benchgen.hpp"
#include "toolfault/error.hpp"
#include "toolfault/rng.hpp"

using namespace toolfault;

namespace {

SuiteSpec spec_of(int n, Rational clean, std::uint64_t seed) {
  SuiteSpec s;
  s.n_episodes = n;
  s.clean_fraction = clean;
  s.master_seed = seed;
  return s;
}

std::map<ErrorClass, int> class_counts(const Suite& s) {
  std::map<ErrorClass, int> out;
  for (const auto& c : s.cards) {
    if (c.error_class) ++out[*c.error_class];
  }
  return out;
}

}  // namespace

TEST(Benchgen, SeventyFailureEpisodesGiveTenPerClass) {
  const Suite s = generate_suite(builtin_task_pool(), spec_of(70, Rational(0), 4));
  ASSERT_EQ(s.cards.size(), 70u);
  const auto counts = class_counts(s);
  ASSERT_EQ(counts.size(), 7u);
  for (const auto& [c, n] : counts) EXPECT_EQ(n, 10) << to_string(c);
}

TEST(Benchgen, CleanFractionSplit) {
  const Suite s = generate_suite(builtin_task_pool(), spec_of(100, Rational(1, 5), 9));
  int clean = 0;
  for (const auto& c : s.cards) {
    if (c.plan.clean()) {
      ++clean;
      EXPECT_FALSE(c.error_class.has_value());
      EXPECT_EQ(c.guidelines.expected_recovery, "none");
    }
  }
  EXPECT_EQ(clean, 20);
  EXPECT_EQ(s.manifest["clean"], 20);
  EXPECT_EQ(s.manifest["n_cards"], 100);
}

TEST(Benchgen, StandardSuiteApportionsByLargestRemainder) {
  const SuiteSpec spec = standard_desk_spec();
  EXPECT_EQ(spec.n_episodes, 200);
  EXPECT_EQ(spec.master_seed, kStandardSuiteSeed);
  const Suite s = generate_suite(builtin_task_pool(), spec);
  // 160 failures over 7 classes: 22 each, the 6 leftover go to the first six.
  const auto counts = class_counts(s);
  for (ErrorClass c : kAllErrorClasses) {
    EXPECT_EQ(counts.at(c), c == ErrorClass::ReentrantFailure ? 22 : 23) << to_string(c);
  }
}

TEST(Benchgen, WeightedDistribution) {
  SuiteSpec spec = spec_of(30, Rational(0), 2);
  spec.class_distribution = {{ErrorClass::ReentrantFailure, Rational(2)}, {ErrorClass::PartialExecution, Rational(1)}};
  const auto counts = class_counts(generate_suite(builtin_task_pool(), spec));
  EXPECT_EQ(counts.at(ErrorClass::ReentrantFailure), 20);
  EXPECT_EQ(counts.at(ErrorClass::PartialExecution), 10);
  EXPECT_EQ(counts.size(), 2u);
}

TEST(Benchgen, ByteDeterministicAndSeedSensitive) {
  const auto& pool = builtin_task_pool();
  const std::string a = suite_to_jsonl(generate_suite(pool, spec_of(70, Rational(1, 5), 13)));
  const std::string b = suite_to_jsonl(generate_suite(pool, spec_of(70, Rational(1, 5), 13)));
  const std::string c = suite_to_jsonl(generate_suite(pool, spec_of(70, Rational(1, 5), 14)));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Benchgen, CardsAreUniqueAndSeedsDerived) {
  const Suite s = generate_suite(builtin_task_pool(), spec_of(120, Rational(1, 5), 21));
  std::set<std::tuple<std::uint64_t, std::string, int>> seen;
  for (std::size_t i = 0; i < s.cards.size(); ++i) {
    const EpisodeCard& c = s.cards[i];
    EXPECT_EQ(c.plan.seed, mix_seed(21, i));
    EXPECT_EQ(c.task_hash, task_hash(c.task));
    EXPECT_EQ(c.config.retry_budget_per_error, 3);
    EXPECT_NO_THROW(validate(c.plan));
    const auto key = c.plan.clean() ? std::make_tuple(c.task_hash, std::string(), 0)
                                    : std::make_tuple(c.task_hash, *c.plan.kind, c.plan.turn_index);
    EXPECT_TRUE(seen.insert(key).second) << c.episode_id;
    if (c.plan.kind) {
      const FailureKind& k = Catalog::shipped().at(*c.plan.kind);
      EXPECT_EQ(*c.error_class, k.error_class);
      EXPECT_LE(c.plan.turn_index, static_cast<int>(c.task.plan.steps.size()));
      const bool terminal = k.disposition() == Disposition::Terminal;
      const auto& f = c.guidelines.forbidden;
      EXPECT_EQ(std::find(f.begin(), f.end(), "retry_terminal_failure") != f.end(), terminal);
      if (c.plan.profile.retry_after_ms) {
        EXPECT_TRUE(k.http_status == 429 || k.http_status == 503);
      }
    }
  }
}

TEST(Benchgen, PoolExhaustion) {
  const std::vector<Task> tiny(builtin_task_pool().begin(), builtin_task_pool().begin() + 2);
  try {
    (void)generate_suite(tiny, spec_of(10, Rational(1, 2), 1));
    FAIL() << "expected PoolExhausted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "PoolExhausted");
  }
  EXPECT_THROW((void)generate_suite({}, spec_of(1, Rational(0), 1)), Error);
}

TEST(Benchgen, GeneralizationSplitHidesKindsFromBank) {
  SuiteSpec spec = spec_of(30, Rational(0), 5);
  spec.held_out_kinds = {"http_503", "null_field"};
  const GeneralizationSplit split = generalization_split(builtin_task_pool(), spec);
  for (const auto& c : split.suite.cards) {
    ASSERT_TRUE(c.plan.kind.has_value());
    EXPECT_TRUE(spec.held_out_kinds.contains(*c.plan.kind));
    EXPECT_EQ(c.hidden_kinds, spec.held_out_kinds);
  }
  for (const auto& e : split.visible_bank.exemplars()) {
    EXPECT_FALSE(e.pattern.kind && spec.held_out_kinds.contains(*e.pattern.kind)) << e.id;
  }
  for (ErrorClass c : kAllErrorClasses) EXPECT_TRUE(split.visible_bank.covers(c));
}

TEST(Benchgen, HoldingOutAWholeClassIsRejected) {
  SuiteSpec spec = spec_of(10, Rational(0), 5);
  spec.held_out_kinds = {"http_401", "http_403", "http_407"};
  try {
    (void)generalization_split(builtin_task_pool(), spec);
    FAIL() << "expected HeldOutCoversClass";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "HeldOutCoversClass");
  }
}

TEST(Benchgen, EmptyHoldOutMatchesPlainSuite) {
  const SuiteSpec spec = spec_of(40, Rational(1, 5), 6);
  const GeneralizationSplit split = generalization_split(builtin_task_pool(), spec);
  EXPECT_EQ(suite_to_jsonl(split.suite), suite_to_jsonl(generate_suite(builtin_task_pool(), spec)));
  EXPECT_EQ(split.visible_bank.size(), ExemplarBank::shipped().size());
}

TEST(Benchgen, JsonlRoundTripAndErrors) {
  const Suite s = generate_suite(builtin_task_pool(), spec_of(25, Rational(1, 5), 3));
  EXPECT_EQ(parse_suite_jsonl(suite_to_jsonl(s)), s.cards);
  const std::string text = suite_to_jsonl(s);
  const std::string broken = text.substr(0, text.find('\n') + 1) + "{oops\n";
  try {
    (void)parse_suite_jsonl(broken);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Benchgen, SpecValidation) {
  EXPECT_THROW(spec_of(0, Rational(0), 1).validate(), ConfigError);
  EXPECT_THROW(spec_of(10, Rational(1), 1).validate(), ConfigError);
  SuiteSpec bad = spec_of(10, Rational(0), 1);
  bad.class_distribution = {{ErrorClass::ReentrantFailure, Rational(0)}};
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(parse_protocol("toolreflect"), Protocol::ToolReflect);
  EXPECT_THROW((void)parse_protocol("other"), ConfigError);
}
