#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "toolfault/agents.hpp"
#include "toolfault/error.hpp"
#include "toolfault/metrics.hpp"
#include "toolfault/rng.hpp"

using namespace toolfault;

namespace {

EpisodeGrade grade(bool success, int enc, int rec, bool halluc, int steps) {
  EpisodeGrade g;
  g.episode_id = "ep";
  g.task_success = success;
  g.failures_encountered = enc;
  g.failures_recovered = rec;
  g.hallucinated_success = halluc;
  g.steps_taken = steps;
  return g;
}

std::vector<EpisodeGrade> random_grades(std::mt19937_64& gen, int n) {
  std::vector<EpisodeGrade> out;
  for (int i = 0; i < n; ++i) {
    const int enc = static_cast<int>(gen() % 3);
    const int rec = enc == 0 ? 0 : static_cast<int>(gen() % static_cast<unsigned>(enc + 1));
    const bool success = gen() % 2 == 0;
    const bool halluc = enc > rec && !success && gen() % 2 == 0;
    out.push_back(grade(success, enc, rec, halluc, 2 + static_cast<int>(gen() % 9)));
  }
  return out;
}

EpisodeCard card_for(const std::string& kind, int persistence = 1) {
  EpisodeCard c;
  c.episode_id = "ep-0000";
  c.task = builtin_task_pool().front();
  c.task_hash = task_hash(c.task);
  if (!kind.empty()) {
    c.plan.kind = kind;
    c.plan.profile.persistence = persistence;
    c.error_class = Catalog::shipped().at(kind).error_class;
  }
  c.plan.seed = 12;
  return c;
}

EpisodeGrade run_and_grade(const AgentPolicy& agent, const EpisodeCard& card) {
  EpisodeOptions o;
  o.episode_id = card.episode_id;
  o.task = &card.task.plan;
  o.bank = &ExemplarBank::shipped();
  return grade_episode(run_episode(card.task.prompt, card.task.tools, agent, card.plan, card.config, o), card);
}

}  // namespace

TEST(Metrics, HandWorkedExample) {
  const std::vector<EpisodeGrade> g = {grade(true, 1, 1, false, 4), grade(false, 2, 1, true, 6),
                                       grade(true, 0, 0, false, 3), grade(false, 1, 0, false, 7)};
  EXPECT_EQ(metric_value(g, Metric::TSR), Rational(1, 2));
  EXPECT_EQ(metric_value(g, Metric::RR), Rational(2, 4));
  EXPECT_EQ(metric_value(g, Metric::CSR), Rational(3, 4));
  EXPECT_EQ(metric_value(g, Metric::ES), Rational(4, 20));
  const MetricsReport r = aggregate(g, Rational(1, 2));
  EXPECT_EQ(r.composite, Rational(1, 2) - Rational(1, 2) * Rational(1, 4));
}

TEST(Metrics, NotApplicableWithoutFailures) {
  const std::vector<EpisodeGrade> g = {grade(true, 0, 0, false, 3), grade(false, 0, 0, false, 5)};
  EXPECT_FALSE(metric_value(g, Metric::RR).has_value());
  EXPECT_FALSE(metric_value(g, Metric::CSR).has_value());
  const MetricsReport r = aggregate(g);
  EXPECT_EQ(r.composite, Rational(1, 2));
  EXPECT_TRUE(std::isnan(bootstrap_ci(g, Metric::RR, 50).lo));
}

TEST(Metrics, EmptySuiteThrows) {
  try {
    (void)aggregate({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "EmptySuite");
  }
  EXPECT_THROW((void)bootstrap_ci({}, Metric::TSR), Error);
}

// Counting oracle over random grade sets.
TEST(Metrics, MatchesBruteForceCounts) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = random_grades(gen, 1 + static_cast<int>(gen() % 40));
    long succ = 0, enc = 0, rec = 0, hal = 0, steps = 0;
    for (const auto& x : g) {
      succ += x.task_success;
      enc += x.failures_encountered;
      rec += x.failures_recovered;
      hal += x.hallucinated_success;
      steps += x.steps_taken;
    }
    const auto n = static_cast<long>(g.size());
    EXPECT_EQ(metric_value(g, Metric::TSR), Rational(succ, n));
    EXPECT_EQ(metric_value(g, Metric::ES), Rational(n, steps));
    if (enc == 0) {
      EXPECT_FALSE(metric_value(g, Metric::RR));
    } else {
      EXPECT_EQ(metric_value(g, Metric::RR), Rational(rec, enc));
      EXPECT_EQ(metric_value(g, Metric::CSR), Rational(enc - hal, enc));
    }
  }
}

TEST(Metrics, MonotoneInEpisodeOutcomes) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 200; ++trial) {
    auto g = random_grades(gen, 20);
    const auto before = aggregate(g);
    for (auto& x : g) {
      if (x.failures_recovered < x.failures_encountered) {
        ++x.failures_recovered;
        break;
      }
    }
    for (auto& x : g) x.hallucinated_success = false;
    const auto after = aggregate(g);
    if (before.rr) EXPECT_GE(*after.rr, *before.rr);
    if (before.csr) EXPECT_GE(*after.csr, *before.csr);
    EXPECT_GE(after.composite, before.composite);
  }
}

TEST(Metrics, PerClassBreakdown) {
  std::vector<EpisodeGrade> g = {grade(true, 1, 1, false, 4), grade(false, 1, 0, false, 4), grade(true, 0, 0, false, 3)};
  g[0].error_class = ErrorClass::ReentrantFailure;
  g[1].error_class = ErrorClass::ReentrantFailure;
  const auto r = aggregate(g);
  ASSERT_EQ(r.per_class.size(), 1u);
  const auto& b = r.per_class.at(ErrorClass::ReentrantFailure);
  EXPECT_EQ(b.episodes, 2);
  EXPECT_EQ(b.tsr, Rational(1, 2));
  EXPECT_EQ(b.rr, Rational(1, 2));
}

// Independent percentile bootstrap with a different generator; the two must
// agree to within sampling noise.
TEST(Metrics, BootstrapAgreesWithIndependentOracle) {
  std::mt19937_64 gen(21);
  const auto g = random_grades(gen, 150);
  for (Metric m : {Metric::TSR, Metric::RR, Metric::CSR}) {
    const ConfidenceInterval ci = bootstrap_ci(g, m, 20000, 0.95, 4);
    std::mt19937_64 other(999);
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
    std::vector<double> stats;
    std::vector<EpisodeGrade> sample(g.size());
    for (int b = 0; b < 20000; ++b) {
      for (auto& s : sample) s = g[pick(other)];
      if (auto v = metric_value(sample, m)) stats.push_back(v->to_double());
    }
    std::sort(stats.begin(), stats.end());
    const double lo = stats[static_cast<std::size_t>(0.025 * static_cast<double>(stats.size()))];
    const double hi = stats[static_cast<std::size_t>(0.975 * static_cast<double>(stats.size()))];
    EXPECT_NEAR(ci.lo, lo, 0.0075) << to_string(m);
    EXPECT_NEAR(ci.hi, hi, 0.0075) << to_string(m);
    EXPECT_LT(ci.lo, ci.hi);
  }
  EXPECT_EQ(bootstrap_ci(g, Metric::TSR, 500, 0.95, 3).lo, bootstrap_ci(g, Metric::TSR, 500, 0.95, 3).lo);
}

TEST(Metrics, PearsonMatchesClosedForm) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(30), y(30);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = nd(gen);
      y[i] = 0.6 * x[i] + nd(gen);
    }
    // Single-pass formula, algebraically equal to the centred one.
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      syy += y[i] * y[i];
      sxy += x[i] * y[i];
    }
    const double r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    EXPECT_NEAR(pearson(x, y), r, 1e-9);
  }
  EXPECT_DOUBLE_EQ(pearson({1, 2, 3}, {2, 4, 6}), 1.0);
  EXPECT_DOUBLE_EQ(pearson({1, 2, 3}, {3, 2, 1}), -1.0);
  EXPECT_THROW((void)pearson({1, 1, 1}, {1, 2, 3}), ConfigError);
  EXPECT_THROW((void)pearson({1}, {1}), ConfigError);
  EXPECT_THROW((void)pearson({1, 2}, {1, 2, 3}), ConfigError);
}

TEST(Metrics, CorrelationsOmitConstantSeries) {
  const std::vector<EpisodeGrade> g = {grade(true, 0, 0, false, 3), grade(false, 1, 0, false, 9),
                                       grade(true, 1, 1, false, 5)};
  const auto c = grade_correlations(g);
  EXPECT_TRUE(c.contains("success~recovery"));
  EXPECT_TRUE(c.contains("success~steps"));
  EXPECT_FALSE(c.contains("success~no_hallucination"));
}

TEST(Metrics, ReportIntervalsContainPoints) {
  std::mt19937_64 gen(2);
  const auto g = random_grades(gen, 60);
  const MetricsReport r = build_report(g, {Rational(1), 300, 0.95, 17});
  for (Metric m : kAllMetrics) {
    const double point = metric_value(g, m)->to_double();
    EXPECT_LE(r.ci.at(m).lo, point);
    EXPECT_GE(r.ci.at(m).hi, point);
  }
  const auto j = report_to_json(r);
  EXPECT_EQ(j["n_episodes"], 60);
  EXPECT_EQ(j["tsr"]["exact"], r.tsr.to_string());
}

TEST(Metrics, CsvLayout) {
  const std::vector<EpisodeGrade> g = {grade(true, 0, 0, false, 4), grade(true, 0, 0, false, 4)};
  const std::string csv = report_to_csv(build_report(g, {Rational(1), 50, 0.95, 1}), "s", "a");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "suite,agent,metric,point,ci_lo,ci_hi");
  EXPECT_NE(csv.find("s,a,tsr,1.000000,1.000000,1.000000\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("s,a,rr,NA,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("s,a,es,0.250000,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("s,a,composite,1.000000,NA,NA\n"), std::string::npos) << csv;
}

TEST(Grader, CleanRecoveredTerminalAndHallucinated) {
  PaladinPolicy paladin;
  const EpisodeGrade clean = run_and_grade(paladin, card_for(""));
  EXPECT_TRUE(clean.task_success);
  EXPECT_EQ(clean.failures_encountered, 0);

  const EpisodeGrade rec = run_and_grade(paladin, card_for("http_503", 2));
  EXPECT_TRUE(rec.task_success);
  EXPECT_EQ(rec.failures_encountered, 1);
  EXPECT_EQ(rec.failures_recovered, 1);
  EXPECT_FALSE(rec.hallucinated_success);

  const EpisodeGrade term = run_and_grade(paladin, card_for("http_403"));
  EXPECT_FALSE(term.task_success);
  EXPECT_EQ(term.failures_encountered, 1);
  EXPECT_EQ(term.failures_recovered, 0);
  EXPECT_FALSE(term.hallucinated_success);
  EXPECT_EQ(term.error_class, ErrorClass::InvalidToolInvocation);

  VanillaPolicy liar(1.0);
  const EpisodeGrade lie = run_and_grade(liar, card_for("http_500"));
  EXPECT_FALSE(lie.task_success);
  EXPECT_TRUE(lie.hallucinated_success);
  EXPECT_EQ(lie.failures_recovered, 0);
}

TEST(Grader, RejectsMismatchedOrEmptyTraces) {
  const EpisodeCard card = card_for("");
  Trajectory t;
  t.episode_id = "ep-9999";
  try {
    (void)grade_episode(t, card);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "EpisodeMismatch");
  }
  t.episode_id = card.episode_id;
  t.turns = {make_turn(Role::System, "s", 0), make_turn(Role::User, "u", 0)};
  EXPECT_THROW((void)grade_episode(t, card), MalformedTrace);
}

TEST(Grader, JsonRoundTrip) {
  EpisodeGrade g = grade(true, 2, 1, false, 7);
  g.error_class = ErrorClass::OutputHallucination;
  const nlohmann::json j = g;
  EXPECT_EQ(j.get<EpisodeGrade>(), g);
}
