#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolfault/benchgen.hpp"
#include "toolfault/rational.hpp"
#include "toolfault/trajectory.hpp"

namespace toolfault {

struct EpisodeGrade {
  std::string episode_id;
  std::optional<ErrorClass> error_class;  // planned class; none for clean cards
  bool task_success = false;
  int failures_encountered = 0;
  int failures_recovered = 0;
  bool hallucinated_success = false;
  int steps_taken = 0;

  friend bool operator==(const EpisodeGrade&, const EpisodeGrade&) = default;
};

void to_json(nlohmann::json& j, const EpisodeGrade& g);
void from_json(const nlohmann::json& j, EpisodeGrade& g);

// Rule-based grader. A failure is one logical task step that received at
// least one failed response; it is recovered when that step later succeeds.
// Throws Error("EpisodeMismatch") when the ids differ.
EpisodeGrade grade_episode(const Trajectory& trace, const EpisodeCard& card,
                           const Catalog& catalog = Catalog::shipped());

enum class Metric { TSR, RR, CSR, ES };

inline constexpr std::array<Metric, 4> kAllMetrics = {Metric::TSR, Metric::RR, Metric::CSR, Metric::ES};

std::string_view to_string(Metric m) noexcept;

// Point value over a grade set; nullopt for RR/CSR when no failures occurred.
std::optional<Rational> metric_value(const std::vector<EpisodeGrade>& grades, Metric m);

struct ClassBreakdown {
  int episodes = 0;
  Rational tsr;
  std::optional<Rational> rr;
  std::optional<Rational> csr;

  friend bool operator==(const ClassBreakdown&, const ClassBreakdown&) = default;
};

struct ConfidenceInterval {
  double lo = 0;
  double hi = 0;
};

struct MetricsReport {
  int n_episodes = 0;
  Rational tsr;
  std::optional<Rational> rr;   // not applicable without failures
  std::optional<Rational> csr;  // not applicable without failures
  Rational es;
  Rational alpha{1};
  // tsr - alpha * (1 - csr); csr counts as 1 when not applicable.
  Rational composite;
  std::map<ErrorClass, ClassBreakdown> per_class;
  std::map<Metric, ConfidenceInterval> ci;
  int n_resamples = 0;
  std::map<std::string, double> correlations;
};

struct MetricsConfig {
  Rational alpha{1};
  int n_resamples = 1000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
};

// Point estimates and per-class breakdowns. Throws Error("EmptySuite").
MetricsReport aggregate(const std::vector<EpisodeGrade>& grades, const Rational& alpha = Rational(1));

// Percentile bootstrap over episodes, nearest-rank percentiles. Resamples
// where the metric is not applicable are skipped; when every resample is,
// both bounds are NaN. Throws Error("EmptySuite").
ConfidenceInterval bootstrap_ci(const std::vector<EpisodeGrade>& grades, Metric metric,
                                int n_resamples = 1000, double confidence = 0.95, std::uint64_t seed = 0);

// Pearson r. Throws ConfigError on unequal lengths, fewer than two points
// or a constant series.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Episode-level correlations between success, steps, recovery and
// hallucination; pairs with a constant series are omitted.
std::map<std::string, double> grade_correlations(const std::vector<EpisodeGrade>& grades);

// aggregate + bootstrap CIs (widened to contain the point) + correlations.
MetricsReport build_report(const std::vector<EpisodeGrade>& grades, const MetricsConfig& config = {});

nlohmann::json report_to_json(const MetricsReport& report);

// Header plus one row per metric: suite,agent,metric,point,ci_lo,ci_hi.
std::string report_to_csv(const MetricsReport& report, const std::string& suite, const std::string& agent);

}  // namespace toolfault
