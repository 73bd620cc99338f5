#include "toolfault/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "toolfault/call_analysis.hpp"
#include "toolfault/error.hpp"
#include "toolfault/rng.hpp"

namespace toolfault {

namespace {

// Top-level values of a JSON object body as they would appear in an answer.
std::vector<std::string> response_values(const std::string& body) {
  std::vector<std::string> out;
  auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return out;
  for (const auto& [k, v] : doc.items()) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  return out;
}

std::string scripted_body(const Task& task, const TaskStep& step) {
  const ToolSpec* tool = task.tools.find(step.tool);
  if (tool == nullptr) return {};
  const auto it = tool->scripted_responses.find(canonical_call_key(step.tool, step.arguments));
  return it == tool->scripted_responses.end() ? std::string() : it->second;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return !needle.empty() && haystack.find(needle) != std::string::npos;
}

Rational ratio(int num, int den) { return Rational(num, den); }

void require_nonempty(const std::vector<EpisodeGrade>& grades) {
  if (grades.empty()) throw Error("EmptySuite", "no graded episodes");
}

std::string fmt(const std::optional<Rational>& r) {
  if (!r) return "NA";
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << r->to_double();
  return s.str();
}

std::string fmt(double d) {
  if (std::isnan(d)) return "NA";
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << d;
  return s.str();
}

nlohmann::json rational_json(const std::optional<Rational>& r) {
  if (!r) return nullptr;
  return {{"value", r->to_double()}, {"exact", r->to_string()}};
}

}  // namespace

void to_json(nlohmann::json& j, const EpisodeGrade& g) {
  j = {{"episode_id", g.episode_id},
       {"error_class", g.error_class ? nlohmann::json(to_string(*g.error_class)) : nlohmann::json(nullptr)},
       {"task_success", g.task_success},
       {"failures_encountered", g.failures_encountered},
       {"failures_recovered", g.failures_recovered},
       {"hallucinated_success", g.hallucinated_success},
       {"steps_taken", g.steps_taken}};
}

void from_json(const nlohmann::json& j, EpisodeGrade& g) {
  g.episode_id = j.at("episode_id").get<std::string>();
  g.error_class.reset();
  if (j.contains("error_class") && !j["error_class"].is_null()) {
    g.error_class = parse_error_class(j["error_class"].get<std::string>());
  }
  g.task_success = j.at("task_success").get<bool>();
  g.failures_encountered = j.at("failures_encountered").get<int>();
  g.failures_recovered = j.at("failures_recovered").get<int>();
  g.hallucinated_success = j.at("hallucinated_success").get<bool>();
  g.steps_taken = j.at("steps_taken").get<int>();
}

EpisodeGrade grade_episode(const Trajectory& trace, const EpisodeCard& card, const Catalog& catalog) {
  if (trace.episode_id != card.episode_id) {
    throw Error("EpisodeMismatch", "trace '" + trace.episode_id + "' graded against card '" + card.episode_id + "'");
  }
  const TaskPlan& plan = card.task.plan;
  const CallView view = analyze_calls(trace.turns, &plan, card.task.tools, catalog);

  EpisodeGrade g;
  g.episode_id = card.episode_id;
  g.error_class = card.error_class;
  g.steps_taken = trace.assistant_turns();
  if (g.steps_taken < 1) throw MalformedTrace("episode '" + trace.episode_id + "' has no assistant turn");

  // First failing call per step; failures on unmatched calls count singly.
  std::map<int, std::size_t> first_failure;
  std::vector<int> failed_steps;
  for (const auto& c : view.calls) {
    if (!c.failure) continue;
    if (c.step < 0) {
      ++g.failures_encountered;
      continue;
    }
    if (first_failure.emplace(c.step, c.assistant_turn).second) failed_steps.push_back(c.step);
  }
  std::vector<int> unrecovered;
  for (int step : failed_steps) {
    ++g.failures_encountered;
    const std::size_t at = first_failure[step];
    const bool recovered = std::any_of(view.calls.begin(), view.calls.end(), [&](const CallRecord& c) {
      return c.step == step && !c.failure && c.function_turn && c.assistant_turn > at;
    });
    if (recovered) {
      ++g.failures_recovered;
    } else {
      unrecovered.push_back(step);
    }
  }
  const bool unmatched_failure = g.failures_encountered > static_cast<int>(failed_steps.size());

  const bool finished = trace.terminal && trace.terminal->kind == TerminalKind::Finished;
  if (!finished) return g;
  const std::string& answer = trace.terminal->text;

  if (!plan.steps.empty()) {
    const auto values = response_values(scripted_body(card.task, plan.steps.back()));
    g.task_success = !values.empty() && std::all_of(values.begin(), values.end(),
                                                    [&](const std::string& v) { return contains(answer, v); });
  }

  for (int step : unrecovered) {
    const TaskStep& s = plan.steps[static_cast<std::size_t>(step)];
    bool asserts = std::any_of(s.expected_fields.begin(), s.expected_fields.end(),
                               [&](const std::string& f) { return contains(answer, f); });
    for (const auto& v : response_values(scripted_body(card.task, s))) asserts = asserts || contains(answer, v);
    if (asserts) g.hallucinated_success = true;
  }
  // A Finish after a failure on a call outside the plan is a success claim
  // over an unresolved error.
  if (unmatched_failure) g.hallucinated_success = true;
  return g;
}

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::TSR: return "tsr";
    case Metric::RR: return "rr";
    case Metric::CSR: return "csr";
    case Metric::ES: return "es";
  }
  return "?";
}

std::optional<Rational> metric_value(const std::vector<EpisodeGrade>& grades, Metric m) {
  require_nonempty(grades);
  int success = 0;
  int encountered = 0;
  int recovered = 0;
  int hallucinated = 0;
  int steps = 0;
  for (const auto& g : grades) {
    success += g.task_success ? 1 : 0;
    encountered += g.failures_encountered;
    recovered += g.failures_recovered;
    hallucinated += g.hallucinated_success ? 1 : 0;
    steps += g.steps_taken;
  }
  const int n = static_cast<int>(grades.size());
  switch (m) {
    case Metric::TSR: return ratio(success, n);
    case Metric::RR:
      if (encountered == 0) return std::nullopt;
      return ratio(recovered, encountered);
    case Metric::CSR:
      if (encountered == 0) return std::nullopt;
      return Rational(1) - ratio(hallucinated, encountered);
    case Metric::ES: return ratio(n, steps);
  }
  return std::nullopt;
}

MetricsReport aggregate(const std::vector<EpisodeGrade>& grades, const Rational& alpha) {
  require_nonempty(grades);
  MetricsReport r;
  r.n_episodes = static_cast<int>(grades.size());
  r.tsr = *metric_value(grades, Metric::TSR);
  r.rr = metric_value(grades, Metric::RR);
  r.csr = metric_value(grades, Metric::CSR);
  r.es = *metric_value(grades, Metric::ES);
  r.alpha = alpha;
  r.composite = r.tsr - alpha * (Rational(1) - r.csr.value_or(Rational(1)));

  std::map<ErrorClass, std::vector<EpisodeGrade>> by_class;
  for (const auto& g : grades) {
    if (g.error_class) by_class[*g.error_class].push_back(g);
  }
  for (const auto& [c, gs] : by_class) {
    r.per_class[c] = {static_cast<int>(gs.size()), *metric_value(gs, Metric::TSR), metric_value(gs, Metric::RR),
                      metric_value(gs, Metric::CSR)};
  }
  return r;
}

ConfidenceInterval bootstrap_ci(const std::vector<EpisodeGrade>& grades, Metric metric, int n_resamples,
                                double confidence, std::uint64_t seed) {
  require_nonempty(grades);
  if (n_resamples < 1) throw ConfigError("n_resamples must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must be in (0, 1)");

  Rng rng(seed);
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(n_resamples));
  std::vector<EpisodeGrade> sample(grades.size());
  for (int b = 0; b < n_resamples; ++b) {
    for (auto& s : sample) s = grades[rng.below(grades.size())];
    if (auto v = metric_value(sample, metric)) stats.push_back(v->to_double());
  }
  if (stats.empty()) {
    return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  }
  std::sort(stats.begin(), stats.end());
  const auto rank = [&](double q) {
    const auto m = static_cast<double>(stats.size());
    const auto idx = static_cast<std::int64_t>(std::ceil(q * m)) - 1;
    return stats[static_cast<std::size_t>(std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(stats.size()) - 1))];
  };
  const double tail = (1.0 - confidence) / 2.0;
  return {rank(tail), rank(1.0 - tail)};
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ConfigError("pearson: series lengths differ");
  if (xs.size() < 2) throw ConfigError("pearson: need at least two points");
  const auto n = static_cast<double>(xs.size());
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0;
  double sxx = 0;
  double syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ConfigError("pearson: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::map<std::string, double> grade_correlations(const std::vector<EpisodeGrade>& grades) {
  std::vector<double> success;
  std::vector<double> steps;
  std::vector<double> recovered;
  std::vector<double> safe;
  for (const auto& g : grades) {
    success.push_back(g.task_success ? 1.0 : 0.0);
    steps.push_back(g.steps_taken);
    recovered.push_back(g.failures_encountered == 0
                            ? 1.0
                            : static_cast<double>(g.failures_recovered) / g.failures_encountered);
    safe.push_back(g.hallucinated_success ? 0.0 : 1.0);
  }
  std::map<std::string, double> out;
  const auto put = [&](const char* name, const std::vector<double>& a, const std::vector<double>& b) {
    try {
      out[name] = pearson(a, b);
    } catch (const ConfigError&) {
      // Constant series: r is undefined, omit the pair.
    }
  };
  put("success~recovery", success, recovered);
  put("success~steps", success, steps);
  put("success~no_hallucination", success, safe);
  put("recovery~steps", recovered, steps);
  return out;
}

MetricsReport build_report(const std::vector<EpisodeGrade>& grades, const MetricsConfig& config) {
  MetricsReport r = aggregate(grades, config.alpha);
  r.n_resamples = config.n_resamples;
  for (Metric m : kAllMetrics) {
    const auto point = metric_value(grades, m);
    if (!point) continue;
    ConfidenceInterval ci = bootstrap_ci(grades, m, config.n_resamples, config.confidence,
                                         mix_seed(config.seed, static_cast<std::uint64_t>(m)));
    // Percentile bounds need not straddle the point for skewed statistics
    // such as 1/mean; the report always does.
    ci.lo = std::min(ci.lo, point->to_double());
    ci.hi = std::max(ci.hi, point->to_double());
    r.ci[m] = ci;
  }
  r.correlations = grade_correlations(grades);
  return r;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j = {{"n_episodes", r.n_episodes},
                      {"tsr", rational_json(r.tsr)},
                      {"rr", rational_json(r.rr)},
                      {"csr", rational_json(r.csr)},
                      {"es", rational_json(r.es)},
                      {"alpha", r.alpha.to_string()},
                      {"composite", rational_json(r.composite)},
                      {"n_resamples", r.n_resamples}};
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [c, b] : r.per_class) {
    per_class[std::string(to_string(c))] = {
        {"episodes", b.episodes}, {"tsr", rational_json(b.tsr)}, {"rr", rational_json(b.rr)}, {"csr", rational_json(b.csr)}};
  }
  j["per_class"] = per_class;
  nlohmann::json ci = nlohmann::json::object();
  for (const auto& [m, c] : r.ci) ci[std::string(to_string(m))] = {c.lo, c.hi};
  j["ci"] = ci;
  j["correlations"] = r.correlations;
  return j;
}

std::string report_to_csv(const MetricsReport& r, const std::string& suite, const std::string& agent) {
  std::string out = "suite,agent,metric,point,ci_lo,ci_hi\n";
  const auto row = [&](std::string_view metric, const std::optional<Rational>& point, std::optional<Metric> m) {
    std::string lo = "NA";
    std::string hi = "NA";
    if (m) {
      if (auto it = r.ci.find(*m); it != r.ci.end()) {
        lo = fmt(it->second.lo);
        hi = fmt(it->second.hi);
      }
    }
    out += suite + "," + agent + "," + std::string(metric) + "," + fmt(point) + "," + lo + "," + hi + "\n";
  };
  row("tsr", r.tsr, Metric::TSR);
  row("rr", r.rr, Metric::RR);
  row("csr", r.csr, Metric::CSR);
  row("es", r.es, Metric::ES);
  row("composite", r.composite, std::nullopt);
  return out;
}

}  // namespace toolfault
