#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "toolfault/agents.hpp"
#include "toolfault/benchgen.hpp"
#include "toolfault/dictionary_converter.hpp"
#include "toolfault/harness.hpp"
#include "toolfault/hashing.hpp"
#include "toolfault/metrics.hpp"
#include "toolfault/remote_chat.hpp"
#include "toolfault/remote_grader.hpp"
#include "toolfault/rng.hpp"
#include "toolfault/simulator.hpp"
#include "toolfault/task_pool.hpp"
#include "toolfault/trace_pipeline.hpp"

namespace fs = std::filesystem;
using namespace toolfault;

namespace {

constexpr int kExitError = 1;
constexpr int kExitAssert = 3;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("FileNotFound", "cannot open " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
  if (!out) throw Error("IoError", "cannot write " + p.string());
}

Rational parse_fraction(const std::string& text) {
  // "0.8", "4/5" or "1"
  if (const auto slash = text.find('/'); slash != std::string::npos) {
    return Rational(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
  }
  const auto dot = text.find('.');
  if (dot == std::string::npos) return Rational(std::stoll(text));
  const std::string frac = text.substr(dot + 1);
  if (frac.size() > 9) throw ConfigError("too many decimals in '" + text + "'");
  std::int64_t den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  const std::string whole = text.substr(0, dot);
  const bool negative = !whole.empty() && whole.front() == '-';
  const std::int64_t w = whole.empty() || whole == "-" ? 0 : std::stoll(whole);
  const std::int64_t f = frac.empty() ? 0 : std::stoll(frac);
  return Rational(w) + Rational(negative ? -f : f, den);
}

// Explicit seed, or a fresh one that is printed and recorded.
struct SeedChoice {
  std::uint64_t value = 0;
  bool generated = false;
};

SeedChoice resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return {*flag, false};
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::cerr << "no --seed given; using generated seed " << s << "\n";
  return {s == 0 ? 1 : s, true};
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_path_for(const fs::path& suite) {
  fs::path p = suite;
  p.replace_extension(".manifest.json");
  return p.string();
}

// ---- gen-suite ----------------------------------------------------------

struct GenSuiteArgs {
  int n = 70;
  std::optional<std::uint64_t> seed;
  std::string clean_fraction = "0";
  std::vector<std::string> hold_out;
  std::vector<std::string> class_weights;
  std::string protocol = "paladin";
  bool standard = false;
  std::string out;
};

int cmd_gen_suite(const GenSuiteArgs& a) {
  SuiteSpec spec;
  if (a.standard) {
    spec = standard_desk_spec();
  } else {
    spec.n_episodes = a.n;
    spec.clean_fraction = parse_fraction(a.clean_fraction);
    spec.master_seed = resolve_seed(a.seed).value;
  }
  spec.protocol = parse_protocol(a.protocol);
  spec.held_out_kinds.insert(a.hold_out.begin(), a.hold_out.end());
  for (const auto& cw : a.class_weights) {
    const auto eq = cw.find('=');
    if (eq == std::string::npos) throw ConfigError("--class-weight expects CLASS=WEIGHT, got '" + cw + "'");
    spec.class_distribution[parse_error_class(cw.substr(0, eq))] = parse_fraction(cw.substr(eq + 1));
  }

  Suite suite;
  if (spec.held_out_kinds.empty()) {
    suite = generate_suite(builtin_task_pool(), spec);
  } else {
    suite = generalization_split(builtin_task_pool(), spec).suite;
  }
  const std::string jsonl = suite_to_jsonl(suite);
  write_file(a.out, jsonl);
  suite.manifest["suite_hash"] = hex64(fnv1a64(jsonl));
  write_file(manifest_path_for(a.out), suite.manifest.dump(1) + "\n");

  std::cout << "wrote " << suite.cards.size() << " cards to " << a.out << " (seed " << spec.master_seed << ")\n";
  for (const auto& [cls, n] : suite.manifest["class_counts"].items()) std::cout << "  " << cls << ": " << n << "\n";
  std::cout << "  clean: " << suite.manifest["clean"] << "\n";
  return 0;
}

// ---- evaluate -----------------------------------------------------------

struct EvaluateArgs {
  std::string suite;
  std::string agent = "paladin";
  std::string bank;
  bool no_retrieval = false;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs";
  std::string alpha = "1";
  int resamples = 1000;
  std::string endpoint;
  std::string model;
  std::string token_env = kDefaultTokenEnv;
  std::string grader_endpoint;  // empty: rule-based grader
  std::string grader_model;
  std::optional<double> min_rr;
  std::optional<double> min_tsr;
  std::optional<double> min_csr;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto wall_start = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  const std::string suite_text = read_file(a.suite);
  const std::vector<EpisodeCard> cards = parse_suite_jsonl(suite_text);
  if (cards.empty()) throw Error("EmptySuite", a.suite + " has no cards");

  std::optional<ExemplarBank> loaded;
  if (!a.bank.empty()) loaded.emplace(load_bank(a.bank));
  const ExemplarBank& bank = loaded ? *loaded : ExemplarBank::shipped();

  std::unique_ptr<AgentPolicy> agent;
  nlohmann::json endpoint_json = nullptr;
  if (a.agent == "remote") {
    if (a.endpoint.empty()) throw ConfigError("--agent remote needs --endpoint");
    RemoteEndpoint ep{a.endpoint, a.model, a.token_env};
    endpoint_json = ep;
    agent = std::make_unique<RemoteChatPolicy>(ep);
  } else {
    agent = make_scripted_agent(a.agent);
  }

  std::optional<RemoteGrader> remote_grader;
  nlohmann::json grader_json = "rule";
  if (!a.grader_endpoint.empty()) {
    RemoteEndpoint gep{a.grader_endpoint, a.grader_model, a.token_env};
    grader_json = gep;
    remote_grader.emplace(gep);
  }

  const SeedChoice seed = resolve_seed(a.seed);
  MetricsConfig mc;
  mc.alpha = parse_fraction(a.alpha);
  mc.n_resamples = a.resamples;
  mc.seed = seed.value;

  const nlohmann::json config = {{"suite_hash", hex64(fnv1a64(suite_text))},
                                 {"agent", a.agent},
                                 {"endpoint", endpoint_json},
                                 {"grader", grader_json},
                                 {"bank_version", bank.version()},
                                 {"bank_hash", hex64(fnv1a64(bank.to_json().dump()))},
                                 {"retrieval", !a.no_retrieval},
                                 {"seed", seed.value},
                                 {"alpha", mc.alpha.to_string()},
                                 {"n_resamples", mc.n_resamples}};
  const std::string run_hash = hex64(fnv1a64(config.dump()));
  const fs::path dir = fs::path(a.out_dir) / (a.agent + (a.no_retrieval ? "-noretrieval-" : "-") + run_hash);
  if (fs::exists(dir / "report.json")) {
    std::cout << "run " << run_hash << " already exists at " << dir.string() << "; not overwriting\n";
    return 0;
  }

  RunOptions ro;
  ro.bank = &bank;
  ro.retrieval = !a.no_retrieval;
  ro.jobs = a.jobs;
  ro.seed = seed.value;
  SuiteRun run = run_suite(cards, *agent, ro);
  if (remote_grader) {
    for (std::size_t i = 0; i < cards.size(); ++i) run.grades[i] = remote_grader->grade(run.trajectories[i], cards[i]);
  }
  const MetricsReport report = build_report(run.grades, mc);

  std::string traj;
  std::string grades;
  for (std::size_t i = 0; i < cards.size(); ++i) {
    traj += serialize_trajectory(run.trajectories[i]) + "\n";
    grades += nlohmann::json(run.grades[i]).dump() + "\n";
  }
  const std::string suite_name = fs::path(a.suite).stem().string();
  nlohmann::json report_json = report_to_json(report);
  report_json["suite"] = suite_name;
  report_json["agent"] = a.agent;
  report_json["retrieval"] = !a.no_retrieval;
  write_file(dir / "trajectories.jsonl", traj);
  write_file(dir / "grades.jsonl", grades);
  write_file(dir / "report.json", report_json.dump(1) + "\n");
  write_file(dir / "report.csv", report_to_csv(report, suite_name, a.agent));

  nlohmann::json manifest = {{"command", "evaluate"},
                             {"run_hash", run_hash},
                             {"config", config},
                             {"suite", a.suite},
                             {"seed_generated", seed.generated},
                             {"jobs", a.jobs}};
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - wall_start).count();
  // Wall-clock data lives only here; the hashed config excludes it.
  manifest["wall_clock"] = {{"started_utc", started}, {"elapsed_ms", elapsed}};
  write_file(dir / "manifest.json", manifest.dump(1) + "\n");

  std::cout << report_to_csv(report, suite_name, a.agent);
  std::cout << "run directory: " << dir.string() << "\n";

  int code = 0;
  const auto check = [&](const char* name, const std::optional<double>& min, const std::optional<Rational>& v) {
    if (!min) return;
    if (!v || v->to_double() < *min) {
      std::cerr << "assertion failed: " << name << " = " << (v ? std::to_string(v->to_double()) : "NA")
                << " < " << *min << "\n";
      code = kExitAssert;
    }
  };
  check("rr", a.min_rr, report.rr);
  check("tsr", a.min_tsr, report.tsr);
  check("csr", a.min_csr, report.csr);
  return code;
}

// ---- build-corpus -------------------------------------------------------

struct CorpusArgs {
  int target = 100;
  std::string recovery_fraction = "0.8";
  std::string teacher = "rule";
  std::optional<std::uint64_t> seed;
  std::string out_dir = "corpus";
  std::string endpoint;
  std::string model;
  std::string token_env = kDefaultTokenEnv;
};

int cmd_build_corpus(const CorpusArgs& a) {
  const auto wall_start = std::chrono::steady_clock::now();
  CorpusSpec spec;
  spec.target_size = a.target;
  spec.recovery_fraction = parse_fraction(a.recovery_fraction);
  spec.validate();

  std::unique_ptr<Teacher> teacher;
  if (a.teacher == "rule") {
    teacher = std::make_unique<RuleBasedTeacher>(ExemplarBank::shipped());
  } else if (a.teacher == "remote") {
    if (a.endpoint.empty()) throw ConfigError("--teacher remote needs --endpoint");
    teacher = std::make_unique<RemoteTeacher>(RemoteEndpoint{a.endpoint, a.model, a.token_env});
  } else {
    throw ConfigError("unknown teacher '" + a.teacher + "'");
  }
  const SeedChoice seed = resolve_seed(a.seed);
  spec.seed = seed.value;

  // Source traces: failure-injected episodes run by an agent that stops at
  // the first error, plus one clean run per pool task.
  const auto& pool = builtin_task_pool();
  const int n_rec = static_cast<int>((2 * spec.target_size * spec.recovery_fraction.num() + spec.recovery_fraction.den()) /
                                     (2 * spec.recovery_fraction.den()));
  SuiteSpec source;
  source.n_episodes = std::max(1, 2 * n_rec);
  source.clean_fraction = Rational(0);
  source.master_seed = mix_seed(spec.seed, 1);
  const Suite suite = generate_suite(pool, source);
  const ToolBenchPolicy collector;

  std::vector<Trajectory> repaired;
  nlohmann::json quarantine = nlohmann::json::array();
  const fs::path out(a.out_dir);
  for (const auto& card : suite.cards) {
    EpisodeOptions eo;
    eo.episode_id = card.episode_id;
    eo.task = &card.task.plan;
    const Trajectory t = run_episode(card.task.prompt, card.task.tools, collector, card.plan, card.config, eo);
    const auto first = detect_first_failure(t);
    if (!first) continue;
    RepairRequest req{card.task.prompt, card.task.tools, truncate_at(t, first->turn), first->signature,
                      card.task.plan};
    try {
      repaired.push_back(repair(req, *teacher));
    } catch (const TeacherFailure& e) {
      write_file(out / "quarantine" / (card.episode_id + ".jsonl"), serialize_trajectory(req.truncated) + "\n");
      quarantine.push_back({{"episode_id", card.episode_id}, {"reason", e.what()}});
    }
  }
  std::vector<Trajectory> clean;
  for (const auto& task : pool) {
    EpisodeOptions eo;
    eo.episode_id = "clean-" + task.id;
    eo.task = &task.plan;
    const Trajectory t = run_episode(task.prompt, task.tools, collector, InjectionPlan{}, SimConfig{}, eo);
    clean.push_back(finalize(task.prompt, task.tools, t));
  }

  Corpus corpus = compose_corpus(repaired, clean, spec, ExemplarBank::shipped().version());
  corpus.manifest["teacher"] = teacher->name();
  corpus.manifest["seed_generated"] = seed.generated;
  corpus.manifest["quarantined"] = quarantine;
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - wall_start).count();
  corpus.manifest["wall_clock"] = {{"started_utc", utc_now()}, {"elapsed_ms", elapsed}};
  write_corpus(corpus, out);
  std::cout << "corpus: " << corpus.manifest["recovery_traces"] << " recovery + " << corpus.manifest["clean_traces"]
            << " clean traces in " << out.string() << " (seed " << spec.seed << ", " << quarantine.size()
            << " quarantined)\n";
  return 0;
}

// ---- convert-dictionary -------------------------------------------------

int cmd_convert(const std::string& in, const std::string& out, const std::string& version) {
  const nlohmann::json doc = convert_recovery_dictionary(read_file(in), version);
  BankOptions opts;
  opts.require_full_coverage = false;
  const ExemplarBank bank = ExemplarBank::from_json(doc, opts);
  write_file(out, doc.dump(1) + "\n");
  std::cout << "converted " << doc["branches"].size() << " branches into " << bank.size() << " exemplars\n";
  return 0;
}

// ---- report-diff --------------------------------------------------------

int cmd_report_diff(const std::string& a_path, const std::string& b_path) {
  const auto a = nlohmann::json::parse(read_file(a_path));
  const auto b = nlohmann::json::parse(read_file(b_path));
  std::printf("%-10s %10s %10s %10s\n", "metric", "a", "b", "b-a");
  for (const char* m : {"tsr", "rr", "csr", "es", "composite"}) {
    const auto& va = a.at(m);
    const auto& vb = b.at(m);
    if (va.is_null() || vb.is_null()) {
      std::printf("%-10s %10s %10s %10s\n", m, va.is_null() ? "NA" : "-", vb.is_null() ? "NA" : "-", "NA");
      continue;
    }
    const double x = va.at("value").get<double>();
    const double y = vb.at("value").get<double>();
    std::printf("%-10s %10.4f %10.4f %+10.4f\n", m, x, y, y - x);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault-injection simulator and evaluation harness for tool-calling agents"};
  app.require_subcommand(1);

  GenSuiteArgs gen;
  auto* g = app.add_subcommand("gen-suite", "Generate an evaluation suite");
  g->add_option("--n", gen.n, "Number of episodes");
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_option("--clean-fraction", gen.clean_fraction, "Fraction of clean episodes, e.g. 0.2 or 1/5");
  g->add_option("--hold-out", gen.hold_out, "Failure kinds hidden from the agents' bank");
  g->add_option("--class-weight", gen.class_weights, "CLASS=WEIGHT, repeatable");
  g->add_option("--protocol", gen.protocol, "paladin or toolreflect");
  g->add_flag("--standard", gen.standard, "The fixed 200-episode baseline suite");
  g->add_option("--out", gen.out, "Output .jsonl")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Run and grade a suite with one agent");
  e->add_option("--suite", ev.suite)->required();
  e->add_option("--agent", ev.agent, "vanilla, toolbench, reflect, critic, paladin or remote");
  e->add_option("--bank", ev.bank, "Recovery bank JSON (default: shipped)");
  e->add_flag("--no-retrieval", ev.no_retrieval, "Run without the exemplar bank");
  e->add_option("--jobs", ev.jobs, "Concurrent episodes");
  e->add_option("--seed", ev.seed, "Run seed");
  e->add_option("--out-dir", ev.out_dir, "Root for run directories");
  e->add_option("--alpha", ev.alpha, "Composite-score weight");
  e->add_option("--resamples", ev.resamples, "Bootstrap resamples");
  e->add_option("--endpoint", ev.endpoint, "Chat endpoint for --agent remote");
  e->add_option("--model", ev.model);
  e->add_option("--token-env", ev.token_env);
  e->add_option("--grader-endpoint", ev.grader_endpoint, "Grade with a remote judge instead of the rule-based grader");
  e->add_option("--grader-model", ev.grader_model);
  e->add_option("--assert-min-rr", ev.min_rr);
  e->add_option("--assert-min-tsr", ev.min_tsr);
  e->add_option("--assert-min-csr", ev.min_csr);

  CorpusArgs co;
  auto* c = app.add_subcommand("build-corpus", "Build a recovery-annotated training corpus");
  c->add_option("--target", co.target);
  c->add_option("--recovery-fraction", co.recovery_fraction);
  c->add_option("--teacher", co.teacher, "rule or remote");
  c->add_option("--seed", co.seed);
  c->add_option("--out-dir", co.out_dir);
  c->add_option("--endpoint", co.endpoint);
  c->add_option("--model", co.model);
  c->add_option("--token-env", co.token_env);

  std::string conv_in;
  std::string conv_out;
  std::string conv_version = "converted";
  auto* d = app.add_subcommand("convert-dictionary", "Convert a Python-literal recovery dictionary");
  d->add_option("--in", conv_in)->required();
  d->add_option("--out", conv_out)->required();
  d->add_option("--version", conv_version);

  std::string diff_a;
  std::string diff_b;
  auto* r = app.add_subcommand("report-diff", "Compare two report.json files");
  r->add_option("a", diff_a)->required();
  r->add_option("b", diff_b)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (g->parsed()) return cmd_gen_suite(gen);
    if (e->parsed()) return cmd_evaluate(ev);
    if (c->parsed()) return cmd_build_corpus(co);
    if (d->parsed()) return cmd_convert(conv_in, conv_out, conv_version);
    if (r->parsed()) return cmd_report_diff(diff_a, diff_b);
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitError;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitError;
  }
  return 0;
}
