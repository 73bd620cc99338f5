#include "toolfault/benchgen.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

#include "toolfault/error.hpp"
#include "toolfault/rng.hpp"

namespace toolfault {

namespace {

constexpr std::array<std::int64_t, 4> kWindowsMs = {0, 400, 1500, 4000};
constexpr int kMaxPersistence = 3;
constexpr std::uint64_t kKindOffsetSalt = 0x6b696e64ULL;

struct Slot {
  std::optional<ErrorClass> error_class;
  std::string kind;  // empty for clean
};

std::string expected_recovery(const FailureKind& k) {
  switch (k.disposition()) {
    case Disposition::Retryable: return std::string(to_string(RecoveryTag::RetryWithBackoff));
    case Disposition::Terminal: return std::string(to_string(RecoveryTag::TerminateGracefully));
    case Disposition::Correctable: return std::string(to_string(k.remedy.accepts.front()));
  }
  return "none";
}

// Largest-remainder apportionment of `total` over `weights`.
std::vector<int> apportion(int total, const std::vector<Rational>& weights) {
  Rational sum(0);
  for (const auto& w : weights) sum += w;
  std::vector<int> counts(weights.size());
  std::vector<std::pair<Rational, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const Rational exact = Rational(total) * weights[i] / sum;
    const std::int64_t whole = exact.num() / exact.den();
    counts[i] = static_cast<int>(whole);
    assigned += counts[i];
    remainders.emplace_back(exact - Rational(whole), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; i < total - assigned; ++i) ++counts[remainders[static_cast<std::size_t>(i)].second];
  return counts;
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.below(i)]);
  }
}

Suite generate(const std::vector<Task>& pool, const SuiteSpec& spec, const Catalog& catalog,
               const ExemplarBank& bank, const std::optional<std::set<std::string>>& kind_filter) {
  spec.validate();
  if (pool.empty()) throw Error("PoolExhausted", "task pool is empty");

  // Eligible kinds per class.
  std::map<ErrorClass, std::vector<std::string>> eligible;
  for (ErrorClass c : kAllErrorClasses) {
    for (const FailureKind* k : catalog.kinds_in(c, true)) {
      if (!kind_filter || kind_filter->contains(k->id)) eligible[c].push_back(k->id);
    }
    if (eligible[c].empty()) eligible.erase(c);
  }
  if (kind_filter) {
    for (const auto& k : *kind_filter) {
      const FailureKind& fk = catalog.at(k);
      if (!fk.injectable) throw ConfigError("kind '" + k + "' is not injectable");
    }
  }

  std::vector<ErrorClass> classes;
  std::vector<Rational> weights;
  if (spec.class_distribution.empty()) {
    for (const auto& [c, kinds] : eligible) {
      classes.push_back(c);
      weights.push_back(Rational(1));
    }
  } else {
    for (const auto& [c, w] : spec.class_distribution) {
      if (!eligible.contains(c)) {
        throw ConfigError("class " + std::string(to_string(c)) + " has no injectable kind");
      }
      classes.push_back(c);
      weights.push_back(w);
    }
  }

  const Rational cf = spec.clean_fraction;
  const auto n = static_cast<std::int64_t>(spec.n_episodes);
  const int n_clean = static_cast<int>((2 * n * cf.num() + cf.den()) / (2 * cf.den()));
  const int n_fail = spec.n_episodes - n_clean;
  if (n_fail > 0 && classes.empty()) throw ConfigError("no injectable kinds to draw from");
  const std::vector<int> per_class = n_fail > 0 ? apportion(n_fail, weights) : std::vector<int>(classes.size());

  std::vector<Slot> slots;
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    const auto& kinds = eligible[classes[ci]];
    const std::uint64_t offset =
        mix_seed(mix_seed(spec.master_seed, kKindOffsetSalt), static_cast<std::uint64_t>(classes[ci])) %
        kinds.size();
    for (int j = 0; j < per_class[ci]; ++j) {
      slots.push_back({classes[ci], kinds[(offset + static_cast<std::uint64_t>(j)) % kinds.size()]});
    }
  }
  for (int i = 0; i < n_clean; ++i) slots.push_back({std::nullopt, ""});
  Rng master(spec.master_seed);
  shuffle(slots, master);

  std::vector<std::uint64_t> hashes;
  for (const auto& t : pool) hashes.push_back(task_hash(t));

  Suite suite;
  std::set<std::tuple<std::uint64_t, std::string, int>> used;
  std::map<std::string, int> kind_counts;
  std::map<std::string, int> class_counts;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& slot = slots[i];
    const std::uint64_t seed = mix_seed(spec.master_seed, i);
    Rng rng(seed);
    const std::size_t start_task = rng.below(pool.size());
    const std::uint64_t turn_draw = rng.next_u64();

    std::optional<std::pair<std::size_t, int>> pick;
    for (std::size_t k = 0; k < pool.size() && !pick; ++k) {
      const std::size_t ti = (start_task + k) % pool.size();
      const int steps = static_cast<int>(pool[ti].plan.steps.size());
      if (slot.kind.empty()) {
        if (!used.contains({hashes[ti], "", 0})) pick = {ti, 0};
        continue;
      }
      for (int s = 0; s < steps && !pick; ++s) {
        const int turn = 1 + static_cast<int>((turn_draw + static_cast<std::uint64_t>(s)) % static_cast<std::uint64_t>(steps));
        if (!used.contains({hashes[ti], slot.kind, turn})) pick = {ti, turn};
      }
    }
    if (!pick) {
      throw Error("PoolExhausted", "no unique (task, kind, turn) left for episode " + std::to_string(i));
    }
    used.insert({hashes[pick->first], slot.kind, pick->second});

    EpisodeCard card;
    char id[32];
    std::snprintf(id, sizeof id, "ep-%04zu", i);
    card.episode_id = id;
    card.task = pool[pick->first];
    card.task_hash = hashes[pick->first];
    card.protocol = spec.protocol;
    card.config.retry_budget_per_error = 3;
    card.hidden_kinds = spec.held_out_kinds;
    card.plan.seed = seed;
    if (slot.kind.empty()) {
      card.guidelines = {"none", {"hallucinated_success"}};
    } else {
      const FailureKind& fk = catalog.at(slot.kind);
      card.error_class = slot.error_class;
      card.plan.kind = slot.kind;
      card.plan.manifestation = fk.default_manifestation;
      card.plan.turn_index = pick->second;
      card.plan.profile.persistence = 1 + static_cast<int>(rng.below(kMaxPersistence));
      card.plan.profile.window_ms = kWindowsMs[rng.below(kWindowsMs.size())];
      if ((fk.http_status == 429 || fk.http_status == 503) && rng.bernoulli(0.5)) {
        card.plan.profile.retry_after_ms = std::max<std::int64_t>(card.plan.profile.window_ms, 1000);
      }
      card.guidelines.expected_recovery = expected_recovery(fk);
      card.guidelines.forbidden = {"hallucinated_success"};
      if (fk.disposition() == Disposition::Terminal) card.guidelines.forbidden.push_back("retry_terminal_failure");
      ++kind_counts[slot.kind];
      ++class_counts[std::string(to_string(*slot.error_class))];
    }
    suite.cards.push_back(std::move(card));
  }

  suite.manifest = {
      {"spec", spec_to_json(spec)},
      {"master_seed", spec.master_seed},
      {"seed_mix", kSeedMixDescription},
      {"catalog_version", catalog.version()},
      {"bank_version", bank.version()},
      {"n_cards", suite.cards.size()},
      {"clean", n_clean},
      {"class_counts", class_counts},
      {"kind_counts", kind_counts},
  };
  if (kind_filter) suite.manifest["injected_kinds"] = *kind_filter;
  return suite;
}

}  // namespace

std::string_view to_string(Protocol p) noexcept {
  return p == Protocol::Paladin ? "paladin" : "toolreflect";
}

Protocol parse_protocol(std::string_view label) {
  if (label == "paladin") return Protocol::Paladin;
  if (label == "toolreflect") return Protocol::ToolReflect;
  throw ConfigError("unknown protocol '" + std::string(label) + "'");
}

void SuiteSpec::validate() const {
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  if (clean_fraction < Rational(0) || clean_fraction >= Rational(1)) {
    throw ConfigError("clean_fraction must be in [0, 1)");
  }
  for (const auto& [c, w] : class_distribution) {
    if (w <= Rational(0)) throw ConfigError("class weights must be positive");
  }
}

SuiteSpec standard_desk_spec() {
  SuiteSpec spec;
  spec.n_episodes = 200;
  spec.clean_fraction = Rational(1, 5);
  spec.master_seed = kStandardSuiteSeed;
  return spec;
}

nlohmann::json spec_to_json(const SuiteSpec& spec) {
  nlohmann::json dist = nlohmann::json::object();
  for (const auto& [c, w] : spec.class_distribution) dist[std::string(to_string(c))] = w.to_string();
  return {{"n_episodes", spec.n_episodes},
          {"class_distribution", dist},
          {"clean_fraction", spec.clean_fraction.to_string()},
          {"held_out_kinds", spec.held_out_kinds},
          {"protocol", to_string(spec.protocol)},
          {"master_seed", spec.master_seed}};
}

void to_json(nlohmann::json& j, const EpisodeCard& c) {
  j = {{"episode_id", c.episode_id},
       {"task", c.task},
       {"task_hash", c.task_hash},
       {"plan", c.plan},
       {"config", c.config},
       {"protocol", to_string(c.protocol)},
       {"error_class", c.error_class ? nlohmann::json(to_string(*c.error_class)) : nlohmann::json(nullptr)},
       {"guidelines", {{"expected_recovery", c.guidelines.expected_recovery},
                       {"forbidden", c.guidelines.forbidden}}},
       {"hidden_kinds", c.hidden_kinds}};
}

void from_json(const nlohmann::json& j, EpisodeCard& c) {
  c.episode_id = j.at("episode_id").get<std::string>();
  c.task = j.at("task").get<Task>();
  c.task_hash = j.at("task_hash").get<std::uint64_t>();
  c.plan = j.at("plan").get<InjectionPlan>();
  c.config = j.at("config").get<SimConfig>();
  c.protocol = parse_protocol(j.value("protocol", "paladin"));
  c.error_class.reset();
  if (j.contains("error_class") && !j["error_class"].is_null()) {
    c.error_class = parse_error_class(j["error_class"].get<std::string>());
  }
  const auto g = j.value("guidelines", nlohmann::json::object());
  c.guidelines.expected_recovery = g.value("expected_recovery", "none");
  c.guidelines.forbidden = g.value("forbidden", std::vector<std::string>{});
  c.hidden_kinds = j.value("hidden_kinds", std::set<std::string>{});
}

Suite generate_suite(const std::vector<Task>& pool, const SuiteSpec& spec, const Catalog& catalog,
                     const ExemplarBank& bank) {
  return generate(pool, spec, catalog, bank, std::nullopt);
}

GeneralizationSplit generalization_split(const std::vector<Task>& pool, const SuiteSpec& spec,
                                         const Catalog& catalog, const ExemplarBank& bank) {
  ExemplarBank visible = bank.without_kinds(spec.held_out_kinds);
  for (ErrorClass c : kAllErrorClasses) {
    if (bank.covers(c) && !visible.covers(c)) {
      throw Error("HeldOutCoversClass",
                  "holding out these kinds removes every exemplar of " + std::string(to_string(c)));
    }
  }
  if (spec.held_out_kinds.empty()) return {std::move(visible), generate(pool, spec, catalog, bank, std::nullopt)};
  return {std::move(visible), generate(pool, spec, catalog, bank, spec.held_out_kinds)};
}

std::string suite_to_jsonl(const Suite& suite) {
  std::string out;
  for (const auto& c : suite.cards) {
    out += nlohmann::json(c).dump();
    out += '\n';
  }
  return out;
}

std::vector<EpisodeCard> parse_suite_jsonl(std::string_view text) {
  std::vector<EpisodeCard> cards;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw ParseError("suite line " + std::to_string(lineno) + " is not JSON");
    try {
      cards.push_back(doc.get<EpisodeCard>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("suite line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cards;
}

}  // namespace toolfault
