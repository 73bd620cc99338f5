#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolfault/rational.hpp"
#include "toolfault/recovery_bank.hpp"
#include "toolfault/simulator.hpp"
#include "toolfault/task_pool.hpp"
#include "toolfault/taxonomy.hpp"
#include "toolfault/trajectory.hpp"

namespace toolfault {

// Paladin: the default protocol. ToolReflect: the three-attempt protocol;
// both pin the card's retry budget to 3.
enum class Protocol { Paladin, ToolReflect };

std::string_view to_string(Protocol p) noexcept;
Protocol parse_protocol(std::string_view label);

struct SuiteSpec {
  int n_episodes = 70;
  // Empty means uniform over every class with an injectable kind.
  std::map<ErrorClass, Rational> class_distribution;
  Rational clean_fraction = Rational(1, 5);
  // Hidden from the agents' bank; injection is unaffected.
  std::set<std::string> held_out_kinds;
  Protocol protocol = Protocol::Paladin;
  std::uint64_t master_seed = 0;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json spec_to_json(const SuiteSpec& spec);

// Fixed 200-episode suite (uniform classes, 20% clean) used to compare
// baselines.
inline constexpr std::uint64_t kStandardSuiteSeed = 2026;
SuiteSpec standard_desk_spec();

struct GuidelineTags {
  std::string expected_recovery;  // recovery tag name, or "none" for clean episodes
  std::vector<std::string> forbidden;

  friend bool operator==(const GuidelineTags&, const GuidelineTags&) = default;
};

struct EpisodeCard {
  std::string episode_id;
  Task task;
  std::uint64_t task_hash = 0;
  InjectionPlan plan;
  SimConfig config;
  Protocol protocol = Protocol::Paladin;
  std::optional<ErrorClass> error_class;
  GuidelineTags guidelines;
  std::set<std::string> hidden_kinds;

  friend bool operator==(const EpisodeCard&, const EpisodeCard&) = default;
};

void to_json(nlohmann::json& j, const EpisodeCard& c);
void from_json(const nlohmann::json& j, EpisodeCard& c);

struct Suite {
  std::vector<EpisodeCard> cards;
  nlohmann::json manifest;
};

// Per-class failure counts by largest remainder (ties to the earlier class),
// clean count rounded half up. Throws PoolExhausted when no unique
// (task, kind, turn) is left for a slot.
Suite generate_suite(const std::vector<Task>& pool, const SuiteSpec& spec,
                     const Catalog& catalog = Catalog::shipped(),
                     const ExemplarBank& bank = ExemplarBank::shipped());

struct GeneralizationSplit {
  ExemplarBank visible_bank;
  Suite suite;
};

// Suite injecting only spec.held_out_kinds, plus the bank with those kinds
// removed. Throws Error("HeldOutCoversClass") when a class would lose all
// its exemplars.
GeneralizationSplit generalization_split(const std::vector<Task>& pool, const SuiteSpec& spec,
                                         const Catalog& catalog = Catalog::shipped(),
                                         const ExemplarBank& bank = ExemplarBank::shipped());

std::string suite_to_jsonl(const Suite& suite);
std::vector<EpisodeCard> parse_suite_jsonl(std::string_view text);

}  // namespace toolfault
