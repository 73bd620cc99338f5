#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolfault/rational.hpp"
#include "toolfault/taxonomy.hpp"

namespace toolfault {

struct RetryWithBackoff {
  int max_attempts = 3;
  std::int64_t base_delay_ms = 500;
  std::int64_t cap_ms = 8000;
  bool respect_retry_after = true;

  friend bool operator==(const RetryWithBackoff&, const RetryWithBackoff&) = default;
};

struct ReformatArguments {
  std::string hint;
  friend bool operator==(const ReformatArguments&, const ReformatArguments&) = default;
};

enum class SwitchStrategy { Alternative, Fallback };

struct SwitchTool {
  SwitchStrategy strategy = SwitchStrategy::Alternative;
  friend bool operator==(const SwitchTool&, const SwitchTool&) = default;
};

struct RefreshCredentials {
  friend bool operator==(const RefreshCredentials&, const RefreshCredentials&) = default;
};

enum class ValidationCheck { Url, Payload, Headers, Params };

struct ValidateAndReissue {
  ValidationCheck check = ValidationCheck::Params;
  friend bool operator==(const ValidateAndReissue&, const ValidateAndReissue&) = default;
};

struct LenientParse {
  friend bool operator==(const LenientParse&, const LenientParse&) = default;
};

// `report` is a template; {tool} and {error} are substituted when rendered.
struct TerminateGracefully {
  std::string report;
  friend bool operator==(const TerminateGracefully&, const TerminateGracefully&) = default;
};

struct WaitUntilHealthy {
  std::int64_t poll_interval_ms = 1000;
  std::int64_t max_wait_ms = 16000;
  friend bool operator==(const WaitUntilHealthy&, const WaitUntilHealthy&) = default;
};

using RecoveryAction =
    std::variant<RetryWithBackoff, ReformatArguments, SwitchTool, RefreshCredentials,
                 ValidateAndReissue, LenientParse, TerminateGracefully, WaitUntilHealthy>;

RecoveryTag tag_of(const RecoveryAction& action) noexcept;
std::string_view to_string(ValidationCheck c) noexcept;
std::string_view to_string(SwitchStrategy s) noexcept;

// Actions that may legally end a script.
bool is_terminal_capable(const RecoveryAction& action) noexcept;

nlohmann::json action_to_json(const RecoveryAction& action);
RecoveryAction action_from_json(const nlohmann::json& j);

// ErrorSignature template; unset fields are wildcards.
struct SignaturePattern {
  std::optional<ErrorClass> error_class;
  std::optional<std::string> kind;
  // Outer optional: bound or wildcard. A bound empty inner value means the
  // pattern requires the status to be absent (non-HTTP failures).
  std::optional<std::optional<int>> status_code;
  // Sorted, de-duplicated message tokens.
  std::optional<std::vector<std::string>> message_tokens;

  bool fully_wildcard() const noexcept {
    return !error_class && !kind && !status_code && !message_tokens;
  }

  static SignaturePattern exact(const ErrorSignature& sig);

  friend bool operator==(const SignaturePattern&, const SignaturePattern&) = default;
};

struct DialogueLine {
  std::string from;
  std::string value;
  friend bool operator==(const DialogueLine&, const DialogueLine&) = default;
};

struct RecoveryExemplar {
  std::string id;
  SignaturePattern pattern;
  std::vector<RecoveryAction> script;
  std::string rationale;
  std::vector<DialogueLine> dialogue_template;
};

struct DistanceWeights {
  std::int64_t error_class = 4;
  std::int64_t kind = 2;
  std::int64_t status = 1;
  std::int64_t message = 1;
};

// d = w_class*[class mismatch] + w_kind*[kind mismatch] + w_status*[status
// mismatch] + w_message*(1 - Jaccard(tokens)); wildcards contribute 0.
// Throws BankError("FullyWildcardPattern") for an all-wildcard pattern.
Rational similarity_distance(const ErrorSignature& observed, const SignaturePattern& pattern,
                             const DistanceWeights& weights = {});

struct BankOptions {
  bool require_full_coverage = true;
  DistanceWeights weights;
};

// Immutable after construction; retrieval is a pure function over it.
class ExemplarBank {
 public:
  // Validates all invariants; throws BankError naming the offending id.
  ExemplarBank(std::string version, std::vector<RecoveryExemplar> exemplars,
               const BankOptions& options = {}, const Catalog& catalog = Catalog::shipped());

  // Accepts both flat "exemplars" and grouped "branches" entries; a branch
  // key such as "401_403_407" expands to one exemplar per status code.
  static ExemplarBank from_json(const nlohmann::json& doc, const BankOptions& options = {},
                                const Catalog& catalog = Catalog::shipped());
  static const ExemplarBank& shipped();

  const std::string& version() const noexcept { return version_; }
  const std::vector<RecoveryExemplar>& exemplars() const noexcept { return exemplars_; }
  std::size_t size() const noexcept { return exemplars_.size(); }
  const DistanceWeights& weights() const noexcept { return weights_; }
  const RecoveryExemplar* find(std::string_view id) const noexcept;

  // Class an exemplar's pattern resolves to (bound class, else the kind's).
  std::optional<ErrorClass> pattern_class(const RecoveryExemplar& e) const;

  // Copy with every exemplar bound to one of `kinds` removed. Coverage is
  // not re-checked; callers that need it use covers().
  ExemplarBank without_kinds(const std::set<std::string>& kinds) const;
  bool covers(ErrorClass c) const;

  nlohmann::json to_json() const;

 private:
  ExemplarBank() = default;

  std::string version_;
  std::vector<RecoveryExemplar> exemplars_;
  DistanceWeights weights_;
  const Catalog* catalog_ = nullptr;
};

struct Retrieval {
  const RecoveryExemplar* exemplar = nullptr;
  Rational distance;
};

// Minimum distance; ties go to the lexicographically smallest id.
const RecoveryExemplar& retrieve(const ExemplarBank& bank, const ErrorSignature& observed);

// The k best by (distance, id).
std::vector<Retrieval> retrieve_top_k(const ExemplarBank& bank, const ErrorSignature& observed,
                                      std::size_t k);

ExemplarBank load_bank(const std::filesystem::path& path, const BankOptions& options = {});

}  // namespace toolfault
