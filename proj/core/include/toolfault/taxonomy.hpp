#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace toolfault {

// The seven tool-use error classes.
enum class ErrorClass {
  ToolHallucination,
  ArgumentHallucination,
  InvalidToolInvocation,
  PartialExecution,
  OutputHallucination,
  InvalidIntermediateReasoning,
  ReentrantFailure,
};

inline constexpr std::array<ErrorClass, 7> kAllErrorClasses = {
    ErrorClass::ToolHallucination,     ErrorClass::ArgumentHallucination,
    ErrorClass::InvalidToolInvocation, ErrorClass::PartialExecution,
    ErrorClass::OutputHallucination,   ErrorClass::InvalidIntermediateReasoning,
    ErrorClass::ReentrantFailure,
};

std::string_view to_string(ErrorClass c) noexcept;
std::optional<ErrorClass> try_parse_error_class(std::string_view label) noexcept;
// Throws Error("UnknownErrorClass") for anything but the seven labels.
ErrorClass parse_error_class(std::string_view label);

// How a failure shows up in the function-turn text.
enum class Manifestation {
  ErrorPayload,     // structured error body
  MalformedOutput,  // syntactically broken body
  SilentFailure,    // empty response
  PartialOutput,    // truncated but valid body
};

std::string_view to_string(Manifestation m) noexcept;
Manifestation parse_manifestation(std::string_view label);

// Names of the corrective actions. Shared by the failure catalog (which
// actions resolve a failure) and the recovery bank (which actions a script
// performs).
enum class RecoveryTag {
  RetryWithBackoff,
  ReformatArguments,
  SwitchTool,
  RefreshCredentials,
  ValidateAndReissue,
  LenientParse,
  TerminateGracefully,
  WaitUntilHealthy,
};

std::string_view to_string(RecoveryTag t) noexcept;
std::optional<RecoveryTag> try_parse_recovery_tag(std::string_view label) noexcept;

// What resolves a failure in the simulator. A transient failure clears for
// any reissue once its persistence and recovery window are spent; `accepts`
// lists actions that resolve it regardless.
struct Remedy {
  bool transient = false;
  std::vector<RecoveryTag> accepts;

  bool accepts_tag(RecoveryTag t) const noexcept;
};

// Retry semantics used to partition the catalog.
enum class Disposition { Retryable, Correctable, Terminal };

std::string_view to_string(Disposition d) noexcept;

struct FailureKind {
  std::string id;
  ErrorClass error_class = ErrorClass::InvalidToolInvocation;
  Manifestation default_manifestation = Manifestation::ErrorPayload;
  std::string example_output;
  std::optional<int> http_status;
  Remedy remedy;
  bool injectable = true;

  Disposition disposition() const noexcept;
};

// Immutable after load; safe for concurrent reads.
class Catalog {
 public:
  static Catalog from_json(const nlohmann::json& doc);
  static const Catalog& shipped();

  const std::string& version() const noexcept { return version_; }
  const std::vector<FailureKind>& kinds() const noexcept { return kinds_; }

  const FailureKind* find(std::string_view id) const noexcept;
  const FailureKind& at(std::string_view id) const;
  std::vector<const FailureKind*> kinds_in(ErrorClass c, bool injectable_only = true) const;

  const FailureKind* by_status(int status) const noexcept;
  const FailureKind* by_exception(std::string_view name) const noexcept;
  const FailureKind* by_message(std::string_view message) const noexcept;
  const FailureKind* by_manifestation(Manifestation m) const noexcept;

  nlohmann::json to_json() const;

 private:
  std::string version_;
  std::vector<FailureKind> kinds_;
};

struct ErrorSignature {
  ErrorClass error_class = ErrorClass::InvalidToolInvocation;
  std::string kind;
  std::optional<int> status_code;
  std::string message;
  std::string tool_name;
  int turn_index = 0;
  Manifestation manifestation = Manifestation::ErrorPayload;
  // Server-supplied wait hint; not part of the canonical key.
  std::optional<std::int64_t> retry_after_ms;

  friend bool operator==(const ErrorSignature&, const ErrorSignature&) = default;
};

void to_json(nlohmann::json& j, const ErrorSignature& s);
void from_json(const nlohmann::json& j, ErrorSignature& s);

// Throws Error("InvalidSignature") if the signature breaks its invariants.
void validate(const ErrorSignature& sig);

struct FailureContext {
  std::string tool_name;
  int turn_index = 0;
};

inline constexpr std::string_view kUnknownKind = "unknown";

// Total: unrecognized text becomes kind "unknown" / InvalidToolInvocation.
ErrorSignature classify_raw_failure(std::string_view raw, const FailureContext& context,
                                    const Catalog& catalog = Catalog::shipped());

// Like classify_raw_failure, but returns nullopt when the text reads as a
// successful tool output.
std::optional<ErrorSignature> detect_failure(std::string_view raw, const FailureContext& context,
                                             const Catalog& catalog = Catalog::shipped());

// Lowercased, digit-stripped, alphanumeric tokens in sorted order.
std::vector<std::string> message_tokens(std::string_view message);

// kind|status|tokens. Equal for messages differing only in token order,
// case, whitespace, or embedded digits.
std::string canonical_key(const ErrorSignature& sig);

}  // namespace toolfault
