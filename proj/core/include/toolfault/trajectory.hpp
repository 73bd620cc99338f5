#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolfault/taxonomy.hpp"

namespace toolfault {

enum class Role { System, User, Assistant, Function };

std::string_view to_string(Role r) noexcept;
Role parse_role(std::string_view label);

inline constexpr std::string_view kRecoveryPrefix = "Recovery:";

bool has_recovery_prefix(std::string_view content) noexcept;

struct Turn {
  Role role = Role::System;
  std::string content;
  bool is_recovery = false;
  std::int64_t simulated_time_ms = 0;

  friend bool operator==(const Turn&, const Turn&) = default;
};

// Builds a turn with is_recovery derived from role and content.
Turn make_turn(Role role, std::string content, std::int64_t time_ms);

// How long an injected fault persists. Transient faults clear for a reissue
// once `persistence` serves have failed and `window_ms` has elapsed since
// injection.
struct FaultProfile {
  int persistence = 1;
  std::int64_t window_ms = 0;
  std::optional<std::int64_t> retry_after_ms;

  friend bool operator==(const FaultProfile&, const FaultProfile&) = default;
};

struct CascadeFault {
  std::string kind;
  int turn_index = 2;

  friend bool operator==(const CascadeFault&, const CascadeFault&) = default;
};

// `turn_index` counts tool calls (1-based) across the whole episode,
// retries included. No kind means a clean episode.
struct InjectionPlan {
  std::optional<std::string> kind;
  Manifestation manifestation = Manifestation::ErrorPayload;
  int turn_index = 1;
  std::optional<CascadeFault> cascade;
  FaultProfile profile;
  std::uint64_t seed = 0;

  bool clean() const noexcept { return !kind.has_value(); }

  friend bool operator==(const InjectionPlan&, const InjectionPlan&) = default;
};

void to_json(nlohmann::json& j, const InjectionPlan& p);
void from_json(const nlohmann::json& j, InjectionPlan& p);

// Throws ConfigError on turn_index < 1, a cascade not after the primary turn
// or a cascade on a clean plan; Error("UnknownFailureKind") on unknown kinds.
void validate(const InjectionPlan& plan, const Catalog& catalog = Catalog::shipped());

enum class TerminalKind { Finished, GracefulFailure, Abandoned, StepBudgetExhausted };

std::string_view to_string(TerminalKind k) noexcept;
TerminalKind parse_terminal_kind(std::string_view label);

// `text` is the answer for Finished, the report for GracefulFailure and the
// reason otherwise.
struct Terminal {
  TerminalKind kind = TerminalKind::Finished;
  std::string text;

  friend bool operator==(const Terminal&, const Terminal&) = default;
};

// A failure the simulator injected (not re-serves of a persisting fault).
struct InjectionRecord {
  std::size_t turn = 0;  // position in Trajectory::turns
  int call_index = 0;
  std::string kind;

  friend bool operator==(const InjectionRecord&, const InjectionRecord&) = default;
};

struct Trajectory {
  std::string episode_id;
  std::vector<Turn> turns;
  InjectionPlan plan;
  std::optional<Terminal> terminal;
  std::vector<InjectionRecord> injections;
  int tool_calls = 0;
  int protocol_errors = 0;

  std::int64_t simulated_ms() const noexcept {
    return turns.empty() ? 0 : turns.back().simulated_time_ms;
  }
  int assistant_turns() const noexcept;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// Turn list in the chat-message shape:
// [{"role": ..., "content": [{"type": "text", "text": ...}]}, ...]
nlohmann::json messages_json(const std::vector<Turn>& turns);

// One line: {"messages": [...], "sidecar": {episode_id, plan, terminal, timings, ...}}.
std::string serialize_trajectory(const Trajectory& t);
// Throws MalformedTrace.
Trajectory parse_trajectory(std::string_view line);

// Role order (system, user, then non-system turns), the is_recovery rule and
// clock monotonicity. Throws MalformedTrace.
void validate_structure(const Trajectory& t);

}  // namespace toolfault
