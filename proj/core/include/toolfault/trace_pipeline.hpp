#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "toolfault/error.hpp"
#include "toolfault/rational.hpp"
#include "toolfault/recovery_bank.hpp"
#include "toolfault/remote_chat.hpp"
#include "toolfault/tools.hpp"
#include "toolfault/trajectory.hpp"

namespace toolfault {

class TeacherFailure : public Error {
 public:
  explicit TeacherFailure(const std::string& what) : Error("TeacherFailure", what) {}
};

class InsufficientTraces : public Error {
 public:
  explicit InsufficientTraces(const std::string& what) : Error("InsufficientTraces", what) {}
};

struct FirstFailure {
  std::size_t turn = 0;  // position in Trajectory::turns
  ErrorSignature signature;
};

// Earliest function turn that reads as a failure. Throws MalformedTrace on
// bad role order.
std::optional<FirstFailure> detect_first_failure(const Trajectory& trace,
                                                 const Catalog& catalog = Catalog::shipped());

// Turns up to and including `turn`; terminal cleared.
Trajectory truncate_at(const Trajectory& trace, std::size_t turn);

struct RepairRequest {
  std::string task;
  ToolRegistry tools;
  Trajectory truncated;  // ends at the first failure
  ErrorSignature error;
  // Remaining work after the failure. Without a plan the teacher only
  // recovers the failing call and finishes on its output.
  std::optional<TaskPlan> plan;
};

class Teacher {
 public:
  virtual ~Teacher() = default;
  virtual std::string name() const = 0;
  // Returns the full repaired trajectory. Throws TeacherFailure.
  virtual Trajectory continue_trace(const RepairRequest& request) const = 0;
};

// Plays the nearest same-class exemplar's script against the scripted
// tools, with thoughts taken from the exemplar's dialogue template.
class RuleBasedTeacher : public Teacher {
 public:
  explicit RuleBasedTeacher(const ExemplarBank& bank, int retry_budget = 3, std::int64_t turn_cost_ms = 100)
      : bank_(bank), retry_budget_(retry_budget), turn_cost_ms_(turn_cost_ms) {}
  std::string name() const override { return "rule"; }
  Trajectory continue_trace(const RepairRequest& request) const override;

 private:
  const ExemplarBank& bank_;
  int retry_budget_;
  std::int64_t turn_cost_ms_;
};

// Asks a chat-completion model for each continuation turn; tool calls are
// answered from the scripted registry with the fault considered cleared.
class RemoteTeacher : public Teacher {
 public:
  explicit RemoteTeacher(RemoteEndpoint endpoint, int max_turns = 12)
      : policy_(std::move(endpoint)), max_turns_(max_turns) {}
  std::string name() const override { return "remote"; }
  Trajectory continue_trace(const RepairRequest& request) const override;

 private:
  RemoteChatPolicy policy_;
  int max_turns_;
};

// Runs the teacher and checks the result: prefix unchanged, first appended
// assistant turn is a recovery turn, every appended assistant turn parses,
// and the episode ends Finished or GracefulFailure. Throws TeacherFailure.
Trajectory repair(const RepairRequest& request, const Teacher& teacher);

// Audits a clean trace: structure, grammar, no failures, no recovery turns.
// A trace without a Finish gets one built from the last successful tool
// output. Throws MalformedTrace.
Trajectory finalize(const std::string& task, const ToolRegistry& tools, const Trajectory& trace);

struct RecoverySpan {
  std::size_t turn = 0;
  std::size_t start = 0;  // character offsets into the turn content
  std::size_t end = 0;

  friend bool operator==(const RecoverySpan&, const RecoverySpan&) = default;
};

// One span per recovery turn: everything after the "Recovery:" prefix.
std::vector<RecoverySpan> extract_recovery_spans(const Trajectory& trace);

struct CorpusSpec {
  int target_size = 100;
  Rational recovery_fraction{4, 5};
  std::uint64_t seed = 0;

  // Throws ConfigError: target >= 1, fraction in (0, 1).
  void validate() const;
};

struct Corpus {
  std::vector<Trajectory> traces;
  nlohmann::json spans;     // {episode_id: [[turn, start, end], ...]}
  nlohmann::json manifest;  // counts, fractions, seed, bank version
};

// Hash of the task a trace was produced for (system and user turns).
std::uint64_t trace_task_hash(const Trajectory& trace);

// Dedups repaired traces on (first failure canonical key, task hash) and
// clean traces on task hash, then draws round(target * fraction) repaired
// and the rest clean with a seeded shuffle. Throws InsufficientTraces.
Corpus compose_corpus(const std::vector<Trajectory>& repaired, const std::vector<Trajectory>& clean,
                      const CorpusSpec& spec, const std::string& bank_version = {});

// corpus.jsonl, spans.json and manifest.json under `dir`.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace toolfault
