#include "toolfault/trace_pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "toolfault/action_grammar.hpp"
#include "toolfault/agents.hpp"
#include "toolfault/call_analysis.hpp"
#include "toolfault/hashing.hpp"
#include "toolfault/rng.hpp"
#include "toolfault/simulator.hpp"

namespace toolfault {

namespace {

constexpr std::uint64_t kTeacherBackoffStream = 0x746561636865ULL;

std::optional<ToolCall> call_of(const std::string& assistant_text) {
  try {
    const AgentAction a = parse_action(assistant_text);
    if (const auto* c = std::get_if<CallAction>(&a)) return c->call;
    if (const auto* r = std::get_if<RecoveryStep>(&a)) return r->call;
  } catch (const ProtocolError&) {
  }
  return std::nullopt;
}

std::optional<std::string> scripted_response(const ToolRegistry& tools, const ToolCall& call) {
  const ToolSpec* tool = tools.find(call.name);
  if (tool == nullptr) return std::nullopt;
  const auto it = tool->scripted_responses.find(canonical_call_key(call.name, call.arguments));
  if (it == tool->scripted_responses.end()) return std::nullopt;
  return it->second;
}

// Template lines read "Thoughts: ...\n\nAction: ..."; a thought must stay on
// one line of the action grammar.
std::string flatten_thought(std::string text) {
  if (text.starts_with("Thoughts:")) text.erase(0, 9);
  for (std::size_t pos = text.find("\n\nAction:"); pos != std::string::npos; pos = text.find("\n\nAction:")) {
    text.replace(pos, 9, " Next:");
  }
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::string out;
  for (char c : text) {
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    out += c;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string fill(std::string text, const std::string& tool, const ErrorSignature& sig) {
  return render_report(std::move(text), tool, sig);
}

// Appends turns to a trajectory with the simulator's clock convention.
class TraceWriter {
 public:
  TraceWriter(Trajectory& t, std::int64_t turn_cost_ms) : t_(t), cost_(turn_cost_ms), clock_(t.simulated_ms()) {}

  void act(const AgentAction& action, std::int64_t delay_ms = 0) {
    clock_ += cost_ + delay_ms;
    t_.turns.push_back(make_turn(Role::Assistant, render_action(action), clock_));
    if (const auto* f = std::get_if<FinishAction>(&action)) t_.terminal = Terminal{TerminalKind::Finished, f->answer};
    if (const auto* g = std::get_if<GiveUpAction>(&action)) {
      t_.terminal = Terminal{TerminalKind::GracefulFailure, g->report};
    }
  }

  void observe(std::string content) {
    ++t_.tool_calls;
    t_.turns.push_back(make_turn(Role::Function, std::move(content), clock_));
  }

 private:
  Trajectory& t_;
  std::int64_t cost_;
  std::int64_t clock_;
};

void check_tail(const RepairRequest& request) {
  const auto& turns = request.truncated.turns;
  if (turns.size() < 4 || turns.back().role != Role::Function) {
    throw TeacherFailure("truncated trace must end at a failing function turn");
  }
}

}  // namespace

std::optional<FirstFailure> detect_first_failure(const Trajectory& trace, const Catalog& catalog) {
  validate_structure(trace);
  for (std::size_t i = 0; i < trace.turns.size(); ++i) {
    if (trace.turns[i].role != Role::Function) continue;
    const auto call = call_of(trace.turns[i - 1].content);
    const std::string tool = call ? call->name : std::string();
    if (auto sig = detect_failure(trace.turns[i].content, {tool, static_cast<int>(i)}, catalog)) {
      return FirstFailure{i, *sig};
    }
  }
  return std::nullopt;
}

Trajectory truncate_at(const Trajectory& trace, std::size_t turn) {
  if (turn >= trace.turns.size()) throw MalformedTrace("truncation point past the end of the trace");
  Trajectory out = trace;
  out.turns.resize(turn + 1);
  out.terminal.reset();
  std::erase_if(out.injections, [&](const InjectionRecord& r) { return r.turn > turn; });
  out.tool_calls = static_cast<int>(std::count_if(out.turns.begin(), out.turns.end(),
                                                  [](const Turn& t) { return t.role == Role::Function; }));
  return out;
}

Trajectory RuleBasedTeacher::continue_trace(const RepairRequest& request) const {
  check_tail(request);
  Trajectory out = request.truncated;
  const auto origin_opt = call_of(out.turns[out.turns.size() - 2].content);
  if (!origin_opt) throw TeacherFailure("failure does not follow a tool call");
  const ToolCall origin = *origin_opt;
  const ErrorSignature& sig = request.error;

  const RecoveryExemplar* exemplar = nullptr;
  for (const auto& r : retrieve_top_k(bank_, sig, bank_.size())) {
    if (bank_.pattern_class(*r.exemplar) == sig.error_class) {
      exemplar = r.exemplar;
      break;
    }
  }
  if (exemplar == nullptr) {
    throw TeacherFailure("bank has no exemplar of class " + std::string(to_string(sig.error_class)));
  }

  const FailureKind* kind = Catalog::shipped().find(sig.kind);
  const auto alternatives = request.tools.alternatives(origin.name);
  const std::vector<RecoveryAction> flat = flatten_script(exemplar->script, !alternatives.empty(), retry_budget_);

  std::vector<std::string> thoughts;
  for (const auto& line : exemplar->dialogue_template) {
    if (line.from == "Assistant" || line.from == "assistant") thoughts.push_back(flatten_thought(fill(line.value, origin.name, sig)));
  }
  const auto thought_for = [&](std::size_t i, const RecoveryAction& a) {
    if (i < thoughts.size() && !thoughts[i].empty()) return thoughts[i];
    return "Applying " + std::string(to_string(tag_of(a))) + " for " + sig.kind + " on " + origin.name + ".";
  };

  TraceWriter w(out, turn_cost_ms_);
  const std::string failure_text = out.turns.back().content;
  std::optional<std::string> recovered;
  ToolCall current = origin;
  std::string report;
  int attempt = 0;
  std::size_t i = 0;
  for (; i < flat.size() && !recovered; ++i) {
    const RecoveryAction& a = flat[i];
    if (const auto* t = std::get_if<TerminateGracefully>(&a)) {
      report = t->report;
      break;
    }
    ToolCall call = std::holds_alternative<SwitchTool>(a) ? ToolCall{alternatives.front()->name, origin.arguments}
                                                          : current;
    std::int64_t delay = 0;
    if (const auto* r = std::get_if<RetryWithBackoff>(&a)) {
      delay = backoff_delay(++attempt, *r, sig.retry_after_ms,
                            mix_seed(mix_seed(out.plan.seed, kTeacherBackoffStream), out.turns.size()));
    } else if (const auto* h = std::get_if<WaitUntilHealthy>(&a)) {
      delay = h->poll_interval_ms;
    }
    w.act(RecoveryStep{a, thought_for(i, a), call}, delay);
    const RecoveryTag tag = tag_of(a);
    const bool transient_reissue =
        kind != nullptr && kind->remedy.transient &&
        (tag == RecoveryTag::RetryWithBackoff || tag == RecoveryTag::WaitUntilHealthy);
    const bool clears = tag == RecoveryTag::SwitchTool || transient_reissue ||
                        (kind != nullptr && kind->remedy.accepts_tag(tag));
    current = call;
    if (clears) {
      recovered = scripted_response(request.tools, call);
      if (!recovered) throw TeacherFailure("no scripted response for " + call.name);
      w.observe(*recovered);
    } else {
      w.observe(failure_text);
    }
  }
  if (!recovered && report.empty() && current.name == origin.name && !alternatives.empty()) {
    ToolCall call{alternatives.front()->name, origin.arguments};
    w.act(RecoveryStep{SwitchTool{}, "The script did not resolve the failure; switching to " + call.name + ".", call});
    recovered = scripted_response(request.tools, call);
    if (!recovered) throw TeacherFailure("no scripted response for " + call.name);
    w.observe(*recovered);
  }
  if (!recovered) {
    if (report.empty()) {
      for (const auto& a : flat) {
        if (const auto* t = std::get_if<TerminateGracefully>(&a)) report = t->report;
      }
    }
    w.act(GiveUpAction{"The failure is not recoverable here; reporting it.", render_report(report, origin.name, sig), true});
    return out;
  }

  if (!request.plan) {
    w.act(FinishAction{"The call succeeded after recovery.", answer_from_response(*recovered)});
    return out;
  }
  const TaskPlan& plan = *request.plan;
  for (;;) {
    const CallView view = analyze_calls(out.turns, &plan, request.tools);
    const int step = next_open_step(view, plan);
    if (step == static_cast<int>(plan.steps.size())) break;
    const TaskStep& s = plan.steps[static_cast<std::size_t>(step)];
    ToolCall call{s.tool, s.arguments};
    const auto response = scripted_response(request.tools, call);
    if (!response) throw TeacherFailure("no scripted response for step " + std::to_string(step + 1));
    w.act(CallAction{"Step " + std::to_string(step + 1) + " of the plan: call " + s.tool + ".", call});
    w.observe(*response);
    if (!step_completed(analyze_calls(out.turns, &plan, request.tools), step)) {
      throw TeacherFailure("plan step " + std::to_string(step + 1) + " does not match the trace");
    }
  }
  const TaskStep& last = plan.steps.back();
  const auto final_body = scripted_response(request.tools, ToolCall{last.tool, last.arguments});
  w.act(FinishAction{"All steps completed.", answer_from_response(final_body.value_or(*recovered))});
  return out;
}

Trajectory RemoteTeacher::continue_trace(const RepairRequest& request) const {
  check_tail(request);
  Trajectory out = request.truncated;
  TraceWriter w(out, 100);
  const std::optional<ErrorSignature> no_error;
  const std::optional<ErrorSignature> error = request.error;
  const Catalog& catalog = Catalog::shipped();
  for (int turn = 0; turn < max_turns_ && !out.terminal; ++turn) {
    const AgentContext ctx{out, turn == 0 ? error : no_error, request.tools, nullptr,
                           request.plan ? &*request.plan : nullptr, out.plan.seed, 3};
    AgentAction action;
    try {
      action = policy_.decide(ctx);
    } catch (const Error& e) {
      throw TeacherFailure(std::string("remote teacher: ") + e.what());
    }
    w.act(action);
    if (out.terminal) break;
    const ToolCall& call =
        std::holds_alternative<CallAction>(action) ? std::get<CallAction>(action).call : std::get<RecoveryStep>(action).call;
    const auto response = scripted_response(request.tools, call);
    w.observe(response ? *response : catalog.at("tool_not_found").example_output);
  }
  if (!out.terminal) throw TeacherFailure("remote teacher did not finish within " + std::to_string(max_turns_) + " turns");
  return out;
}

Trajectory repair(const RepairRequest& request, const Teacher& teacher) {
  Trajectory out = teacher.continue_trace(request);
  const auto& prefix = request.truncated.turns;
  if (out.turns.size() <= prefix.size() || !std::equal(prefix.begin(), prefix.end(), out.turns.begin())) {
    throw TeacherFailure(teacher.name() + " teacher altered the truncated prefix");
  }
  if (!out.turns[prefix.size()].is_recovery) {
    throw TeacherFailure(teacher.name() + " teacher did not open with a recovery turn");
  }
  for (std::size_t i = prefix.size(); i < out.turns.size(); ++i) {
    if (out.turns[i].role != Role::Assistant) continue;
    try {
      (void)parse_action(out.turns[i].content);
    } catch (const ProtocolError&) {
      throw TeacherFailure(teacher.name() + " teacher produced an unparsable turn");
    }
  }
  if (!out.terminal ||
      (out.terminal->kind != TerminalKind::Finished && out.terminal->kind != TerminalKind::GracefulFailure)) {
    throw TeacherFailure(teacher.name() + " teacher left the trace without Finish or a graceful failure");
  }
  try {
    validate_structure(out);
  } catch (const MalformedTrace& e) {
    throw TeacherFailure(e.what());
  }
  return out;
}

Trajectory finalize(const std::string& task, const ToolRegistry& tools, const Trajectory& trace) {
  (void)tools;
  validate_structure(trace);
  if (trace.turns.size() < 2 || trace.turns[1].content != task) {
    throw MalformedTrace("trace '" + trace.episode_id + "' is not for the given task");
  }
  if (detect_first_failure(trace)) {
    throw MalformedTrace("trace '" + trace.episode_id + "' contains a failure; route it to repair");
  }
  std::optional<std::string> last_output;
  for (std::size_t i = 2; i < trace.turns.size(); ++i) {
    const Turn& t = trace.turns[i];
    if (t.is_recovery) throw MalformedTrace("clean trace '" + trace.episode_id + "' has a recovery turn");
    if (t.role == Role::Function) {
      last_output = t.content;
      continue;
    }
    AgentAction a;
    try {
      a = parse_action(t.content);
    } catch (const ProtocolError&) {
      throw MalformedTrace("turn " + std::to_string(i) + " of '" + trace.episode_id + "' breaks the action grammar");
    }
    if (std::holds_alternative<GiveUpAction>(a)) {
      throw MalformedTrace("clean trace '" + trace.episode_id + "' gives up");
    }
    if (std::holds_alternative<FinishAction>(a)) {
      if (i + 1 != trace.turns.size()) throw MalformedTrace("turns after Finish in '" + trace.episode_id + "'");
      Trajectory out = trace;
      out.terminal = Terminal{TerminalKind::Finished, std::get<FinishAction>(a).answer};
      return out;
    }
  }
  if (!last_output) throw MalformedTrace("trace '" + trace.episode_id + "' has no tool output to finish from");
  Trajectory out = trace;
  TraceWriter w(out, 100);
  w.act(FinishAction{"All steps completed.", answer_from_response(*last_output)});
  return out;
}

std::vector<RecoverySpan> extract_recovery_spans(const Trajectory& trace) {
  std::vector<RecoverySpan> out;
  for (std::size_t i = 0; i < trace.turns.size(); ++i) {
    const Turn& t = trace.turns[i];
    if (t.is_recovery) out.push_back({i, kRecoveryPrefix.size(), t.content.size()});
  }
  return out;
}

void CorpusSpec::validate() const {
  if (target_size < 1) throw ConfigError("target_size must be >= 1");
  if (recovery_fraction <= Rational(0) || recovery_fraction >= Rational(1)) {
    throw ConfigError("recovery_fraction must be in (0, 1)");
  }
}

std::uint64_t trace_task_hash(const Trajectory& trace) {
  std::string key;
  for (std::size_t i = 0; i < trace.turns.size() && i < 2; ++i) key += trace.turns[i].content + "\n";
  return fnv1a64(key);
}

Corpus compose_corpus(const std::vector<Trajectory>& repaired, const std::vector<Trajectory>& clean,
                      const CorpusSpec& spec, const std::string& bank_version) {
  spec.validate();
  // Canonical order first so the draw does not depend on input order.
  const auto canonical = [](const std::vector<Trajectory>& in) {
    std::vector<std::pair<std::string, const Trajectory*>> v;
    for (const auto& t : in) v.emplace_back(serialize_trajectory(t), &t);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      return a.second->episode_id != b.second->episode_id ? a.second->episode_id < b.second->episode_id
                                                          : a.first < b.first;
    });
    return v;
  };

  std::vector<const Trajectory*> rec_pool;
  std::set<std::string> seen;
  int rec_duplicates = 0;
  for (const auto& [text, t] : canonical(repaired)) {
    const auto first = detect_first_failure(*t);
    if (!first) throw MalformedTrace("repaired trace '" + t->episode_id + "' has no failure");
    if (extract_recovery_spans(*t).empty()) {
      throw MalformedTrace("repaired trace '" + t->episode_id + "' has no recovery turn");
    }
    if (seen.insert(canonical_key(first->signature) + "#" + hex64(trace_task_hash(*t))).second) {
      rec_pool.push_back(t);
    } else {
      ++rec_duplicates;
    }
  }
  std::vector<const Trajectory*> clean_pool;
  std::set<std::uint64_t> seen_tasks;
  int clean_duplicates = 0;
  for (const auto& [text, t] : canonical(clean)) {
    if (!extract_recovery_spans(*t).empty()) {
      throw MalformedTrace("clean trace '" + t->episode_id + "' has a recovery turn");
    }
    if (seen_tasks.insert(trace_task_hash(*t)).second) {
      clean_pool.push_back(t);
    } else {
      ++clean_duplicates;
    }
  }

  const auto& f = spec.recovery_fraction;
  const auto n = static_cast<std::int64_t>(spec.target_size);
  const int n_rec = static_cast<int>((2 * n * f.num() + f.den()) / (2 * f.den()));
  const int n_clean = spec.target_size - n_rec;
  if (static_cast<int>(rec_pool.size()) < n_rec) {
    throw InsufficientTraces("need " + std::to_string(n_rec) + " repaired traces, have " +
                             std::to_string(rec_pool.size()) + " after dedup");
  }
  if (static_cast<int>(clean_pool.size()) < n_clean) {
    throw InsufficientTraces("need " + std::to_string(n_clean) + " clean traces, have " +
                             std::to_string(clean_pool.size()) + " after dedup");
  }

  Rng rng(spec.seed);
  const auto draw = [&](std::vector<const Trajectory*>& pool, int k) {
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
    pool.resize(static_cast<std::size_t>(k));
  };
  draw(rec_pool, n_rec);
  draw(clean_pool, n_clean);

  Corpus corpus;
  std::vector<const Trajectory*> chosen = rec_pool;
  chosen.insert(chosen.end(), clean_pool.begin(), clean_pool.end());
  for (std::size_t i = chosen.size(); i > 1; --i) std::swap(chosen[i - 1], chosen[rng.below(i)]);
  corpus.spans = nlohmann::json::object();
  for (const Trajectory* t : chosen) {
    corpus.traces.push_back(*t);
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& s : extract_recovery_spans(*t)) spans.push_back({s.turn, s.start, s.end});
    corpus.spans[t->episode_id] = spans;
  }
  corpus.manifest = {{"target_size", spec.target_size},
                     {"recovery_fraction", spec.recovery_fraction.to_string()},
                     {"seed", spec.seed},
                     {"bank_version", bank_version},
                     {"recovery_traces", n_rec},
                     {"clean_traces", n_clean},
                     {"achieved_recovery_fraction", Rational(n_rec, spec.target_size).to_string()},
                     {"pool", {{"repaired", repaired.size()}, {"clean", clean.size()}}},
                     {"duplicates_dropped", {{"repaired", rec_duplicates}, {"clean", clean_duplicates}}}};
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream jsonl(dir / "corpus.jsonl", std::ios::binary);
  for (const auto& t : corpus.traces) jsonl << serialize_trajectory(t) << '\n';
  std::ofstream(dir / "spans.json", std::ios::binary) << corpus.spans.dump(1) << '\n';
  std::ofstream(dir / "manifest.json", std::ios::binary) << corpus.manifest.dump(1) << '\n';
  if (!jsonl) throw Error("IoError", "cannot write corpus under " + dir.string());
}

}  // namespace toolfault
