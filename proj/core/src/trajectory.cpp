#include "toolfault/trajectory.hpp"

#include <array>

#include "toolfault/error.hpp"

namespace toolfault {

namespace {

constexpr std::array<std::string_view, 4> kRoleNames = {"system", "user", "assistant", "function"};
constexpr std::array<std::string_view, 4> kTerminalNames = {"Finished", "GracefulFailure",
                                                            "Abandoned", "StepBudgetExhausted"};

nlohmann::json terminal_json(const std::optional<Terminal>& t) {
  if (!t) return nullptr;
  return {{"kind", to_string(t->kind)}, {"text", t->text}};
}

}  // namespace

std::string_view to_string(Role r) noexcept { return kRoleNames[static_cast<std::size_t>(r)]; }

Role parse_role(std::string_view label) {
  for (std::size_t i = 0; i < kRoleNames.size(); ++i) {
    if (kRoleNames[i] == label) return static_cast<Role>(i);
  }
  throw MalformedTrace("unknown role '" + std::string(label) + "'");
}

bool has_recovery_prefix(std::string_view content) noexcept {
  return content.starts_with(kRecoveryPrefix);
}

Turn make_turn(Role role, std::string content, std::int64_t time_ms) {
  Turn t;
  t.role = role;
  t.is_recovery = role == Role::Assistant && has_recovery_prefix(content);
  t.content = std::move(content);
  t.simulated_time_ms = time_ms;
  return t;
}

void to_json(nlohmann::json& j, const InjectionPlan& p) {
  j = nlohmann::json::object();
  j["kind"] = p.kind ? nlohmann::json(*p.kind) : nlohmann::json(nullptr);
  j["manifestation"] = to_string(p.manifestation);
  j["turn_index"] = p.turn_index;
  j["cascade"] = p.cascade ? nlohmann::json{{"kind", p.cascade->kind},
                                            {"turn_index", p.cascade->turn_index}}
                           : nlohmann::json(nullptr);
  j["profile"] = {{"persistence", p.profile.persistence},
                  {"window_ms", p.profile.window_ms},
                  {"retry_after_ms", p.profile.retry_after_ms ? nlohmann::json(*p.profile.retry_after_ms)
                                                              : nlohmann::json(nullptr)}};
  j["seed"] = p.seed;
}

void from_json(const nlohmann::json& j, InjectionPlan& p) {
  p = InjectionPlan{};
  if (j.contains("kind") && !j["kind"].is_null()) p.kind = j["kind"].get<std::string>();
  p.manifestation = parse_manifestation(j.value("manifestation", "ErrorPayload"));
  p.turn_index = j.value("turn_index", 1);
  if (j.contains("cascade") && !j["cascade"].is_null()) {
    p.cascade = CascadeFault{j["cascade"].at("kind").get<std::string>(),
                             j["cascade"].at("turn_index").get<int>()};
  }
  if (j.contains("profile")) {
    const auto& pr = j["profile"];
    p.profile.persistence = pr.value("persistence", 1);
    p.profile.window_ms = pr.value("window_ms", std::int64_t{0});
    if (pr.contains("retry_after_ms") && !pr["retry_after_ms"].is_null()) {
      p.profile.retry_after_ms = pr["retry_after_ms"].get<std::int64_t>();
    }
  }
  p.seed = j.value("seed", std::uint64_t{0});
}

void validate(const InjectionPlan& plan, const Catalog& catalog) {
  if (plan.turn_index < 1) throw ConfigError("injection turn_index must be >= 1");
  if (plan.profile.persistence < 1) throw ConfigError("fault persistence must be >= 1");
  if (plan.clean()) {
    if (plan.cascade) throw ConfigError("a clean plan cannot carry a cascade");
    return;
  }
  catalog.at(*plan.kind);
  if (plan.cascade) {
    catalog.at(plan.cascade->kind);
    if (plan.cascade->turn_index <= plan.turn_index) {
      throw ConfigError("cascade turn must come after the primary turn");
    }
  }
}

std::string_view to_string(TerminalKind k) noexcept {
  return kTerminalNames[static_cast<std::size_t>(k)];
}

TerminalKind parse_terminal_kind(std::string_view label) {
  for (std::size_t i = 0; i < kTerminalNames.size(); ++i) {
    if (kTerminalNames[i] == label) return static_cast<TerminalKind>(i);
  }
  throw MalformedTrace("unknown terminal kind '" + std::string(label) + "'");
}

int Trajectory::assistant_turns() const noexcept {
  int n = 0;
  for (const auto& t : turns) n += t.role == Role::Assistant ? 1 : 0;
  return n;
}

nlohmann::json messages_json(const std::vector<Turn>& turns) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : turns) {
    arr.push_back({{"role", to_string(t.role)},
                   {"content", nlohmann::json::array({{{"type", "text"}, {"text", t.content}}})}});
  }
  return arr;
}

std::string serialize_trajectory(const Trajectory& t) {
  nlohmann::json turn_ms = nlohmann::json::array();
  for (const auto& turn : t.turns) turn_ms.push_back(turn.simulated_time_ms);
  nlohmann::json injections = nlohmann::json::array();
  for (const auto& r : t.injections) {
    injections.push_back({{"turn", r.turn}, {"call_index", r.call_index}, {"kind", r.kind}});
  }
  nlohmann::json sidecar = {
      {"episode_id", t.episode_id},
      {"plan", t.plan},
      {"terminal", terminal_json(t.terminal)},
      {"timings", {{"turn_ms", turn_ms}, {"simulated_ms", t.simulated_ms()}}},
      {"injections", injections},
      {"tool_calls", t.tool_calls},
      {"protocol_errors", t.protocol_errors},
  };
  nlohmann::json doc = {{"messages", messages_json(t.turns)}, {"sidecar", sidecar}};
  return doc.dump();
}

Trajectory parse_trajectory(std::string_view line) {
  nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw MalformedTrace("trajectory line is not a JSON object");
  Trajectory t;
  try {
    const auto& messages = doc.at("messages");
    const nlohmann::json sidecar = doc.value("sidecar", nlohmann::json::object());
    const nlohmann::json timings = sidecar.value("timings", nlohmann::json::object());
    const nlohmann::json turn_ms = timings.value("turn_ms", nlohmann::json::array());
    for (std::size_t i = 0; i < messages.size(); ++i) {
      const auto& m = messages[i];
      std::string text;
      const auto& content = m.at("content");
      if (content.is_string()) {
        text = content.get<std::string>();
      } else {
        for (const auto& part : content) text += part.value("text", "");
      }
      const std::int64_t ms = i < turn_ms.size() ? turn_ms[i].get<std::int64_t>() : 0;
      t.turns.push_back(make_turn(parse_role(m.at("role").get<std::string>()), std::move(text), ms));
    }
    t.episode_id = sidecar.value("episode_id", "");
    if (sidecar.contains("plan")) t.plan = sidecar["plan"].get<InjectionPlan>();
    if (sidecar.contains("terminal") && !sidecar["terminal"].is_null()) {
      t.terminal = Terminal{parse_terminal_kind(sidecar["terminal"].at("kind").get<std::string>()),
                            sidecar["terminal"].value("text", "")};
    }
    for (const auto& r : sidecar.value("injections", nlohmann::json::array())) {
      t.injections.push_back({r.at("turn").get<std::size_t>(), r.at("call_index").get<int>(),
                              r.at("kind").get<std::string>()});
    }
    t.tool_calls = sidecar.value("tool_calls", 0);
    t.protocol_errors = sidecar.value("protocol_errors", 0);
  } catch (const MalformedTrace&) {
    throw;
  } catch (const std::exception& e) {
    throw MalformedTrace(std::string("trajectory: ") + e.what());
  }
  return t;
}

void validate_structure(const Trajectory& t) {
  if (t.turns.size() < 2) throw MalformedTrace("a trajectory needs a system and a user turn");
  if (t.turns[0].role != Role::System) throw MalformedTrace("first turn must be system");
  if (t.turns[1].role != Role::User) throw MalformedTrace("second turn must be user");
  std::int64_t last = 0;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const Turn& turn = t.turns[i];
    if (i >= 2 && turn.role == Role::System) {
      throw MalformedTrace("system turn at position " + std::to_string(i));
    }
    if (turn.role == Role::Function && t.turns[i - 1].role != Role::Assistant) {
      throw MalformedTrace("function turn at position " + std::to_string(i) +
                           " does not follow an assistant turn");
    }
    const bool expect = turn.role == Role::Assistant && has_recovery_prefix(turn.content);
    if (turn.is_recovery != expect) {
      throw MalformedTrace("is_recovery mismatch at position " + std::to_string(i));
    }
    if (turn.simulated_time_ms < last) {
      throw MalformedTrace("simulated clock decreases at position " + std::to_string(i));
    }
    last = turn.simulated_time_ms;
  }
}

}  // namespace toolfault
