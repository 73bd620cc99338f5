#include "toolfault/action_grammar.hpp"

#include <cctype>

#include "toolfault/error.hpp"
#include "toolfault/trajectory.hpp"

namespace toolfault {

namespace {

constexpr std::string_view kThought = "Thought:";
constexpr std::string_view kAction = "Action:";
constexpr std::string_view kActionInput = "Action Input:";
constexpr std::string_view kFinish = "Finish";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Position of `marker` at the start of a line, searching backwards so that
// thoughts quoting the marker do not confuse the parse.
std::size_t find_line_marker(std::string_view text, std::string_view marker) {
  std::size_t pos = text.rfind(marker);
  while (pos != std::string_view::npos) {
    if (pos == 0 || text[pos - 1] == '\n') return pos;
    pos = text.rfind(marker, pos - 1);
  }
  return std::string_view::npos;
}

std::string render(bool recovery, std::optional<RecoveryTag> tag, std::string_view thought,
                   std::string_view name, const nlohmann::json& input) {
  std::string out;
  if (recovery) {
    out += kRecoveryPrefix;
    out += ' ';
  }
  out += kThought;
  out += ' ';
  if (tag) {
    out += '[';
    out += to_string(*tag);
    out += "] ";
  }
  out += thought;
  out += '\n';
  out += kAction;
  out += ' ';
  out += name;
  out += '\n';
  out += kActionInput;
  out += ' ';
  out += input.dump();
  return out;
}

nlohmann::json finish_input(std::string_view return_type, std::string_view answer) {
  return {{"return_type", return_type}, {"final_answer", answer}};
}

}  // namespace

RecoveryAction default_action(RecoveryTag tag) {
  switch (tag) {
    case RecoveryTag::RetryWithBackoff: return RetryWithBackoff{};
    case RecoveryTag::ReformatArguments: return ReformatArguments{};
    case RecoveryTag::SwitchTool: return SwitchTool{};
    case RecoveryTag::RefreshCredentials: return RefreshCredentials{};
    case RecoveryTag::ValidateAndReissue: return ValidateAndReissue{};
    case RecoveryTag::LenientParse: return LenientParse{};
    case RecoveryTag::TerminateGracefully: return TerminateGracefully{};
    case RecoveryTag::WaitUntilHealthy: return WaitUntilHealthy{};
  }
  return RetryWithBackoff{};
}

std::string render_action(const AgentAction& action) {
  if (const auto* c = std::get_if<CallAction>(&action)) {
    return render(false, std::nullopt, c->thought, c->call.name, c->call.arguments);
  }
  if (const auto* r = std::get_if<RecoveryStep>(&action)) {
    return render(true, tag_of(r->action), r->thought, r->call.name, r->call.arguments);
  }
  if (const auto* f = std::get_if<FinishAction>(&action)) {
    return render(false, std::nullopt, f->thought, kFinish, finish_input("give_answer", f->answer));
  }
  const auto& g = std::get<GiveUpAction>(action);
  return render(g.recovery,
                g.recovery ? std::optional<RecoveryTag>(RecoveryTag::TerminateGracefully) : std::nullopt,
                g.thought, kFinish, finish_input("give_up_and_restart", g.report));
}

AgentAction parse_action(std::string_view text) {
  std::string_view body = trim(text);
  const bool recovery = has_recovery_prefix(body);
  if (recovery) body = trim(body.substr(kRecoveryPrefix.size()));

  const std::size_t action_pos = find_line_marker(body, kAction);
  if (action_pos == std::string_view::npos) {
    throw ProtocolError(std::string(text), "assistant turn has no 'Action:' line");
  }
  std::string_view thought = trim(body.substr(0, action_pos));
  if (thought.starts_with(kThought)) thought = trim(thought.substr(kThought.size()));

  std::optional<RecoveryTag> tag;
  if (thought.starts_with('[')) {
    const std::size_t close = thought.find(']');
    if (close != std::string_view::npos) {
      tag = try_parse_recovery_tag(thought.substr(1, close - 1));
      if (tag) thought = trim(thought.substr(close + 1));
    }
  }

  std::string_view rest = body.substr(action_pos + kAction.size());
  const std::size_t eol = rest.find('\n');
  const std::string_view name = trim(rest.substr(0, eol));
  if (name.empty()) throw ProtocolError(std::string(text), "empty action name");

  nlohmann::json input = nlohmann::json::object();
  if (eol != std::string_view::npos) {
    std::string_view after = trim(rest.substr(eol + 1));
    if (!after.starts_with(kActionInput)) {
      throw ProtocolError(std::string(text), "expected 'Action Input:' after the action line");
    }
    after = trim(after.substr(kActionInput.size()));
    input = nlohmann::json::parse(after, nullptr, false);
    if (input.is_discarded() || !input.is_object()) {
      throw ProtocolError(std::string(text), "Action Input is not a JSON object");
    }
  } else if (name != kFinish) {
    throw ProtocolError(std::string(text), "missing 'Action Input:'");
  }

  if (name == kFinish) {
    const std::string return_type = input.value("return_type", "give_answer");
    std::string answer;
    if (auto it = input.find("final_answer"); it != input.end()) {
      answer = it->is_string() ? it->get<std::string>() : it->dump();
    }
    if (return_type == "give_up_and_restart") {
      return GiveUpAction{std::string(thought), std::move(answer), recovery};
    }
    if (return_type != "give_answer") {
      throw ProtocolError(std::string(text), "unknown Finish return_type '" + return_type + "'");
    }
    return FinishAction{std::string(thought), std::move(answer)};
  }

  ToolCall call{std::string(name), std::move(input)};
  if (recovery) {
    return RecoveryStep{default_action(tag.value_or(RecoveryTag::RetryWithBackoff)), std::string(thought),
                        std::move(call)};
  }
  return CallAction{std::string(thought), std::move(call)};
}

std::optional<RecoveryTag> recovery_tag_of(const AgentAction& action) {
  if (const auto* r = std::get_if<RecoveryStep>(&action)) return tag_of(r->action);
  if (const auto* g = std::get_if<GiveUpAction>(&action); g != nullptr && g->recovery) {
    return RecoveryTag::TerminateGracefully;
  }
  return std::nullopt;
}

}  // namespace toolfault
