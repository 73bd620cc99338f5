#include "toolfault/dictionary_converter.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "toolfault/error.hpp"

namespace toolfault {

namespace {

class LiteralParser {
 public:
  explicit LiteralParser(std::string_view s) : s_(s) {}

  nlohmann::json document() {
    skip();
    // `name = value`
    const std::size_t save = pos_;
    if (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      const std::string ident = identifier();
      skip();
      if (pos_ < s_.size() && s_[pos_] == '=' && ident != "True" && ident != "False" && ident != "None") {
        ++pos_;
      } else {
        pos_ = save;
      }
    }
    nlohmann::json v = value();
    skip();
    if (pos_ != s_.size()) fail("trailing content");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    const auto line = 1 + std::count(s_.begin(), s_.begin() + static_cast<std::ptrdiff_t>(std::min(pos_, s_.size())), '\n');
    throw ParseError("python literal, line " + std::to_string(line) + ": " + what);
  }

  void skip() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (c == '\\' && pos_ + 1 < s_.size() && s_[pos_ + 1] == '\n') {
        pos_ += 2;
      } else {
        break;
      }
    }
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }

  std::string identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  bool at_string() const {
    return pos_ < s_.size() && (s_[pos_] == '"' || s_[pos_] == '\'');
  }

  std::string string_piece() {
    const char q = s_[pos_];
    const bool triple = s_.substr(pos_, 3) == std::string(3, q);
    pos_ += triple ? 3 : 1;
    std::string out;
    while (true) {
      if (pos_ >= s_.size()) fail("unterminated string");
      const char c = s_[pos_];
      if (triple ? s_.substr(pos_, 3) == std::string(3, q) : c == q) {
        pos_ += triple ? 3 : 1;
        return out;
      }
      if (c == '\n' && !triple) fail("newline in string");
      if (c != '\\') {
        out += c;
        ++pos_;
        continue;
      }
      if (pos_ + 1 >= s_.size()) fail("dangling escape");
      const char e = s_[pos_ + 1];
      pos_ += 2;
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '\\': out += '\\'; break;
        case '\'': out += '\''; break;
        case '"': out += '"'; break;
        case '\n': break;
        default: out += '\\'; out += e;
      }
    }
  }

  // Adjacent string literals concatenate.
  std::string strings() {
    std::string out = string_piece();
    for (skip(); at_string(); skip()) out += string_piece();
    return out;
  }

  nlohmann::json value() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (at_string()) return strings();
    if (c == '{') return dict();
    if (c == '[') return sequence('[', ']');
    if (c == '(') return paren();
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::string ident = identifier();
      if (ident == "True") return true;
      if (ident == "False") return false;
      if (ident == "None") return nullptr;
      fail("unsupported name '" + ident + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  nlohmann::json number() {
    const std::size_t start = pos_;
    if (s_[pos_] == '-') ++pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.' ||
                                s_[pos_] == 'e' || s_[pos_] == 'E' || s_[pos_] == '_')) {
      ++pos_;
    }
    std::string text(s_.substr(start, pos_ - start));
    std::erase(text, '_');
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) fail("bad number '" + text + "'");
    return j;
  }

  nlohmann::json dict() {
    expect('{');
    nlohmann::json out = nlohmann::json::object();
    while (!eat('}')) {
      skip();
      if (!at_string()) fail("dict keys must be strings");
      const std::string key = strings();
      expect(':');
      out[key] = value();
      if (!eat(',')) {
        expect('}');
        break;
      }
    }
    return out;
  }

  nlohmann::json sequence(char open, char close) {
    expect(open);
    nlohmann::json out = nlohmann::json::array();
    while (!eat(close)) {
      out.push_back(value());
      if (!eat(',')) {
        expect(close);
        break;
      }
    }
    return out;
  }

  // ( expr ) groups; ( a, b ) is a tuple, rendered as a list.
  nlohmann::json paren() {
    expect('(');
    if (eat(')')) return nlohmann::json::array();
    nlohmann::json first = value();
    if (eat(')')) return first;
    expect(',');
    nlohmann::json out = nlohmann::json::array({first});
    while (!eat(')')) {
      out.push_back(value());
      if (!eat(',')) {
        expect(')');
        break;
      }
    }
    return out;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct Keyword {
  const char* word;
  RecoveryAction action;
};

const std::vector<Keyword>& keywords() {
  static const std::vector<Keyword> k = {
      {"retry", RetryWithBackoff{2, 500, 8000, true}},
      {"backoff", RetryWithBackoff{2, 500, 8000, true}},
      {"refresh", RefreshCredentials{}},
      {"token", RefreshCredentials{}},
      {"credential", RefreshCredentials{}},
      {"switch", SwitchTool{SwitchStrategy::Fallback}},
      {"alternative", SwitchTool{SwitchStrategy::Alternative}},
      {"wait", WaitUntilHealthy{}},
      {"payload", ReformatArguments{"minimal payload with required fields"}},
      {"reformat", ReformatArguments{}},
      {"url", ValidateAndReissue{ValidationCheck::Url}},
      {"header", ValidateAndReissue{ValidationCheck::Headers}},
      {"parameter", ValidateAndReissue{ValidationCheck::Params}},
      {"parse", LenientParse{}},
  };
  return k;
}

std::optional<RecoveryAction> action_for(const std::string& text) {
  std::string body = lower(text);
  if (const auto at = body.find("action:"); at != std::string::npos) body = body.substr(at + 7);
  std::optional<std::pair<std::size_t, RecoveryAction>> best;
  for (const auto& k : keywords()) {
    const auto pos = body.find(k.word);
    if (pos != std::string::npos && (!best || pos < best->first)) best.emplace(pos, k.action);
  }
  if (!best) return std::nullopt;
  return best->second;
}

std::string first_thought(const std::vector<DialogueLine>& dialogue) {
  for (const auto& line : dialogue) {
    if (lower(line.from) != "assistant") continue;
    std::string t = line.value;
    if (t.starts_with("Thoughts:")) t.erase(0, 9);
    t = t.substr(0, t.find("\n\n"));
    while (!t.empty() && t.front() == ' ') t.erase(0, 1);
    return t;
  }
  return {};
}

}  // namespace

nlohmann::json parse_python_literal(std::string_view source) {
  return LiteralParser(source).document();
}

std::vector<RecoveryAction> script_from_dialogue(const std::vector<DialogueLine>& dialogue) {
  std::vector<RecoveryAction> out;
  for (const auto& line : dialogue) {
    if (lower(line.from) != "assistant") continue;
    auto a = action_for(line.value);
    if (!a) continue;
    if (!out.empty() && tag_of(out.back()) == tag_of(*a)) continue;
    out.push_back(std::move(*a));
  }
  out.push_back(TerminateGracefully{"Stopped: {tool} kept failing with {error}."});
  return out;
}

nlohmann::json convert_recovery_dictionary(std::string_view python_source, const std::string& version) {
  const nlohmann::json doc = parse_python_literal(python_source);
  if (!doc.is_object()) throw ParseError("recovery dictionary must be a dict of branches");
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& [key, lines] : doc.items()) {
    if (!lines.is_array()) throw ParseError("branch '" + key + "' must be a list of dialogue lines");
    std::vector<DialogueLine> dialogue;
    nlohmann::json tmpl = nlohmann::json::array();
    for (const auto& l : lines) {
      if (!l.is_object() || !l.contains("from") || !l.contains("value")) {
        throw ParseError("branch '" + key + "': dialogue lines need 'from' and 'value'");
      }
      dialogue.push_back({l["from"].get<std::string>(), l["value"].get<std::string>()});
      tmpl.push_back({{"from", dialogue.back().from}, {"value", dialogue.back().value}});
    }
    nlohmann::json script = nlohmann::json::array();
    for (const auto& a : script_from_dialogue(dialogue)) script.push_back(action_to_json(a));
    branches.push_back({{"key", key},
                        {"id_prefix", "G-" + key},
                        {"script", script},
                        {"rationale", first_thought(dialogue)},
                        {"dialogue_template", tmpl}});
  }
  return {{"version", version}, {"branches", branches}};
}

}  // namespace toolfault
