#include "toolfault/recovery_bank.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "toolfault/error.hpp"
#include "toolfault/shipped_data.hpp"

namespace toolfault {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<std::string> unique_tokens(std::string_view message) {
  auto tokens = message_tokens(message);
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

std::vector<std::string> normalize_tokens(const std::vector<std::string>& raw) {
  std::vector<std::string> all;
  for (const auto& r : raw) {
    for (auto& t : message_tokens(r)) all.push_back(std::move(t));
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  return all;
}

// |A ∩ B| / |A ∪ B| for sorted unique vectors; two empty sets are identical.
Rational jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return Rational(1);
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return Rational(static_cast<std::int64_t>(inter), static_cast<std::int64_t>(uni));
}

ValidationCheck parse_check(const std::string& s) {
  if (s == "url") return ValidationCheck::Url;
  if (s == "payload") return ValidationCheck::Payload;
  if (s == "headers") return ValidationCheck::Headers;
  if (s == "params") return ValidationCheck::Params;
  throw ParseError("unknown validation check '" + s + "'");
}

SwitchStrategy parse_strategy(const std::string& s) {
  if (s == "alternative") return SwitchStrategy::Alternative;
  if (s == "fallback") return SwitchStrategy::Fallback;
  throw ParseError("unknown switch strategy '" + s + "'");
}

nlohmann::json pattern_to_json(const SignaturePattern& p) {
  nlohmann::json j = nlohmann::json::object();
  if (p.error_class) j["error_class"] = to_string(*p.error_class);
  if (p.kind) j["kind"] = *p.kind;
  if (p.status_code) j["status_code"] = *p.status_code ? nlohmann::json(**p.status_code) : nlohmann::json(nullptr);
  if (p.message_tokens) j["message_tokens"] = *p.message_tokens;
  return j;
}

SignaturePattern pattern_from_json(const nlohmann::json& j, const std::string& id) {
  SignaturePattern p;
  if (j.contains("error_class")) {
    auto c = try_parse_error_class(j.at("error_class").get<std::string>());
    if (!c) {
      throw BankError("UnknownErrorClass", id,
                      id + ": unknown error class " + j.at("error_class").dump());
    }
    p.error_class = *c;
  }
  if (j.contains("kind")) p.kind = j.at("kind").get<std::string>();
  if (j.contains("status_code")) {
    const auto& s = j.at("status_code");
    p.status_code = s.is_null() ? std::optional<int>{} : std::optional<int>{s.get<int>()};
  }
  if (j.contains("message_tokens")) {
    p.message_tokens = normalize_tokens(j.at("message_tokens").get<std::vector<std::string>>());
  }
  return p;
}

std::vector<DialogueLine> dialogue_from_json(const nlohmann::json& j) {
  std::vector<DialogueLine> lines;
  for (const auto& line : j) {
    lines.push_back({line.at("from").get<std::string>(), line.at("value").get<std::string>()});
  }
  return lines;
}

RecoveryExemplar exemplar_from_json(const nlohmann::json& j) {
  RecoveryExemplar e;
  e.id = j.at("id").get<std::string>();
  try {
    e.pattern = pattern_from_json(j.value("pattern", nlohmann::json::object()), e.id);
    for (const auto& a : j.value("script", nlohmann::json::array())) {
      e.script.push_back(action_from_json(a));
    }
    e.rationale = j.value("rationale", "");
    if (j.contains("dialogue_template")) e.dialogue_template = dialogue_from_json(j["dialogue_template"]);
  } catch (const BankError&) {
    throw;
  } catch (const std::exception& ex) {
    throw BankError("InvalidExemplar", e.id, e.id + ": " + ex.what());
  }
  return e;
}

std::vector<int> split_status_codes(const std::string& key, const std::string& id) {
  std::vector<int> codes;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '_')) {
    if (part.empty() || !std::all_of(part.begin(), part.end(), ::isdigit)) {
      throw BankError("InvalidBranchKey", id, "branch key '" + key + "' is not a list of status codes");
    }
    codes.push_back(std::stoi(part));
  }
  return codes;
}

std::vector<RecoveryExemplar> expand_branch(const nlohmann::json& j, const Catalog& catalog) {
  const std::string key = j.at("key").get<std::string>();
  const std::string prefix = j.value("id_prefix", "branch-" + key);
  std::vector<RecoveryExemplar> out;
  for (int code : split_status_codes(key, prefix)) {
    RecoveryExemplar e;
    e.id = prefix + "-http_" + std::to_string(code);
    const FailureKind* kind = catalog.by_status(code);
    if (kind == nullptr) {
      throw BankError("UnknownErrorClass", e.id,
                      e.id + ": status " + std::to_string(code) + " has no catalogued error class");
    }
    e.pattern.error_class = kind->error_class;
    e.pattern.kind = kind->id;
    e.pattern.status_code = std::optional<int>{code};
    if (j.contains("message_tokens")) {
      e.pattern.message_tokens = normalize_tokens(j["message_tokens"].get<std::vector<std::string>>());
    }
    for (const auto& a : j.at("script")) e.script.push_back(action_from_json(a));
    e.rationale = j.value("rationale", "");
    if (j.contains("dialogue_template")) e.dialogue_template = dialogue_from_json(j["dialogue_template"]);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

RecoveryTag tag_of(const RecoveryAction& action) noexcept {
  return std::visit(Overloaded{
                        [](const RetryWithBackoff&) { return RecoveryTag::RetryWithBackoff; },
                        [](const ReformatArguments&) { return RecoveryTag::ReformatArguments; },
                        [](const SwitchTool&) { return RecoveryTag::SwitchTool; },
                        [](const RefreshCredentials&) { return RecoveryTag::RefreshCredentials; },
                        [](const ValidateAndReissue&) { return RecoveryTag::ValidateAndReissue; },
                        [](const LenientParse&) { return RecoveryTag::LenientParse; },
                        [](const TerminateGracefully&) { return RecoveryTag::TerminateGracefully; },
                        [](const WaitUntilHealthy&) { return RecoveryTag::WaitUntilHealthy; },
                    },
                    action);
}

std::string_view to_string(ValidationCheck c) noexcept {
  switch (c) {
    case ValidationCheck::Url: return "url";
    case ValidationCheck::Payload: return "payload";
    case ValidationCheck::Headers: return "headers";
    case ValidationCheck::Params: return "params";
  }
  return "params";
}

std::string_view to_string(SwitchStrategy s) noexcept {
  return s == SwitchStrategy::Alternative ? "alternative" : "fallback";
}

bool is_terminal_capable(const RecoveryAction& action) noexcept {
  const RecoveryTag t = tag_of(action);
  return t == RecoveryTag::TerminateGracefully || t == RecoveryTag::SwitchTool ||
         t == RecoveryTag::LenientParse;
}

nlohmann::json action_to_json(const RecoveryAction& action) {
  nlohmann::json j = {{"action", to_string(tag_of(action))}};
  std::visit(Overloaded{
                 [&](const RetryWithBackoff& a) {
                   j["max_attempts"] = a.max_attempts;
                   j["base_delay_ms"] = a.base_delay_ms;
                   j["cap_ms"] = a.cap_ms;
                   j["respect_retry_after"] = a.respect_retry_after;
                 },
                 [&](const ReformatArguments& a) { j["hint"] = a.hint; },
                 [&](const SwitchTool& a) { j["strategy"] = to_string(a.strategy); },
                 [&](const RefreshCredentials&) {},
                 [&](const ValidateAndReissue& a) { j["check"] = to_string(a.check); },
                 [&](const LenientParse&) {},
                 [&](const TerminateGracefully& a) { j["report"] = a.report; },
                 [&](const WaitUntilHealthy& a) {
                   j["poll_interval_ms"] = a.poll_interval_ms;
                   j["max_wait_ms"] = a.max_wait_ms;
                 },
             },
             action);
  return j;
}

RecoveryAction action_from_json(const nlohmann::json& j) {
  const std::string name = j.at("action").get<std::string>();
  const auto tag = try_parse_recovery_tag(name);
  if (!tag) throw ParseError("unknown recovery action '" + name + "'");
  switch (*tag) {
    case RecoveryTag::RetryWithBackoff: {
      RetryWithBackoff a;
      a.max_attempts = j.value("max_attempts", a.max_attempts);
      a.base_delay_ms = j.value("base_delay_ms", a.base_delay_ms);
      a.cap_ms = j.value("cap_ms", a.cap_ms);
      a.respect_retry_after = j.value("respect_retry_after", a.respect_retry_after);
      if (a.max_attempts < 1 || a.max_attempts > 4) {
        throw ParseError("retry_with_backoff.max_attempts must be in [1, 4]");
      }
      if (a.base_delay_ms < 0 || a.cap_ms < 0) throw ParseError("negative backoff delay");
      return a;
    }
    case RecoveryTag::ReformatArguments: return ReformatArguments{j.value("hint", "")};
    case RecoveryTag::SwitchTool: return SwitchTool{parse_strategy(j.value("strategy", "alternative"))};
    case RecoveryTag::RefreshCredentials: return RefreshCredentials{};
    case RecoveryTag::ValidateAndReissue: return ValidateAndReissue{parse_check(j.value("check", "params"))};
    case RecoveryTag::LenientParse: return LenientParse{};
    case RecoveryTag::TerminateGracefully: return TerminateGracefully{j.value("report", "")};
    case RecoveryTag::WaitUntilHealthy: {
      WaitUntilHealthy a;
      a.poll_interval_ms = j.value("poll_interval_ms", a.poll_interval_ms);
      a.max_wait_ms = j.value("max_wait_ms", a.max_wait_ms);
      if (a.poll_interval_ms <= 0 || a.max_wait_ms < 0) throw ParseError("invalid wait_until_healthy timing");
      return a;
    }
  }
  throw ParseError("unreachable recovery action");
}

SignaturePattern SignaturePattern::exact(const ErrorSignature& sig) {
  SignaturePattern p;
  p.error_class = sig.error_class;
  p.kind = sig.kind;
  p.status_code = std::optional<std::optional<int>>{sig.status_code};
  p.message_tokens = unique_tokens(sig.message);
  return p;
}

Rational similarity_distance(const ErrorSignature& observed, const SignaturePattern& pattern,
                             const DistanceWeights& weights) {
  if (pattern.fully_wildcard()) {
    throw BankError("FullyWildcardPattern", "", "pattern binds no field");
  }
  Rational d(0);
  if (pattern.error_class && *pattern.error_class != observed.error_class) d += weights.error_class;
  if (pattern.kind && *pattern.kind != observed.kind) d += weights.kind;
  if (pattern.status_code && *pattern.status_code != observed.status_code) d += weights.status;
  if (pattern.message_tokens) {
    const Rational similarity = jaccard(unique_tokens(observed.message), *pattern.message_tokens);
    d += Rational(weights.message) * (Rational(1) - similarity);
  }
  return d;
}

ExemplarBank::ExemplarBank(std::string version, std::vector<RecoveryExemplar> exemplars,
                           const BankOptions& options, const Catalog& catalog)
    : version_(std::move(version)),
      exemplars_(std::move(exemplars)),
      weights_(options.weights),
      catalog_(&catalog) {
  std::set<std::string> seen;
  for (const auto& e : exemplars_) {
    if (!seen.insert(e.id).second) {
      throw BankError("DuplicateId", e.id, "exemplar id '" + e.id + "' appears more than once");
    }
    if (e.script.empty()) {
      throw BankError("EmptyScript", e.id, "exemplar '" + e.id + "' has an empty script");
    }
    if (!is_terminal_capable(e.script.back())) {
      throw BankError("InvalidScript", e.id,
                      "exemplar '" + e.id + "' must end with terminate_gracefully or a success-terminal action");
    }
    if (e.pattern.fully_wildcard()) {
      throw BankError("FullyWildcardPattern", e.id, "exemplar '" + e.id + "' binds no pattern field");
    }
  }
  if (options.require_full_coverage) {
    for (ErrorClass c : kAllErrorClasses) {
      if (!covers(c)) {
        throw BankError("CoverageGap", "", "no exemplar matches error class " + std::string(to_string(c)));
      }
    }
  }
}

ExemplarBank ExemplarBank::from_json(const nlohmann::json& doc, const BankOptions& options,
                                     const Catalog& catalog) {
  std::vector<RecoveryExemplar> exemplars;
  std::string version;
  try {
    version = doc.at("version").get<std::string>();
    for (const auto& j : doc.value("exemplars", nlohmann::json::array())) {
      exemplars.push_back(exemplar_from_json(j));
    }
    for (const auto& j : doc.value("branches", nlohmann::json::array())) {
      for (auto& e : expand_branch(j, catalog)) exemplars.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("recovery dictionary: ") + e.what());
  }
  return ExemplarBank(std::move(version), std::move(exemplars), options, catalog);
}

const ExemplarBank& ExemplarBank::shipped() {
  static const ExemplarBank bank = from_json(nlohmann::json::parse(shipped::bank_json()));
  return bank;
}

const RecoveryExemplar* ExemplarBank::find(std::string_view id) const noexcept {
  for (const auto& e : exemplars_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::optional<ErrorClass> ExemplarBank::pattern_class(const RecoveryExemplar& e) const {
  if (e.pattern.error_class) return e.pattern.error_class;
  if (e.pattern.kind && catalog_ != nullptr) {
    if (const FailureKind* k = catalog_->find(*e.pattern.kind)) return k->error_class;
  }
  return std::nullopt;
}

bool ExemplarBank::covers(ErrorClass c) const {
  return std::any_of(exemplars_.begin(), exemplars_.end(),
                     [&](const RecoveryExemplar& e) { return pattern_class(e) == c; });
}

ExemplarBank ExemplarBank::without_kinds(const std::set<std::string>& kinds) const {
  ExemplarBank copy;
  copy.version_ = version_;
  copy.weights_ = weights_;
  copy.catalog_ = catalog_;
  for (const auto& e : exemplars_) {
    if (e.pattern.kind && kinds.contains(*e.pattern.kind)) continue;
    copy.exemplars_.push_back(e);
  }
  return copy;
}

nlohmann::json ExemplarBank::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : exemplars_) {
    nlohmann::json script = nlohmann::json::array();
    for (const auto& a : e.script) script.push_back(action_to_json(a));
    nlohmann::json j = {{"id", e.id}, {"pattern", pattern_to_json(e.pattern)}, {"script", script},
                        {"rationale", e.rationale}};
    if (!e.dialogue_template.empty()) {
      nlohmann::json lines = nlohmann::json::array();
      for (const auto& l : e.dialogue_template) lines.push_back({{"from", l.from}, {"value", l.value}});
      j["dialogue_template"] = lines;
    }
    list.push_back(std::move(j));
  }
  return {{"version", version_}, {"exemplars", list}};
}

std::vector<Retrieval> retrieve_top_k(const ExemplarBank& bank, const ErrorSignature& observed,
                                      std::size_t k) {
  std::vector<Retrieval> scored;
  scored.reserve(bank.size());
  for (const auto& e : bank.exemplars()) {
    scored.push_back({&e, similarity_distance(observed, e.pattern, bank.weights())});
  }
  const auto better = [](const Retrieval& a, const Retrieval& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.exemplar->id < b.exemplar->id;
  };
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
  scored.resize(k);
  return scored;
}

const RecoveryExemplar& retrieve(const ExemplarBank& bank, const ErrorSignature& observed) {
  if (bank.size() == 0) throw Error("EmptyBank", "cannot retrieve from an empty exemplar bank");
  const RecoveryExemplar* best = nullptr;
  Rational best_d;
  for (const auto& e : bank.exemplars()) {
    const Rational d = similarity_distance(observed, e.pattern, bank.weights());
    if (best == nullptr || d < best_d || (d == best_d && e.id < best->id)) {
      best = &e;
      best_d = d;
    }
  }
  return *best;
}

ExemplarBank load_bank(const std::filesystem::path& path, const BankOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("FileNotFound", "cannot open recovery dictionary " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return ExemplarBank::from_json(doc, options);
}

}  // namespace toolfault
