#include "toolfault/taxonomy.hpp"

#include <algorithm>
#include <cctype>

#include "toolfault/error.hpp"
#include "toolfault/shipped_data.hpp"

namespace toolfault {

namespace {

constexpr std::array<std::string_view, 7> kClassNames = {
    "ToolHallucination",   "ArgumentHallucination",        "InvalidToolInvocation",
    "PartialExecution",    "OutputHallucination",          "InvalidIntermediateReasoning",
    "ReentrantFailure",
};

constexpr std::array<std::string_view, 4> kManifestationNames = {
    "ErrorPayload", "MalformedOutput", "SilentFailure", "PartialOutput"};

constexpr std::array<std::string_view, 8> kTagNames = {
    "retry_with_backoff",   "reformat_arguments", "switch_tool",        "refresh_credentials",
    "validate_and_reissue", "lenient_parse",      "terminate_gracefully", "wait_until_healthy",
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_identifier_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

// "requests.exceptions.Timeout: read timed out" -> "requests.exceptions.Timeout".
// Returns empty when the text does not start with an exception-like name.
std::string_view exception_name(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos || colon == 0) return {};
  const std::string_view name = text.substr(0, colon);
  if (!std::all_of(name.begin(), name.end(), is_identifier_char)) return {};
  if (!std::isalpha(static_cast<unsigned char>(name.front()))) return {};
  return name;
}

bool looks_like_exception(std::string_view name) {
  return name.ends_with("Error") || name.ends_with("Exception") || name.ends_with("Timeout");
}

std::optional<nlohmann::json> try_parse(std::string_view text) {
  auto doc = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) return std::nullopt;
  return doc;
}

ErrorSignature make_signature(const FailureKind* kind, const FailureContext& ctx,
                              Manifestation manifestation, std::string message) {
  ErrorSignature sig;
  sig.tool_name = ctx.tool_name;
  sig.turn_index = ctx.turn_index;
  sig.manifestation = manifestation;
  sig.message = std::move(message);
  if (kind != nullptr) {
    sig.kind = kind->id;
    sig.error_class = kind->error_class;
    sig.status_code = kind->http_status;
  } else {
    sig.kind = std::string(kUnknownKind);
    sig.error_class = ErrorClass::InvalidToolInvocation;
  }
  return sig;
}

ErrorSignature http_signature(int status, std::string message, const FailureContext& ctx,
                              const Catalog& catalog) {
  ErrorSignature sig;
  sig.tool_name = ctx.tool_name;
  sig.turn_index = ctx.turn_index;
  sig.manifestation = Manifestation::ErrorPayload;
  sig.message = std::move(message);
  sig.status_code = status;
  if (const FailureKind* k = catalog.by_status(status)) {
    sig.kind = k->id;
    sig.error_class = k->error_class;
  } else {
    // Uncatalogued status codes keep their code; 5xx reads as transient.
    sig.kind = "http_" + std::to_string(status);
    sig.error_class =
        status >= 500 ? ErrorClass::ReentrantFailure : ErrorClass::InvalidToolInvocation;
  }
  return sig;
}

// Shared core of classify/detect. `failure` reports whether the text reads
// as a failure at all.
ErrorSignature classify_impl(std::string_view raw, const FailureContext& ctx,
                             const Catalog& catalog, bool& failure) {
  failure = true;
  const std::string_view text = trim(raw);
  if (text.empty()) {
    return make_signature(nullptr, ctx, Manifestation::SilentFailure, "");
  }

  if (text.front() == '{' || text.front() == '[') {
    auto doc = try_parse(text);
    if (!doc) {
      return make_signature(catalog.by_manifestation(Manifestation::MalformedOutput), ctx,
                            Manifestation::MalformedOutput, "unparsable JSON body");
    }
    if (doc->is_object()) {
      if (auto it = doc->find("incomplete"); it != doc->end() && it->is_boolean() && it->get<bool>()) {
        return make_signature(catalog.by_manifestation(Manifestation::PartialOutput), ctx,
                              Manifestation::PartialOutput, "incomplete output");
      }
      std::string message;
      if (auto it = doc->find("error"); it != doc->end() && it->is_string()) {
        message = it->get<std::string>();
      }
      std::optional<int> status;
      if (auto it = doc->find("status"); it != doc->end() && it->is_number_integer()) {
        const int s = it->get<int>();
        if (s >= 100 && s <= 599) status = s;
      }
      if (!message.empty() && status) {
        ErrorSignature sig = http_signature(*status, std::move(message), ctx, catalog);
        if (auto it = doc->find("retry_after_ms"); it != doc->end() && it->is_number_integer()) {
          sig.retry_after_ms = it->get<std::int64_t>();
        }
        return sig;
      }
      if (!message.empty()) {
        return make_signature(catalog.by_message(message), ctx, Manifestation::ErrorPayload,
                              std::move(message));
      }
    }
    failure = false;
    return make_signature(nullptr, ctx, Manifestation::ErrorPayload, std::string(text));
  }

  const std::string_view name = exception_name(text);
  if (!name.empty()) {
    std::string message(trim(text.substr(name.size() + 1)));
    if (const FailureKind* k = catalog.by_exception(name)) {
      return make_signature(k, ctx, Manifestation::ErrorPayload, std::move(message));
    }
    if (looks_like_exception(name)) {
      return make_signature(nullptr, ctx, Manifestation::ErrorPayload, std::string(text));
    }
  }
  failure = false;
  return make_signature(nullptr, ctx, Manifestation::ErrorPayload, std::string(text));
}

}  // namespace

std::string_view to_string(ErrorClass c) noexcept {
  return kClassNames[static_cast<std::size_t>(c)];
}

std::optional<ErrorClass> try_parse_error_class(std::string_view label) noexcept {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == label) return static_cast<ErrorClass>(i);
  }
  return std::nullopt;
}

ErrorClass parse_error_class(std::string_view label) {
  if (auto c = try_parse_error_class(label)) return *c;
  throw Error("UnknownErrorClass", "'" + std::string(label) + "' is not one of the seven error classes");
}

std::string_view to_string(Manifestation m) noexcept {
  return kManifestationNames[static_cast<std::size_t>(m)];
}

Manifestation parse_manifestation(std::string_view label) {
  for (std::size_t i = 0; i < kManifestationNames.size(); ++i) {
    if (kManifestationNames[i] == label) return static_cast<Manifestation>(i);
  }
  throw Error("UnknownManifestation", "'" + std::string(label) + "'");
}

std::string_view to_string(RecoveryTag t) noexcept {
  return kTagNames[static_cast<std::size_t>(t)];
}

std::optional<RecoveryTag> try_parse_recovery_tag(std::string_view label) noexcept {
  for (std::size_t i = 0; i < kTagNames.size(); ++i) {
    if (kTagNames[i] == label) return static_cast<RecoveryTag>(i);
  }
  return std::nullopt;
}

bool Remedy::accepts_tag(RecoveryTag t) const noexcept {
  return std::find(accepts.begin(), accepts.end(), t) != accepts.end();
}

std::string_view to_string(Disposition d) noexcept {
  switch (d) {
    case Disposition::Retryable: return "retryable";
    case Disposition::Correctable: return "correctable";
    case Disposition::Terminal: return "terminal";
  }
  return "terminal";
}

Disposition FailureKind::disposition() const noexcept {
  if (remedy.transient) return Disposition::Retryable;
  if (remedy.accepts.empty()) return Disposition::Terminal;
  return Disposition::Correctable;
}

Catalog Catalog::from_json(const nlohmann::json& doc) {
  Catalog cat;
  try {
    cat.version_ = doc.at("version").get<std::string>();
    for (const auto& entry : doc.at("failures")) {
      FailureKind k;
      k.id = entry.at("identifier").get<std::string>();
      k.error_class = parse_error_class(entry.at("error_class").get<std::string>());
      k.default_manifestation = parse_manifestation(entry.at("default_manifestation").get<std::string>());
      k.example_output = entry.at("example_output").get<std::string>();
      if (entry.contains("http_status")) k.http_status = entry.at("http_status").get<int>();
      if (k.id.starts_with("http_") != k.http_status.has_value()) {
        throw Error("InvalidCatalog", k.id + ": http_status must be present iff the id starts with http_");
      }
      if (entry.contains("remedy")) {
        const auto& r = entry.at("remedy");
        k.remedy.transient = r.value("transient", false);
        for (const auto& tag : r.value("accepts", nlohmann::json::array())) {
          auto parsed = try_parse_recovery_tag(tag.get<std::string>());
          if (!parsed) throw Error("InvalidCatalog", k.id + ": unknown remedy action " + tag.dump());
          k.remedy.accepts.push_back(*parsed);
        }
      }
      k.injectable = entry.value("injectable", true);
      if (cat.find(k.id) != nullptr) throw Error("InvalidCatalog", "duplicate identifier " + k.id);
      cat.kinds_.push_back(std::move(k));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("failure catalog: ") + e.what());
  }
  return cat;
}

const Catalog& Catalog::shipped() {
  static const Catalog catalog = from_json(nlohmann::json::parse(shipped::catalog_json()));
  return catalog;
}

const FailureKind* Catalog::find(std::string_view id) const noexcept {
  for (const auto& k : kinds_) {
    if (k.id == id) return &k;
  }
  return nullptr;
}

const FailureKind& Catalog::at(std::string_view id) const {
  if (const FailureKind* k = find(id)) return *k;
  throw Error("UnknownFailureKind", "'" + std::string(id) + "' is not in catalog " + version_);
}

std::vector<const FailureKind*> Catalog::kinds_in(ErrorClass c, bool injectable_only) const {
  std::vector<const FailureKind*> out;
  for (const auto& k : kinds_) {
    if (k.error_class == c && (!injectable_only || k.injectable)) out.push_back(&k);
  }
  return out;
}

const FailureKind* Catalog::by_status(int status) const noexcept {
  for (const auto& k : kinds_) {
    if (k.http_status == status) return &k;
  }
  return nullptr;
}

const FailureKind* Catalog::by_exception(std::string_view name) const noexcept {
  for (const auto& k : kinds_) {
    if (k.http_status) continue;
    if (exception_name(k.example_output) == name) return &k;
  }
  return nullptr;
}

const FailureKind* Catalog::by_message(std::string_view message) const noexcept {
  const std::string wanted = lower(trim(message));
  for (const auto& k : kinds_) {
    auto doc = try_parse(k.example_output);
    if (!doc || !doc->is_object() || !doc->contains("error")) continue;
    const auto& err = (*doc)["error"];
    if (err.is_string() && lower(err.get<std::string>()) == wanted) return &k;
  }
  return nullptr;
}

const FailureKind* Catalog::by_manifestation(Manifestation m) const noexcept {
  for (const auto& k : kinds_) {
    if (k.default_manifestation == m) return &k;
  }
  return nullptr;
}

nlohmann::json Catalog::to_json() const {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& k : kinds_) {
    nlohmann::json e = {
        {"identifier", k.id},
        {"error_class", to_string(k.error_class)},
        {"default_manifestation", to_string(k.default_manifestation)},
        {"example_output", k.example_output},
    };
    if (k.http_status) e["http_status"] = *k.http_status;
    nlohmann::json accepts = nlohmann::json::array();
    for (RecoveryTag t : k.remedy.accepts) accepts.push_back(to_string(t));
    e["remedy"] = {{"transient", k.remedy.transient}, {"accepts", accepts}};
    if (!k.injectable) e["injectable"] = false;
    failures.push_back(std::move(e));
  }
  return {{"version", version_}, {"failures", failures}};
}

void to_json(nlohmann::json& j, const ErrorSignature& s) {
  j = nlohmann::json{
      {"error_class", to_string(s.error_class)},
      {"kind", s.kind},
      {"message", s.message},
      {"tool_name", s.tool_name},
      {"turn_index", s.turn_index},
      {"manifestation", to_string(s.manifestation)},
  };
  j["status_code"] = s.status_code ? nlohmann::json(*s.status_code) : nlohmann::json(nullptr);
  if (s.retry_after_ms) j["retry_after_ms"] = *s.retry_after_ms;
}

void from_json(const nlohmann::json& j, ErrorSignature& s) {
  s.error_class = parse_error_class(j.at("error_class").get<std::string>());
  s.kind = j.at("kind").get<std::string>();
  s.message = j.value("message", "");
  s.tool_name = j.value("tool_name", "");
  s.turn_index = j.value("turn_index", 0);
  s.manifestation = parse_manifestation(j.value("manifestation", "ErrorPayload"));
  s.status_code.reset();
  if (j.contains("status_code") && !j["status_code"].is_null()) s.status_code = j["status_code"].get<int>();
  s.retry_after_ms.reset();
  if (j.contains("retry_after_ms")) s.retry_after_ms = j["retry_after_ms"].get<std::int64_t>();
}

void validate(const ErrorSignature& sig) {
  if (sig.kind.starts_with("http_") != sig.status_code.has_value()) {
    throw Error("InvalidSignature", "status_code must be present iff kind starts with http_ (" + sig.kind + ")");
  }
  if (sig.status_code && (*sig.status_code < 100 || *sig.status_code > 599)) {
    throw Error("InvalidSignature", "status_code out of range");
  }
  if (sig.manifestation == Manifestation::ErrorPayload && sig.message.empty()) {
    throw Error("InvalidSignature", "ErrorPayload signatures need a message");
  }
  if (sig.turn_index < 0) throw Error("InvalidSignature", "negative turn index");
}

ErrorSignature classify_raw_failure(std::string_view raw, const FailureContext& context,
                                    const Catalog& catalog) {
  bool failure = true;
  ErrorSignature sig = classify_impl(raw, context, catalog, failure);
  if (!failure) {
    sig.kind = std::string(kUnknownKind);
    sig.error_class = ErrorClass::InvalidToolInvocation;
    sig.status_code.reset();
  }
  return sig;
}

std::optional<ErrorSignature> detect_failure(std::string_view raw, const FailureContext& context,
                                             const Catalog& catalog) {
  bool failure = true;
  ErrorSignature sig = classify_impl(raw, context, catalog, failure);
  if (!failure) return std::nullopt;
  return sig;
}

std::vector<std::string> message_tokens(std::string_view message) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : message) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isdigit(c)) continue;
    if (std::isalpha(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  std::sort(tokens.begin(), tokens.end());
  return tokens;
}

std::string canonical_key(const ErrorSignature& sig) {
  std::string key = lower(trim(sig.kind));
  key += '|';
  key += sig.status_code ? std::to_string(*sig.status_code) : std::string("-");
  key += '|';
  bool first = true;
  for (const auto& t : message_tokens(sig.message)) {
    if (!first) key += ' ';
    key += t;
    first = false;
  }
  return key;
}

}  // namespace toolfault
