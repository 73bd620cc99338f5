#include <gtest/gtest.h>

#include <map>

#include "toolfault/error.hpp"
#include "toolfault/simulator.hpp"
#include "toolfault/taxonomy.hpp"

using namespace toolfault;

namespace {

const std::string kNormal = R"({"city":"Oslo","humidity_pct":70,"temperature_c":4,"conditions":"fog"})";

}  // namespace

TEST(Taxonomy, SevenClassesRoundTripTheirLabels) {
  EXPECT_EQ(kAllErrorClasses.size(), 7u);
  for (ErrorClass c : kAllErrorClasses) EXPECT_EQ(parse_error_class(to_string(c)), c);
  EXPECT_THROW(parse_error_class("NetworkHallucination"), Error);
  EXPECT_FALSE(try_parse_error_class("").has_value());
}

TEST(Taxonomy, EveryClassHasAnInjectableKind) {
  const Catalog& cat = Catalog::shipped();
  for (ErrorClass c : kAllErrorClasses) EXPECT_FALSE(cat.kinds_in(c).empty()) << to_string(c);
}

// Rendering a kind with its catalogued manifestation and classifying the
// text recovers the kind, for every seed.
TEST(Taxonomy, RenderThenClassifyRecoversEveryKind) {
  const Catalog& cat = Catalog::shipped();
  for (const auto& k : cat.kinds()) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const std::string text = render_failure(k, k.default_manifestation, kNormal, seed);
      const ErrorSignature sig = classify_raw_failure(text, {"get_weather", 3}, cat);
      ASSERT_EQ(sig.kind, k.id) << "rendered: " << text;
      EXPECT_EQ(sig.error_class, k.error_class);
      EXPECT_EQ(sig.manifestation, k.default_manifestation);
      EXPECT_EQ(sig.status_code, k.http_status);
    }
  }
}

// Class assignment follows recovery semantics: auth failures are
// non-retryable, throttling and availability failures are retryable.
TEST(Taxonomy, ClassAndDispositionTable) {
  const Catalog& cat = Catalog::shipped();
  const std::map<std::string, std::pair<ErrorClass, Disposition>> table = {
      {"http_400", {ErrorClass::ArgumentHallucination, Disposition::Correctable}},
      {"http_422", {ErrorClass::ArgumentHallucination, Disposition::Correctable}},
      {"http_401", {ErrorClass::InvalidToolInvocation, Disposition::Terminal}},
      {"http_403", {ErrorClass::InvalidToolInvocation, Disposition::Terminal}},
      {"http_407", {ErrorClass::InvalidToolInvocation, Disposition::Terminal}},
      {"http_404", {ErrorClass::ToolHallucination, Disposition::Correctable}},
      {"http_429", {ErrorClass::ReentrantFailure, Disposition::Retryable}},
      {"http_500", {ErrorClass::ReentrantFailure, Disposition::Retryable}},
      {"http_503", {ErrorClass::ReentrantFailure, Disposition::Retryable}},
      {"timeout", {ErrorClass::ReentrantFailure, Disposition::Retryable}},
      {"dns_error", {ErrorClass::ReentrantFailure, Disposition::Retryable}},
      {"malformed_json", {ErrorClass::OutputHallucination, Disposition::Retryable}},
      {"schema_violation", {ErrorClass::OutputHallucination, Disposition::Correctable}},
      {"partial_output", {ErrorClass::PartialExecution, Disposition::Correctable}},
      {"plan_contradiction", {ErrorClass::InvalidIntermediateReasoning, Disposition::Correctable}},
  };
  for (const auto& [id, expected] : table) {
    const FailureKind& k = cat.at(id);
    EXPECT_EQ(k.error_class, expected.first) << id;
    EXPECT_EQ(k.disposition(), expected.second) << id;
  }
}

TEST(Taxonomy, ClassifiesHttpBodies) {
  const auto sig = classify_raw_failure(R"({"error": "Unexpected server error", "status": 500})", {"t", 4});
  EXPECT_EQ(sig.kind, "http_500");
  EXPECT_EQ(sig.error_class, ErrorClass::ReentrantFailure);
  EXPECT_EQ(sig.status_code, 500);
  EXPECT_EQ(sig.turn_index, 4);
  EXPECT_EQ(sig.tool_name, "t");

  const auto ra = classify_raw_failure(R"({"error": "Rate limit exceeded", "status": 429, "retry_after_ms": 1200})", {});
  EXPECT_EQ(ra.kind, "http_429");
  EXPECT_EQ(ra.retry_after_ms, 1200);
}

TEST(Taxonomy, ClassifiesNonHttpManifestations) {
  EXPECT_EQ(classify_raw_failure(R"({"city": "Os)", {}).kind, "malformed_json");
  EXPECT_EQ(classify_raw_failure(R"({"city": "Oslo", "incomplete": true})", {}).kind, "partial_output");
  EXPECT_EQ(classify_raw_failure("requests.exceptions.Timeout: read timed out", {}).kind, "timeout");
  const auto silent = classify_raw_failure("   ", {});
  EXPECT_EQ(silent.kind, kUnknownKind);
  EXPECT_EQ(silent.manifestation, Manifestation::SilentFailure);
  EXPECT_EQ(classify_raw_failure("FluxCapacitorError: out of plutonium", {}).kind, kUnknownKind);
}

TEST(Taxonomy, DetectFailureIgnoresSuccessfulOutputs) {
  EXPECT_FALSE(detect_failure(kNormal, {}).has_value());
  EXPECT_FALSE(detect_failure("The answer is 42.", {}).has_value());
  EXPECT_TRUE(detect_failure("", {}).has_value());
  EXPECT_TRUE(detect_failure(R"({"error": "Rate limit exceeded", "status": 429})", {}).has_value());
}

TEST(Taxonomy, CanonicalKeyIgnoresOrderCaseWhitespaceAndDigits) {
  ErrorSignature a;
  a.kind = "http_500";
  a.status_code = 500;
  a.message = "Request 8812 failed: upstream  Timeout";
  ErrorSignature b = a;
  b.message = "timeout UPSTREAM failed request 17";
  EXPECT_EQ(canonical_key(a), canonical_key(b));
  b.message = "timeout upstream failed";
  EXPECT_NE(canonical_key(a), canonical_key(b));
  EXPECT_EQ(message_tokens("B a 3c"), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Taxonomy, SignatureJsonRoundTripAndValidation) {
  ErrorSignature s;
  s.error_class = ErrorClass::ReentrantFailure;
  s.kind = "http_503";
  s.status_code = 503;
  s.message = "Service unavailable";
  s.tool_name = "get_weather";
  s.turn_index = 5;
  s.retry_after_ms = 900;
  const nlohmann::json j = s;
  EXPECT_EQ(j.get<ErrorSignature>(), s);
  EXPECT_NO_THROW(validate(s));

  ErrorSignature bad = s;
  bad.status_code.reset();
  EXPECT_THROW(validate(bad), Error);
  bad = s;
  bad.message.clear();
  EXPECT_THROW(validate(bad), Error);
}

TEST(Taxonomy, CatalogLookups) {
  const Catalog& cat = Catalog::shipped();
  EXPECT_EQ(cat.by_status(404)->id, "http_404");
  EXPECT_EQ(cat.by_status(418), nullptr);
  EXPECT_EQ(cat.by_exception("ChunkedEncodingError")->id, "stream_interrupted");
  EXPECT_THROW(cat.at("http_999"), Error);
  EXPECT_FALSE(cat.at("protocol_error").injectable);
  const Catalog again = Catalog::from_json(cat.to_json());
  EXPECT_EQ(again.kinds().size(), cat.kinds().size());
  EXPECT_EQ(again.version(), cat.version());
}
