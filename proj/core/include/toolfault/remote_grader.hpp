#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "toolfault/metrics.hpp"
#include "toolfault/remote_chat.hpp"

namespace toolfault {

// Guideline prompt for one episode: the card's expected recovery tag and
// forbidden behaviors, followed by the trace turns without harness metadata.
nlohmann::json grader_messages(const Trajectory& trace, const EpisodeCard& card);

// Remote judge for parity studies against the rule-based grader. Only the
// success verdicts come from the endpoint; failure counts and steps are
// always the rule-based ones so RR and CSR stay comparable.
// The reply must contain a JSON object with boolean "task_success" and
// "hallucinated_success"; anything else throws ProtocolError.
class RemoteGrader {
 public:
  explicit RemoteGrader(RemoteEndpoint endpoint) : client_(std::move(endpoint)) {}
  EpisodeGrade grade(const Trajectory& trace, const EpisodeCard& card,
                     const Catalog& catalog = Catalog::shipped()) const;

 private:
  ChatClient client_;
};

}  // namespace toolfault
