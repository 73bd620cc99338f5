#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "toolfault/agent_policy.hpp"

namespace toolfault {

inline constexpr const char* kDefaultTokenEnv = "TOOLFAULT_API_TOKEN";

// Chat-completion endpoint. The token is read from `token_env` at client
// construction; it is never stored in configs or manifests.
struct RemoteEndpoint {
  std::string base_url;  // http://host:port
  std::string model;
  std::string token_env = kDefaultTokenEnv;
  int timeout_ms = 30000;
  int max_retries = 2;  // transport-level only
};

void to_json(nlohmann::json& j, const RemoteEndpoint& e);

// POSTs {model, messages} to <base_url>/v1/chat/completions and returns
// choices[0].message.content. Throws ConfigError (bad URL, missing token),
// TransportError (network or non-2xx) and ProtocolError (bad response body).
class ChatClient {
 public:
  explicit ChatClient(RemoteEndpoint endpoint);
  std::string complete(const nlohmann::json& messages) const;
  const RemoteEndpoint& endpoint() const noexcept { return endpoint_; }

 private:
  RemoteEndpoint endpoint_;
  std::string token_;
  std::string host_;  // scheme://host:port
  std::string path_prefix_;
};

// Chat messages for a trajectory; function turns become user turns prefixed
// with "Observation: ".
nlohmann::json chat_messages(const Trajectory& trajectory);

class RemoteChatPolicy : public AgentPolicy {
 public:
  explicit RemoteChatPolicy(RemoteEndpoint endpoint) : client_(std::move(endpoint)) {}
  std::string name() const override { return "remote"; }
  AgentAction decide(const AgentContext& context) const override;

 private:
  ChatClient client_;
};

}  // namespace toolfault
