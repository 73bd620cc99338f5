#include "toolfault/remote_chat.hpp"

#include <cstdlib>

#include <httplib.h>

#include "toolfault/error.hpp"

namespace toolfault {

void to_json(nlohmann::json& j, const RemoteEndpoint& e) {
  j = {{"base_url", e.base_url},
       {"model", e.model},
       {"token_env", e.token_env},
       {"timeout_ms", e.timeout_ms},
       {"max_retries", e.max_retries}};
}

ChatClient::ChatClient(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  const std::string& url = endpoint_.base_url;
  if (!url.starts_with("http://")) {
    throw ConfigError("endpoint must be an http:// URL (built without TLS support): '" + url + "'");
  }
  const std::size_t path = url.find('/', 7);
  host_ = url.substr(0, path);
  path_prefix_ = path == std::string::npos ? "" : url.substr(path);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  const char* token = std::getenv(endpoint_.token_env.c_str());
  if (token == nullptr || *token == '\0') {
    throw ConfigError("environment variable " + endpoint_.token_env + " is not set");
  }
  token_ = token;
}

std::string ChatClient::complete(const nlohmann::json& messages) const {
  httplib::Client client(host_);
  const auto seconds = endpoint_.timeout_ms / 1000;
  const auto micros = (endpoint_.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_bearer_token_auth(token_);

  const nlohmann::json body = {{"model", endpoint_.model}, {"messages", messages}, {"temperature", 0}};
  const std::string path = path_prefix_ + "/v1/chat/completions";
  std::string last_error;
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("chat endpoint returned HTTP " + std::to_string(res->status));
    }
    auto doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) throw ProtocolError(res->body, "chat response is not JSON");
    try {
      return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError(res->body, "chat response has no choices[0].message.content");
    }
  }
  throw TransportError("chat endpoint unreachable: " + last_error);
}

nlohmann::json chat_messages(const Trajectory& trajectory) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : trajectory.turns) {
    switch (t.role) {
      case Role::System: out.push_back({{"role", "system"}, {"content", t.content}}); break;
      case Role::User: out.push_back({{"role", "user"}, {"content", t.content}}); break;
      case Role::Assistant: out.push_back({{"role", "assistant"}, {"content", t.content}}); break;
      case Role::Function:
        out.push_back({{"role", "user"}, {"content", "Observation: " + t.content}});
        break;
    }
  }
  return out;
}

AgentAction RemoteChatPolicy::decide(const AgentContext& context) const {
  return parse_action(client_.complete(chat_messages(context.trajectory)));
}

}  // namespace toolfault
