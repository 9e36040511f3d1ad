#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

#include "stepsearch/backend.hpp"

namespace stepsearch {

/// "http://host:port/prefix" split into what cpp-httplib wants.
struct HttpEndpoint {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix without trailing slash, may be empty

  static HttpEndpoint parse(std::string_view url);
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
};

/// POSTs `body` as JSON and returns the parsed response. Connection errors,
/// 429 and 5xx are retried with exponential backoff; anything else, or the
/// final failed attempt, raises TransportError.
nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& path,
                         const nlohmann::json& body, const RetryPolicy& retry,
                         const std::string& auth_header = {},
                         std::chrono::seconds timeout = std::chrono::seconds(120));

struct HttpChatConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model;
  /// Name of the environment variable that holds the API key (never logged).
  std::string api_key_env = "STEPSEARCH_API_KEY";
  int max_tokens = 512;
  RetryPolicy retry;
  std::chrono::seconds timeout{120};
};

/// Remote agent/world model speaking the chat-completion wire format:
/// POST {base}/chat/completions with {model, messages, temperature, n,
/// max_tokens, seed}; candidates are choices[].message.content.
class HttpChatBackend final : public ChatBackend {
 public:
  HttpChatBackend(HttpChatConfig config, PromptConfig prompts);

  std::string name() const override { return "http(" + config_.base_url + ")"; }
  std::vector<std::string> propose(const Problem& problem, const Trajectory& state, int n,
                                   const CallOptions& options) override;
  std::string execute(const Problem& problem, const Trajectory& state, std::string_view thought,
                      const CallOptions& options) override;

 private:
  std::vector<std::string> complete(const std::vector<ChatMessage>& messages, int n,
                                    const CallOptions& options);

  HttpChatConfig config_;
  PromptConfig prompts_;
  HttpEndpoint endpoint_;
};

}  // namespace stepsearch
