#include "stepsearch/http.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace stepsearch {

using nlohmann::json;

HttpEndpoint HttpEndpoint::parse(std::string_view url) {
  const auto scheme = url.find("://");
  if (scheme == std::string_view::npos) {
    throw std::invalid_argument("URL needs a scheme: " + std::string(url));
  }
  const auto path = url.find('/', scheme + 3);
  HttpEndpoint endpoint;
  endpoint.origin = std::string(url.substr(0, path));
  if (path != std::string_view::npos) endpoint.prefix = std::string(url.substr(path));
  while (!endpoint.prefix.empty() && endpoint.prefix.back() == '/') endpoint.prefix.pop_back();
  return endpoint;
}

json post_json(const HttpEndpoint& endpoint, const std::string& path, const json& body,
               const RetryPolicy& retry, const std::string& auth_header,
               std::chrono::seconds timeout) {
  const std::string payload = body.dump();
  auto backoff = retry.initial_backoff;
  std::string last_error = "no attempts made";
  const int attempts = std::max(retry.attempts, 1);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(endpoint.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    httplib::Headers headers;
    if (!auth_header.empty()) headers.emplace("Authorization", auth_header);
    auto result = client.Post(endpoint.prefix + path, headers, payload, "application/json");
    bool retryable = true;
    if (!result) {
      last_error = "connection failed: " + httplib::to_string(result.error());
    } else if (result->status >= 200 && result->status < 300) {
      try {
        return json::parse(result->body);
      } catch (const json::parse_error& e) {
        last_error = std::string("malformed response body: ") + e.what();
        retryable = false;
      }
    } else {
      last_error = "HTTP " + std::to_string(result->status);
      retryable = result->status == 429 || result->status >= 500;
    }
    if (!retryable || attempt == attempts) break;
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
  throw TransportError("POST " + endpoint.origin + endpoint.prefix + path + ": " + last_error);
}

HttpChatBackend::HttpChatBackend(HttpChatConfig config, PromptConfig prompts)
    : config_(std::move(config)),
      prompts_(std::move(prompts)),
      endpoint_(HttpEndpoint::parse(config_.base_url)) {}

std::vector<std::string> HttpChatBackend::complete(const std::vector<ChatMessage>& messages, int n,
                                                   const CallOptions& options) {
  json body{{"model", config_.model},
            {"temperature", options.temperature},
            {"n", n},
            {"max_tokens", config_.max_tokens},
            {"seed", options.seed},
            {"messages", json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  std::string auth;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key) {
    auth = std::string("Bearer ") + key;
  }
  const json response =
      post_json(endpoint_, "/chat/completions", body, config_.retry, auth, config_.timeout);
  std::vector<std::string> texts;
  try {
    for (const auto& choice : response.at("choices")) {
      texts.push_back(choice.at("message").at("content").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("unexpected chat-completion response: ") + e.what());
  }
  return texts;
}

std::vector<std::string> HttpChatBackend::propose(const Problem& problem, const Trajectory& state,
                                                  int n, const CallOptions& options) {
  auto texts = complete(agent_messages(prompts_, problem, state), n, options);
  if (static_cast<int>(texts.size()) > n) texts.resize(static_cast<std::size_t>(n));
  return texts;
}

std::string HttpChatBackend::execute(const Problem& problem, const Trajectory& state,
                                     std::string_view thought, const CallOptions& options) {
  auto texts = complete(world_messages(prompts_, problem, state, thought), 1, options);
  if (texts.empty()) throw TransportError("chat-completion returned no choices");
  return texts.front();
}

}  // namespace stepsearch
