#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/llm.hpp"

namespace caseret {

HttpLlmClient::HttpLlmClient(HttpLlmConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) fail(ErrorKind::Config, "LLM endpoint must be an http(s) URL");
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  base_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : config_.endpoint.substr(path_start);
  if (config_.model.empty()) fail(ErrorKind::Config, "LLM model name is not set");
}

std::string HttpLlmClient::complete(const ChatRequest& request) {
  const nlohmann::json body = {
      {"model", config_.model},
      {"temperature", config_.temperature},
      {"messages",
       {{{"role", "system"}, {"content", request.system_prompt}},
        {{"role", "user"}, {"content", request.user_content}}}},
  };
  httplib::Client client(base_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorKind::Transport, "request to " + base_ + " failed: " + httplib::to_string(res.error()), true);
  if (res->status == 429 || res->status >= 500)
    throw Error(ErrorKind::Transport, "LLM endpoint returned HTTP " + std::to_string(res->status), true);
  if (res->status != 200)
    throw Error(ErrorKind::Transport, "LLM endpoint returned HTTP " + std::to_string(res->status), false, res->body);

  try {
    const auto reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed chat-completion reply: ") + e.what(), false, res->body);
  }
}

}  // namespace caseret
