#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace caseret {

struct ChatRequest {
  std::string system_prompt;
  std::string user_content;
  // Not sent over the wire; keys fixture lookups.
  std::string case_id;
};

// Transport failures throw Error{Transport, retryable = true}.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

std::string prompt_hash(const std::string& system_prompt);

// Serves responses from JSON Lines fixtures keyed by (prompt hash, case id).
// Each fixture line is {"case_id", "prompt_hash" | "system_prompt", "response"}.
// A request without a fixture fails as a non-retryable transport error.
class MockLlmClient : public LlmClient {
 public:
  MockLlmClient() = default;
  MockLlmClient(MockLlmClient&& other) noexcept
      : fixtures_(std::move(other.fixtures_)), calls_(other.calls_.load()) {}
  // Loads every *.jsonl file in the directory.
  static MockLlmClient from_directory(const std::filesystem::path& dir);

  void add(const std::string& prompt_hash, const std::string& case_id, std::string response);
  std::string complete(const ChatRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t size() const { return fixtures_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, std::string> fixtures_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpLlmConfig {
  // Full chat-completions URL, e.g. http://localhost:8000/v1/chat/completions.
  std::string endpoint;
  std::string model;
  std::string api_key;
  double temperature = 0.0;
  std::chrono::seconds timeout{120};
};

inline constexpr const char* kEnvLlmEndpoint = "CASERET_LLM_ENDPOINT";
inline constexpr const char* kEnvLlmModel = "CASERET_LLM_MODEL";
inline constexpr const char* kEnvLlmApiKey = "CASERET_LLM_API_KEY";

// Reads the endpoint, model, and key variables; nullopt when the endpoint is unset.
std::optional<HttpLlmConfig> http_config_from_env();

// OpenAI-compatible chat-completion client; the system prompt and the case
// text go out as separate system and user messages.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(HttpLlmConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  HttpLlmConfig config_;
  std::string base_;
  std::string path_;
};

// Retries retryable failures up to `max_attempts` total attempts.
class RetryingLlmClient : public LlmClient {
 public:
  RetryingLlmClient(LlmClient& inner, int max_attempts,
                    std::chrono::milliseconds backoff = std::chrono::milliseconds(500));
  std::string complete(const ChatRequest& request) override;

 private:
  LlmClient& inner_;
  int max_attempts_;
  std::chrono::milliseconds backoff_;
};

}  // namespace caseret
