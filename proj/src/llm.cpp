#include "caseret/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "caseret/error.hpp"
#include "caseret/io.hpp"
#include "caseret/text.hpp"

namespace caseret {

std::string prompt_hash(const std::string& system_prompt) { return text::hex64(text::fnv1a64(system_prompt)); }

MockLlmClient MockLlmClient::from_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorKind::Config, "mock LLM fixtures dir " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  MockLlmClient client;
  for (const auto& file : files) {
    io::for_each_line(file, [&](std::string_view line, std::size_t number) {
      if (text::trim(line).empty()) return;
      const auto where = file.filename().string() + ":" + std::to_string(number) + ": ";
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        std::string hash;
        if (j.contains("prompt_hash"))
          hash = j.at("prompt_hash").get<std::string>();
        else
          hash = prompt_hash(j.at("system_prompt").get<std::string>());
        client.add(hash, j.at("case_id").get<std::string>(), j.at("response").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, where + e.what());
      }
    });
  }
  return client;
}

void MockLlmClient::add(const std::string& hash, const std::string& case_id, std::string response) {
  fixtures_[{hash, case_id}] = std::move(response);
}

std::string MockLlmClient::complete(const ChatRequest& request) {
  ++calls_;
  const auto hash = prompt_hash(request.system_prompt);
  const auto it = fixtures_.find({hash, request.case_id});
  if (it == fixtures_.end())
    throw Error(ErrorKind::Transport, "no mock fixture for case " + request.case_id + " prompt " + hash);
  return it->second;
}

std::optional<HttpLlmConfig> http_config_from_env() {
  const char* endpoint = std::getenv(kEnvLlmEndpoint);
  if (!endpoint || !*endpoint) return std::nullopt;
  HttpLlmConfig cfg;
  cfg.endpoint = endpoint;
  if (const char* model = std::getenv(kEnvLlmModel)) cfg.model = model;
  if (const char* key = std::getenv(kEnvLlmApiKey)) cfg.api_key = key;
  return cfg;
}

RetryingLlmClient::RetryingLlmClient(LlmClient& inner, int max_attempts, std::chrono::milliseconds backoff)
    : inner_(inner), max_attempts_(std::max(1, max_attempts)), backoff_(backoff) {}

std::string RetryingLlmClient::complete(const ChatRequest& request) {
  for (int attempt = 1;; ++attempt) {
    try {
      return inner_.complete(request);
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= max_attempts_) throw;
    }
    std::this_thread::sleep_for(backoff_ * attempt);
  }
}

}  // namespace caseret
