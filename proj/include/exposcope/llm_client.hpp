#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace exposcope {

struct DecodingParams {
  double temperature = 0.7;
  int max_tokens = 256;
};

struct ChatRequest {
  std::string prompt;
  DecodingParams decoding;
  int trial = 1;    // 1-based trial ordinal
  int attempt = 0;  // retry ordinal within the trial
};

// Prompt text in, response text out. Implementations throw DomainError for
// failures the caller should treat as a failed attempt.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

struct HttpLlmConfig {
  std::string url;  // base URL; "/chat/completions" is appended unless present
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{60000};
  int max_attempts = 5;  // on HTTP 429/5xx and transport errors
  std::chrono::milliseconds initial_backoff{500};

  // Reads EXPOSCOPE_LLM_URL, EXPOSCOPE_LLM_MODEL and EXPOSCOPE_LLM_KEY.
  static HttpLlmConfig from_env();
};

// Chat-completions style endpoint.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(HttpLlmConfig config);
  std::string complete(const ChatRequest& request) override;

 private:
  HttpLlmConfig config_;
  std::string scheme_host_;
  std::string path_;
};

// Deterministic stand-in that answers according to a known exposure per label:
// direct prompts get a log-scaled score, comparisons pick the higher exposure,
// alias validation accepts every option.
class OracleLlmClient : public LlmClient {
 public:
  explicit OracleLlmClient(std::map<std::string, double> exposure_by_label);
  std::string complete(const ChatRequest& request) override;

  double exposure(const std::string& label) const;

 private:
  std::map<std::string, double> exposure_;
  double max_exposure_ = 0;
};

// Replays canned responses. The first rule whose `contains` text occurs in
// the prompt answers with responses[(trial - 1) % size]; retries within a
// trial see the same response.
class ScriptedLlmClient : public LlmClient {
 public:
  struct Rule {
    std::string contains;
    std::vector<std::string> responses;
  };

  ScriptedLlmClient(std::vector<Rule> rules, std::optional<std::string> fallback = std::nullopt);
  // {"rules": [{"contains": "...", "responses": ["..."]}], "default": "..."}
  static ScriptedLlmClient from_file(const std::filesystem::path& path);

  std::string complete(const ChatRequest& request) override;

 private:
  std::vector<Rule> rules_;
  std::optional<std::string> fallback_;
};

class FunctionLlmClient : public LlmClient {
 public:
  explicit FunctionLlmClient(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const ChatRequest& request) override { return fn_(request); }

 private:
  std::function<std::string(const ChatRequest&)> fn_;
};

}  // namespace exposcope
