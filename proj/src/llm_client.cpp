#include "exposcope/llm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "exposcope/error.hpp"
#include "exposcope/io.hpp"
#include "exposcope/prompts.hpp"

namespace exposcope {

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("LLM URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

}  // namespace

HttpLlmConfig HttpLlmConfig::from_env() {
  HttpLlmConfig cfg;
  cfg.url = env_or_empty("EXPOSCOPE_LLM_URL");
  cfg.model = env_or_empty("EXPOSCOPE_LLM_MODEL");
  cfg.api_key = env_or_empty("EXPOSCOPE_LLM_KEY");
  if (cfg.url.empty()) throw ConfigError("EXPOSCOPE_LLM_URL is not set");
  if (cfg.model.empty()) throw ConfigError("EXPOSCOPE_LLM_MODEL is not set");
  return cfg;
}

HttpLlmClient::HttpLlmClient(HttpLlmConfig config) : config_(std::move(config)) {
  auto [host, path] = split_url(config_.url);
  while (!path.empty() && path.back() == '/') path.pop_back();
  const std::string suffix = "/chat/completions";
  if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    path += suffix;
  }
  scheme_host_ = host;
  path_ = path;
}

std::string HttpLlmClient::complete(const ChatRequest& request) {
  const nlohmann::json body = {
      {"model", config_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.decoding.temperature},
      {"max_tokens", request.decoding.max_tokens}};
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto backoff = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client cli(scheme_host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count();
    cli.set_read_timeout(static_cast<time_t>(secs), 0);
    cli.set_connection_timeout(10, 0);
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw DomainError("LLM endpoint returned HTTP " + std::to_string(res->status));
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw DomainError("LLM endpoint returned an unexpected body");
    }
  }
  throw DomainError("LLM endpoint unavailable after retries: " + last_error);
}

OracleLlmClient::OracleLlmClient(std::map<std::string, double> exposure_by_label)
    : exposure_(std::move(exposure_by_label)) {
  for (const auto& [label, e] : exposure_) max_exposure_ = std::max(max_exposure_, e);
}

double OracleLlmClient::exposure(const std::string& label) const {
  if (auto it = exposure_.find(label); it != exposure_.end()) return it->second;
  // Alias-decorated names look like "label (a, b)".
  if (const auto paren = label.find(" ("); paren != std::string::npos) {
    if (auto it = exposure_.find(label.substr(0, paren)); it != exposure_.end()) return it->second;
  }
  throw DomainError("oracle has no exposure for '" + label + "'");
}

std::string OracleLlmClient::complete(const ChatRequest& request) {
  const auto f = inspect_prompt(request.prompt);
  switch (f.kind) {
    case PromptFields::Kind::Alias: {
      nlohmann::json all = nlohmann::json::array();
      for (std::size_t i = 1; i <= f.option_count; ++i) all.push_back(i);
      return all.dump();
    }
    case PromptFields::Kind::Direct: {
      const double e = exposure(f.entity);
      const double score = max_exposure_ > 0 ? 1000 * std::log1p(e) / std::log1p(max_exposure_) : 0;
      return std::to_string(static_cast<int>(std::lround(score)));
    }
    case PromptFields::Kind::Comparison: {
      const double a = exposure(f.first), b = exposure(f.second);
      const bool first_wins = a != b ? a > b : f.first < f.second;
      const nlohmann::json out = {
          {"e1", f.first},
          {"e2", f.second},
          {"justification", (first_wins ? f.first : f.second) + " appears more often in the corpus."},
          {"option", first_wins ? 1 : 2}};
      return out.dump();
    }
    case PromptFields::Kind::Unknown:
      break;
  }
  throw DomainError("oracle client does not recognize the prompt");
}

ScriptedLlmClient::ScriptedLlmClient(std::vector<Rule> rules, std::optional<std::string> fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {
  for (const auto& r : rules_) {
    if (r.responses.empty()) throw ConfigError("scripted rule '" + r.contains + "' has no responses");
  }
}

ScriptedLlmClient ScriptedLlmClient::from_file(const std::filesystem::path& path) {
  auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("malformed script " + path.string());
  std::vector<Rule> rules;
  try {
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
      rules.push_back({r.at("contains").get<std::string>(), r.at("responses").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed script rule in " + path.string() + ": " + e.what());
  }
  std::optional<std::string> fallback;
  if (j.contains("default")) fallback = j.at("default").get<std::string>();
  return ScriptedLlmClient(std::move(rules), std::move(fallback));
}

std::string ScriptedLlmClient::complete(const ChatRequest& request) {
  for (const auto& r : rules_) {
    if (request.prompt.find(r.contains) == std::string::npos) continue;
    const auto k = static_cast<std::size_t>(std::max(request.trial, 1) - 1) % r.responses.size();
    return r.responses[k];
  }
  if (fallback_) return *fallback_;
  throw DomainError("no scripted response for prompt");
}

}  // namespace exposcope
