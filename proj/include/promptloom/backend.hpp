#pragma once

// Completion backends. The engine only sees Backend::complete; providers are
// interchangeable behind it.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <regex>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "promptloom/parser.hpp"
#include "promptloom/prompt.hpp"

namespace promptloom {

inline constexpr const char* kApiKeyEnv = "PROMPTLOOM_API_KEY";
inline constexpr const char* kBaseUrlEnv = "PROMPTLOOM_BASE_URL";

class Backend {
 public:
  virtual ~Backend() = default;
  // Safe to call concurrently.
  virtual RawCompletion complete(const PromptRequest& request) const = 0;
};

// ---------------------------------------------------------------------------
// Mock
// ---------------------------------------------------------------------------

// 64-bit FNV-1a of the prompt, as 16 lowercase hex digits.
std::string prompt_hash(std::string_view prompt);

struct ExactPrompt {
  std::string hash;  // prompt_hash of the full prompt
};
struct ContainsSubstring {
  std::string needle;
};
struct RegexMatch {
  std::string pattern;
};

using Matcher = std::variant<ExactPrompt, ContainsSubstring, RegexMatch>;

struct MockRule {
  Matcher matcher;
  std::string completion;
  int priority = 0;
  bool once = false;  // consumed by its first match (scripted replay)
  FinishReason finish_reason = FinishReason::Stop;
};

// Deterministic rule-driven backend. Rules are tried by descending priority,
// then insertion order; the first match wins. Never opens a connection.
class MockBackend final : public Backend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::vector<MockRule> rules);

  void register_rule(MockRule rule);
  void clear_rules();
  std::size_t rule_count() const;
  std::size_t calls() const;

  RawCompletion complete(const PromptRequest& request) const override;

 private:
  struct Compiled {
    MockRule rule;
    std::optional<std::regex> regex;
    std::size_t order;
    mutable bool consumed = false;
  };

  bool matches(const Compiled& c, const std::string& prompt, const std::string& hash) const;

  mutable std::mutex mutex_;
  std::vector<Compiled> rules_;  // kept sorted by (priority desc, order)
  std::size_t next_order_ = 0;
  mutable std::size_t calls_ = 0;
};

// ---------------------------------------------------------------------------
// HTTP
// ---------------------------------------------------------------------------

struct BackendConfig {
  enum class Kind { Mock, Http };
  Kind kind = Kind::Mock;
  std::string base_url;  // Http; falls back to $PROMPTLOOM_BASE_URL
  std::string api_key_env = kApiKeyEnv;
  double timeout_seconds = 30.0;
  int max_retries = 2;
  double backoff_seconds = 0.1;  // doubled after every failed attempt
};

class HttpTransport;

// POST {base}/completions with {prompt, temperature, max_tokens, stop};
// reads {text, finish_reason?}. Transport failures and 5xx are retried up to
// max_retries times with exponential backoff; 4xx is raised immediately.
class HttpBackend final : public Backend {
 public:
  HttpBackend(const BackendConfig& config, std::string api_key);
  ~HttpBackend() override;

  RawCompletion complete(const PromptRequest& request) const override;
  const std::string& base_url() const noexcept { return base_url_; }

 private:
  std::string base_url_;
  std::unique_ptr<HttpTransport> transport_;
  BackendConfig config_;
};

// Throws MissingApiKey or BadUrl for unusable Http configs.
std::unique_ptr<Backend> from_config(const BackendConfig& config);

// Rules file: {"rules": [{"contains"|"regex"|"exactPrompt"|"exactPromptHash": ...,
// "completion": "...", "priority": 0, "once": false, "finishReason": "stop"}]}
std::vector<MockRule> load_mock_rules(const std::string& path);
std::vector<MockRule> parse_mock_rules(std::string_view json_text);

}  // namespace promptloom
