#include "promptloom/backend.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace promptloom {

std::string prompt_hash(std::string_view prompt) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : prompt) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

MockBackend::MockBackend(std::vector<MockRule> rules) {
  for (auto& r : rules) register_rule(std::move(r));
}

void MockBackend::register_rule(MockRule rule) {
  std::lock_guard lock(mutex_);
  Compiled c{std::move(rule), std::nullopt, next_order_++};
  if (auto* re = std::get_if<RegexMatch>(&c.rule.matcher)) c.regex.emplace(re->pattern);
  auto pos = std::find_if(rules_.begin(), rules_.end(), [&](const Compiled& other) {
    return other.rule.priority < c.rule.priority;
  });
  rules_.insert(pos, std::move(c));
}

void MockBackend::clear_rules() {
  std::lock_guard lock(mutex_);
  rules_.clear();
}

std::size_t MockBackend::rule_count() const {
  std::lock_guard lock(mutex_);
  return rules_.size();
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

bool MockBackend::matches(const Compiled& c, const std::string& prompt,
                          const std::string& hash) const {
  return std::visit(
      [&](const auto& m) -> bool {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ExactPrompt>) {
          return m.hash == hash;
        } else if constexpr (std::is_same_v<M, ContainsSubstring>) {
          return prompt.find(m.needle) != std::string::npos;
        } else {
          return std::regex_search(prompt, *c.regex);
        }
      },
      c.rule.matcher);
}

RawCompletion MockBackend::complete(const PromptRequest& request) const {
  const std::string hash = prompt_hash(request.prompt);
  std::lock_guard lock(mutex_);
  ++calls_;
  for (const auto& c : rules_) {
    if (c.consumed || !matches(c, request.prompt, hash)) continue;
    if (c.rule.once) c.consumed = true;
    return RawCompletion{c.rule.completion, c.rule.finish_reason};
  }
  throw NoRuleMatched("no mock rule matches prompt " + hash);
}

// ---------------------------------------------------------------------------
// Rules files
// ---------------------------------------------------------------------------

std::vector<MockRule> parse_mock_rules(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", std::string("mock rules are not valid JSON: ") + e.what());
  }
  nlohmann::json list;
  if (doc.is_array()) {
    list = doc;
  } else if (doc.is_object() && doc.size() == 1 && doc.contains("rules") && doc["rules"].is_array()) {
    list = doc["rules"];
  } else {
    throw SchemaError("/rules", "expected an array of rules or {\"rules\": [...]}");
  }

  static const std::set<std::string> matchers = {"contains", "regex", "exactPrompt", "exactPromptHash"};
  static const std::set<std::string> known = {"contains", "regex",    "exactPrompt", "exactPromptHash",
                                              "completion", "priority", "once",      "finishReason"};
  std::vector<MockRule> rules;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& r = list[i];
    const std::string where = "/rules/" + std::to_string(i);
    if (!r.is_object()) throw SchemaError(where, "rule must be an object");
    std::string matcher_key;
    for (const auto& [key, value] : r.items()) {
      if (!known.count(key)) throw SchemaError(where + "/" + key, "unknown field");
      if (matchers.count(key)) {
        if (!matcher_key.empty()) throw SchemaError(where + "/" + key, "only one matcher per rule");
        if (!value.is_string()) throw SchemaError(where + "/" + key, "expected a string");
        matcher_key = key;
      }
    }
    if (matcher_key.empty()) {
      throw SchemaError(where, "needs one of contains, regex, exactPrompt, exactPromptHash");
    }
    if (!r.contains("completion") || !r["completion"].is_string()) {
      throw SchemaError(where + "/completion", "expected a string");
    }
    MockRule rule;
    const auto text = r[matcher_key].get<std::string>();
    if (matcher_key == "exactPrompt") {
      rule.matcher = ExactPrompt{prompt_hash(text)};
    } else if (matcher_key == "exactPromptHash") {
      rule.matcher = ExactPrompt{text};
    } else if (matcher_key == "regex") {
      try {
        std::regex check(text);
      } catch (const std::regex_error& e) {
        throw SchemaError(where + "/regex", std::string("invalid pattern: ") + e.what());
      }
      rule.matcher = RegexMatch{text};
    } else {
      rule.matcher = ContainsSubstring{text};
    }
    rule.completion = r["completion"].get<std::string>();
    if (r.contains("priority")) {
      if (!r["priority"].is_number_integer()) throw SchemaError(where + "/priority", "expected an integer");
      rule.priority = r["priority"].get<int>();
    }
    if (r.contains("once")) {
      if (!r["once"].is_boolean()) throw SchemaError(where + "/once", "expected a boolean");
      rule.once = r["once"].get<bool>();
    }
    if (r.contains("finishReason")) {
      const auto& f = r["finishReason"];
      if (f == "stop") rule.finish_reason = FinishReason::Stop;
      else if (f == "length") rule.finish_reason = FinishReason::Length;
      else if (f == "error") rule.finish_reason = FinishReason::Error;
      else throw SchemaError(where + "/finishReason", "expected stop, length or error");
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<MockRule> load_mock_rules(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mock rules file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mock_rules(ss.str());
}

// ---------------------------------------------------------------------------
// Factory
// ---------------------------------------------------------------------------

std::unique_ptr<Backend> from_config(const BackendConfig& config) {
  if (config.kind == BackendConfig::Kind::Mock) return std::make_unique<MockBackend>();

  BackendConfig cfg = config;
  if (cfg.base_url.empty()) {
    if (const char* env = std::getenv(kBaseUrlEnv)) cfg.base_url = env;
  }
  if (cfg.base_url.empty()) throw BadUrl("");
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') throw MissingApiKey(cfg.api_key_env);
  return std::make_unique<HttpBackend>(cfg, key);
}

}  // namespace promptloom
