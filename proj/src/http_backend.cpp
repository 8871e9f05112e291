#include <chrono>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "promptloom/backend.hpp"

namespace promptloom {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

ParsedUrl parse_base_url(const std::string& url) {
  static const std::regex re(R"(^(https?)://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:.]+\])(:[0-9]{1,5})?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw BadUrl(url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (m[1] == "https") throw BadUrl(url + " (built without TLS support)");
#endif
  ParsedUrl out;
  out.origin = m[1].str() + "://" + m[2].str() + m[3].str();
  out.path = m[4].str();
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

std::chrono::microseconds to_micros(double seconds) {
  return std::chrono::microseconds(static_cast<long long>(seconds * 1e6));
}

}  // namespace

// The only type able to open a socket. Its constructor is private to
// HttpBackend, so no other backend can obtain one.
class HttpTransport {
 public:
  struct Response {
    int status = 0;
    std::string body;
  };

  Response post(const std::string& body) const {
    httplib::Client client(url_.origin);
    const auto t = to_micros(timeout_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(t);
    const auto usecs = (t - secs).count();
    client.set_connection_timeout(secs.count(), usecs);
    client.set_read_timeout(secs.count(), usecs);
    client.set_write_timeout(secs.count(), usecs);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(url_.path + "/completions", headers, body, "application/json");
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || elapsed >= timeout_ * 0.95) {
        throw TimeoutError("request timed out after " + std::to_string(elapsed) + "s");
      }
      throw TransportError("transport failure: " + httplib::to_string(err));
    }
    return Response{res->status, res->body};
  }

 private:
  friend class HttpBackend;
  HttpTransport(ParsedUrl url, std::string api_key, double timeout)
      : url_(std::move(url)), api_key_(std::move(api_key)), timeout_(timeout) {}

  ParsedUrl url_;
  std::string api_key_;
  double timeout_;
};

HttpBackend::HttpBackend(const BackendConfig& config, std::string api_key)
    : config_(config) {
  if (config.timeout_seconds <= 0) throw Error("timeout must be positive");
  auto url = parse_base_url(config.base_url);
  base_url_ = url.origin + url.path;
  transport_.reset(new HttpTransport(std::move(url), std::move(api_key), config.timeout_seconds));
}

HttpBackend::~HttpBackend() = default;

RawCompletion HttpBackend::complete(const PromptRequest& request) const {
  const nlohmann::json payload = {
      {"prompt", request.prompt},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
      {"stop", request.stop_sequences},
  };
  const std::string body = payload.dump();

  double backoff = config_.backoff_seconds;
  for (int attempt = 0;; ++attempt) {
    const bool last = attempt >= config_.max_retries;
    try {
      auto res = transport_->post(body);
      if (res.status >= 400 && res.status < 500) throw HttpStatusError(res.status, res.body);
      if (res.status >= 500) {
        if (last) throw HttpStatusError(res.status, res.body);
      } else if (res.status >= 200 && res.status < 300) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(res.body);
        } catch (const nlohmann::json::parse_error&) {
          throw BackendError("response body is not JSON");
        }
        if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string()) {
          throw BackendError("response body lacks a string 'text' field");
        }
        RawCompletion out{doc["text"].get<std::string>(), FinishReason::Stop};
        if (auto it = doc.find("finish_reason"); it != doc.end() && it->is_string()) {
          if (*it == "length") out.finish_reason = FinishReason::Length;
          else if (*it == "error") out.finish_reason = FinishReason::Error;
        }
        return out;
      } else {
        throw HttpStatusError(res.status, res.body);
      }
    } catch (const TimeoutError&) {
      if (last) throw;
    } catch (const TransportError&) {
      if (last) throw;
    }
    std::this_thread::sleep_for(to_micros(backoff));
    backoff *= 2;
  }
}

}  // namespace promptloom
