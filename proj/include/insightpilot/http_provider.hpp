#pragma once

// Chat-completions provider over HTTP(S). Define CPPHTTPLIB_OPENSSL_SUPPORT
// before including (the CMake target does when OpenSSL is found) to reach
// https endpoints.

#include <chrono>
#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "insightpilot/error.hpp"
#include "insightpilot/provider.hpp"
#include "insightpilot/text.hpp"

namespace insightpilot {

struct HttpProviderConfig {
  std::string baseUrl;  ///< e.g. https://api.example.com/v1
  std::string apiKey;
  std::string model;
  int timeoutMs = 30000;
  double temperature = 0.0;

  /// PROVIDER_BASE_URL, PROVIDER_API_KEY, PROVIDER_MODEL,
  /// PROVIDER_TIMEOUT_MS, PROVIDER_TEMPERATURE.
  static HttpProviderConfig from_env() {
    auto env = [](const char* k) -> std::string {
      const char* v = std::getenv(k);
      return v ? v : "";
    };
    HttpProviderConfig c;
    c.baseUrl = env("PROVIDER_BASE_URL");
    c.apiKey = env("PROVIDER_API_KEY");
    c.model = env("PROVIDER_MODEL");
    double v;
    if (text::parse_number(env("PROVIDER_TIMEOUT_MS"), v) && v > 0) c.timeoutMs = static_cast<int>(v);
    if (text::parse_number(env("PROVIDER_TEMPERATURE"), v)) c.temperature = v;
    return c;
  }
};

class HttpProvider : public Provider {
 public:
  explicit HttpProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.baseUrl.empty()) fail(ErrorCode::InvalidArgument, "PROVIDER_BASE_URL is not set");
    auto scheme = cfg_.baseUrl.find("://");
    const std::size_t hostStart = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = cfg_.baseUrl.find('/', hostStart);
    origin_ = slash == std::string::npos ? cfg_.baseUrl : cfg_.baseUrl.substr(0, slash);
    prefix_ = slash == std::string::npos ? "" : cfg_.baseUrl.substr(slash);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  std::string id() const override { return "http:" + cfg_.model; }

  /// One retry on transport failure; a reply that arrives after the
  /// deadline is discarded.
  std::string complete(const PromptDoc& prompt, const Limits& limits) override {
    const int timeoutMs = limits.timeoutMs > 0 ? std::min(limits.timeoutMs, cfg_.timeoutMs) : cfg_.timeoutMs;
    nlohmann::json body = {{"model", cfg_.model},
                           {"messages", {{{"role", "user"}, {"content", prompt.render()}}}},
                           {"max_tokens", limits.maxTokens},
                           {"temperature", cfg_.temperature}};
    const std::string payload = body.dump();
    std::string lastError;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const auto start = std::chrono::steady_clock::now();
      httplib::Client cli(origin_);
      const auto ms = std::chrono::milliseconds(timeoutMs);
      cli.set_connection_timeout(ms);
      cli.set_read_timeout(ms);
      cli.set_write_timeout(ms);
      httplib::Headers headers;
      if (!cfg_.apiKey.empty()) headers.emplace("Authorization", "Bearer " + cfg_.apiKey);
      auto res = cli.Post(prefix_ + "/chat/completions", headers, payload, "application/json");
      const auto elapsed = std::chrono::steady_clock::now() - start;
      if (!res) {
        lastError = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (elapsed > ms) fail(ErrorCode::ProviderError, "completion exceeded " + std::to_string(timeoutMs) + " ms");
      if (res->status < 200 || res->status >= 300)
        fail(ErrorCode::ProviderError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
      auto j = nlohmann::json::parse(res->body, nullptr, false);
      try {
        if (!j.is_discarded()) return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception&) {
      }
      fail(ErrorCode::ProviderError, "response has no choices[0].message.content");
    }
    fail(ErrorCode::ProviderError, lastError);
  }

 private:
  HttpProviderConfig cfg_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace insightpilot
