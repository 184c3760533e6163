// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text-completion backends and a client that adds retries with exponential
// backoff and a prompt-hash keyed response cache.

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace surgvl {

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string model() const = 0;
  /// Throws TransientBackendError for retryable failures, AuthError for
  /// rejected credentials and BackendError otherwise.
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Deterministic offline backend. Generation prompts yield Q:/A: text built
/// from the caption (free text for detail descriptions); any other prompt
/// is echoed back.
class MockLlmBackend final : public LlmBackend {
 public:
  std::string id() const override { return "mock"; }
  std::string model() const override { return "mock-qa-1"; }
  std::string complete(const std::string& prompt) override;
};

struct HttpBackendConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  std::string api_key;
  double temperature = 0.0;
  int timeout_seconds = 60;
};

/// Environment used by live backends.
inline constexpr const char* kApiKeyEnv = "SURGVL_LLM_API_KEY";
inline constexpr const char* kBaseUrlEnv = "SURGVL_LLM_BASE_URL";
inline constexpr const char* kModelEnv = "SURGVL_LLM_MODEL";

/// Reads the three variables above. Throws AuthError when the key is unset.
HttpBackendConfig http_backend_config_from_env();

/// Chat-completions style JSON over HTTP(S). 401/403 map to AuthError;
/// 408, 429, 5xx and connection failures map to TransientBackendError.
class HttpChatBackend final : public LlmBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);
  std::string id() const override { return "http"; }
  std::string model() const override { return config_.model; }
  std::string complete(const std::string& prompt) override;

 private:
  HttpBackendConfig config_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
};

struct AttemptRecord {
  std::string prompt_hash;
  int attempt = 0;  // 1-based
  bool ok = false;
  std::string error;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Thread-safe wrapper: one backend call per distinct prompt, concurrent
/// requests for the same prompt share the in-flight result.
class LlmClient {
 public:
  LlmClient(std::shared_ptr<LlmBackend> backend, RetryPolicy policy = {},
            Sleeper sleeper = {});

  std::string call(const std::string& prompt);

  /// "<backend id>/<model>".
  std::string generator() const;
  long backend_calls() const { return backend_calls_.load(); }
  std::vector<AttemptRecord> attempts() const;

  /// JSONL lines {"prompt_hash","response"}.
  void load_cache(const std::filesystem::path& path);
  void save_cache(const std::filesystem::path& path) const;
  std::size_t cache_size() const;

 private:
  std::string call_with_retries(const std::string& prompt, const std::string& hash);

  std::shared_ptr<LlmBackend> backend_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> cache_;
  std::map<std::string, std::shared_future<std::string>> in_flight_;
  std::vector<AttemptRecord> attempts_;
  std::atomic<long> backend_calls_{0};
};

}  // namespace surgvl
