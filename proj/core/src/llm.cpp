// Copyright 2026 The surgvl Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "surgvl/llm.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "surgvl/datagen.hpp"
#include "surgvl/errors.hpp"
#include "surgvl/hash.hpp"

// Last: pulls in <resolv.h>, whose _res macro collides with Eigen internals.
#include <httplib.h>

namespace surgvl {

namespace {

std::string strip_period(std::string s) {
  while (!s.empty() && (s.back() == '.' || s.back() == ' ' || s.back() == '\n')) s.pop_back();
  return s;
}

}  // namespace

std::string MockLlmBackend::complete(const std::string& prompt) {
  const auto parsed = parse_prompt(prompt);
  if (!parsed) return prompt;
  const std::string c = strip_period(parsed->first);
  switch (parsed->second) {
    case TaskKind::conversation:
      return fmt::format("Q: What does the scene show?\nA: {}.", c);
    case TaskKind::detail_description:
      return fmt::format("The scene shows {}.", c);
    case TaskKind::complex_reasoning:
      return fmt::format(
          "Q: What is happening in the scene?\nA: {}.\n"
          "Q: Why does this matter for the procedure?\n"
          "A: Because {} tells the team which step comes next.",
          c, c);
  }
  return prompt;
}

HttpBackendConfig http_backend_config_from_env() {
  HttpBackendConfig c;
  const char* key = std::getenv(kApiKeyEnv);
  if (key == nullptr || *key == '\0') {
    throw AuthError(fmt::format("live backend needs credentials in {}", kApiKeyEnv));
  }
  c.api_key = key;
  const char* base = std::getenv(kBaseUrlEnv);
  c.base_url = (base && *base) ? base : "https://api.openai.com";
  const char* model = std::getenv(kModelEnv);
  if (model && *model) c.model = model;
  return c;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw ConfigError("live backend has no base URL");
}

std::string HttpChatBackend::complete(const std::string& prompt) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  const nlohmann::json body = {
      {"model", config_.model},
      {"temperature", config_.temperature},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransientBackendError("request failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 401 || res->status == 403) {
    throw AuthError(fmt::format("backend rejected credentials (HTTP {})", res->status));
  }
  if (res->status == 408 || res->status == 429 || res->status >= 500) {
    throw TransientBackendError(fmt::format("backend returned HTTP {}", res->status));
  }
  if (res->status != 200) {
    throw BackendError(fmt::format("backend returned HTTP {}", res->status));
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed backend response: ") + e.what());
  }
}

LlmClient::LlmClient(std::shared_ptr<LlmBackend> backend, RetryPolicy policy, Sleeper sleeper)
    : backend_(std::move(backend)), policy_(policy), sleeper_(std::move(sleeper)) {
  if (!backend_) throw ConfigError("no LLM backend configured");
  if (policy_.max_attempts < 1) throw ConfigError("retry policy needs at least one attempt");
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string LlmClient::generator() const {
  return backend_->id() + "/" + backend_->model();
}

std::string LlmClient::call(const std::string& prompt) {
  const std::string hash = sha256_hex(prompt);
  std::promise<std::string> promise;
  std::optional<std::shared_future<std::string>> pending;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(hash); it != cache_.end()) return it->second;
    if (auto it = in_flight_.find(hash); it != in_flight_.end()) {
      pending = it->second;
    } else {
      in_flight_.emplace(hash, promise.get_future().share());
    }
  }
  if (pending) return pending->get();
  try {
    std::string out = call_with_retries(prompt, hash);
    {
      std::lock_guard<std::mutex> lock(mu_);
      cache_[hash] = out;
      in_flight_.erase(hash);
    }
    promise.set_value(out);
    return out;
  } catch (...) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      in_flight_.erase(hash);
    }
    promise.set_exception(std::current_exception());
    throw;
  }
}

std::string LlmClient::call_with_retries(const std::string& prompt, const std::string& hash) {
  auto backoff = policy_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    AttemptRecord rec{hash, attempt, false, {}};
    try {
      ++backend_calls_;
      std::string out = backend_->complete(prompt);
      rec.ok = true;
      std::lock_guard<std::mutex> lock(mu_);
      attempts_.push_back(rec);
      return out;
    } catch (const TransientBackendError& e) {
      rec.error = e.what();
      {
        std::lock_guard<std::mutex> lock(mu_);
        attempts_.push_back(rec);
      }
      if (attempt >= policy_.max_attempts) {
        throw BackendError(fmt::format("giving up after {} attempts: {}", attempt, e.what()));
      }
      spdlog::warn("backend attempt {} failed ({}); retrying in {} ms", attempt, e.what(),
                   backoff.count());
      sleeper_(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long>(std::llround(backoff.count() * policy_.multiplier)));
    } catch (const Error& e) {
      rec.error = e.what();
      std::lock_guard<std::mutex> lock(mu_);
      attempts_.push_back(rec);
      throw;
    }
  }
}

std::vector<AttemptRecord> LlmClient::attempts() const {
  std::lock_guard<std::mutex> lock(mu_);
  return attempts_;
}

std::size_t LlmClient::cache_size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.size();
}

void LlmClient::load_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return;
  std::lock_guard<std::mutex> lock(mu_);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      cache_[j.at("prompt_hash").get<std::string>()] = j.at("response").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(fmt::format("{}:{}: bad cache line: {}", path.string(), lineno, e.what()));
    }
  }
}

void LlmClient::save_cache(const std::filesystem::path& path) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [hash, response] : cache_) {
    out << nlohmann::json{{"prompt_hash", hash}, {"response", response}}.dump() << '\n';
  }
}

}  // namespace surgvl
