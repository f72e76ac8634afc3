#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "garssl/error.hpp"
#include "garssl/media.hpp"

namespace garssl {

struct DecodingParams {
  double temperature = 0.2;
  int max_tokens = 768;
};

/// Identity of one logical model call. Two calls with different trial
/// indices are distinct cache/replay entries even when their prompts match;
/// retry attempts index into the entry's response list instead.
struct RequestKey {
  std::string sample_id;
  std::string stage;  // stage name, optionally suffixed "@<class>" in duet mode
  int trial = 0;      // 1..n for analysis trials, 0 elsewhere
  std::string prompt_digest;

  std::string str() const;
};

struct MultimodalRequest {
  std::string system_text;
  std::string user_text;
  std::optional<MediaAttachment> image;
  std::optional<MediaAttachment> audio;
  DecodingParams decoding;
  std::string model;
  RequestKey key;  // prompt_digest filled by finalize_key()

  /// Computes key.prompt_digest from model, decoding params, texts, and
  /// attachment content digests.
  void finalize_key();
};

struct RawResponse {
  std::string text;
  double latency_ms = 0.0;
  std::string backend_id;
  int attempt = 1;
  bool from_cache = false;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual Result<RawResponse> complete(const MultimodalRequest& req, int attempt) = 0;
  virtual std::string id() const = 0;
};

/// Exact-match store of canned responses, keyed by the full request key.
/// Each key holds the ordered response texts, one per retry attempt.
class ReplayStore {
 public:
  static Result<ReplayStore> load(const std::filesystem::path& path);

  void add(const std::string& key, std::string text);
  const std::vector<std::string>* lookup(const std::string& key) const;
  size_t size() const { return entries_.size(); }

  Status save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

class ReplayBackend : public ModelBackend {
 public:
  explicit ReplayBackend(std::shared_ptr<const ReplayStore> store) : store_(std::move(store)) {}
  Result<RawResponse> complete(const MultimodalRequest& req, int attempt) override;
  std::string id() const override { return "replay"; }

 private:
  std::shared_ptr<const ReplayStore> store_;
};

/// Test/fixture backend driven by a plain function.
class ScriptedBackend : public ModelBackend {
 public:
  using Fn = std::function<Result<RawResponse>(const MultimodalRequest&, int attempt)>;
  explicit ScriptedBackend(Fn fn) : fn_(std::move(fn)) {}
  Result<RawResponse> complete(const MultimodalRequest& req, int attempt) override {
    return fn_(req, attempt);
  }
  std::string id() const override { return "scripted"; }

 private:
  Fn fn_;
};

struct HttpBackendConfig {
  std::string endpoint;     // e.g. https://host:port/v1
  std::string api_key_env = "GARSSL_API_KEY";
  int transport_retries = 3;
  int backoff_ms = 250;
  int timeout_s = 120;
};

/// OpenAI-compatible chat-completions client. Image and audio ride as
/// base64 content parts.
class HttpBackend : public ModelBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {}
  Result<RawResponse> complete(const MultimodalRequest& req, int attempt) override;
  std::string id() const override { return "http:" + cfg_.endpoint; }

  /// Request body builder, exposed for wire-format tests.
  static std::string build_body(const MultimodalRequest& req);

 private:
  HttpBackendConfig cfg_;
};

struct ClientConfig {
  std::optional<std::filesystem::path> cache_dir;  // content-addressed response cache
  int max_inflight = 4;                            // live-request concurrency cap
  std::optional<std::filesystem::path> record_path;  // tee every response to a replay store file
};

struct CallStats {
  int backend_calls = 0;
  int cache_hits = 0;
  std::map<std::string, int> calls_by_stage;  // stage base name (class suffix stripped)
};

/// Caching, stats-keeping front end over a backend. Identical request keys
/// hit the backend at most once per attempt index.
class MllmClient {
 public:
  MllmClient(std::shared_ptr<ModelBackend> backend, ClientConfig cfg);

  Result<RawResponse> complete(const MultimodalRequest& req, int attempt = 1);

  CallStats stats() const;
  void reset_stats();

 private:
  Result<RawResponse> backend_complete(const MultimodalRequest& req, int attempt);
  std::optional<std::string> cache_lookup(const std::string& key, int attempt);
  void cache_store(const std::string& key, int attempt, const std::string& text);

  std::shared_ptr<ModelBackend> backend_;
  ClientConfig cfg_;

  mutable std::mutex mu_;
  std::map<std::string, std::vector<std::string>> cache_;
  std::map<std::string, bool> disk_loaded_;
  CallStats stats_;
  std::counting_semaphore<4096> inflight_;
};

}  // namespace garssl
