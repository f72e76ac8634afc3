#include "garssl/mllm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "garssl/util.hpp"

namespace garssl {

using nlohmann::json;

std::string RequestKey::str() const {
  std::ostringstream os;
  os << sample_id << "|" << stage << "|" << trial << "|" << prompt_digest;
  return os.str();
}

void MultimodalRequest::finalize_key() {
  uint64_t h = fnv1a64(model);
  h = fnv1a64(json(decoding.temperature).dump(), h);
  h = fnv1a64(std::to_string(decoding.max_tokens), h);
  h = fnv1a64(system_text, h);
  h = fnv1a64(user_text, h);
  h = fnv1a64(image ? image->content_digest : "-", h);
  h = fnv1a64(audio ? audio->content_digest : "-", h);
  key.prompt_digest = to_hex(h);
}

// ---------------------------------------------------------------------------
// ReplayStore
// ---------------------------------------------------------------------------

Result<ReplayStore> ReplayStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    return make_error(ErrorCode::ConfigError, "cannot open replay store: " + path.string());
  }
  ReplayStore store;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("key") || !rec.contains("text") ||
        !rec["key"].is_string() || !rec["text"].is_string()) {
      return make_error(ErrorCode::ParseError, "replay store line " + std::to_string(line_no) +
                                                   " is not a {key,text} record");
    }
    store.add(rec["key"].get<std::string>(), rec["text"].get<std::string>());
  }
  return store;
}

void ReplayStore::add(const std::string& key, std::string text) {
  entries_[key].push_back(std::move(text));
}

const std::vector<std::string>* ReplayStore::lookup(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

Status ReplayStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    return make_error(ErrorCode::ConfigError, "cannot write replay store: " + path.string());
  }
  for (const auto& [key, texts] : entries_) {
    for (const auto& text : texts) {
      out << json{{"key", key}, {"text", text}}.dump() << "\n";
    }
  }
  return ok_status();
}

Result<RawResponse> ReplayBackend::complete(const MultimodalRequest& req, int attempt) {
  const auto* texts = store_->lookup(req.key.str());
  if (!texts || texts->empty()) {
    return make_error(ErrorCode::ReplayMiss, "no replay entry for key " + req.key.str());
  }
  // Attempts beyond the recorded list replay the last response, so retry
  // loops terminate the same way every run.
  size_t idx = std::min<size_t>(static_cast<size_t>(std::max(attempt, 1)), texts->size()) - 1;
  RawResponse resp;
  resp.text = (*texts)[idx];
  resp.backend_id = id();
  resp.attempt = attempt;
  return resp;
}

// ---------------------------------------------------------------------------
// HttpBackend
// ---------------------------------------------------------------------------

std::string HttpBackend::build_body(const MultimodalRequest& req) {
  json parts = json::array();
  parts.push_back(json{{"type", "text"}, {"text", req.user_text}});
  if (req.image) {
    parts.push_back(json{{"type", "image_url"},
                         {"image_url",
                          {{"url", "data:" + req.image->mime + ";base64," + req.image->base64}}}});
  }
  if (req.audio) {
    std::string format = req.audio->mime == "audio/flac" ? "flac" : "wav";
    parts.push_back(json{{"type", "input_audio"},
                         {"input_audio", {{"data", req.audio->base64}, {"format", format}}}});
  }
  json body{
      {"model", req.model},
      {"messages",
       json::array({json{{"role", "system"}, {"content", req.system_text}},
                    json{{"role", "user"}, {"content", std::move(parts)}}})},
      {"temperature", req.decoding.temperature},
      {"max_tokens", req.decoding.max_tokens},
  };
  return body.dump();
}

namespace {

struct EndpointParts {
  std::string scheme_host_port;  // httplib::Client target
  std::string path_prefix;       // e.g. /v1
};

Result<EndpointParts> split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    return make_error(ErrorCode::ConfigError, "endpoint must include scheme: " + endpoint);
  }
  auto path_start = endpoint.find('/', scheme_end + 3);
  EndpointParts parts;
  if (path_start == std::string::npos) {
    parts.scheme_host_port = endpoint;
  } else {
    parts.scheme_host_port = endpoint.substr(0, path_start);
    parts.path_prefix = endpoint.substr(path_start);
    while (!parts.path_prefix.empty() && parts.path_prefix.back() == '/') {
      parts.path_prefix.pop_back();
    }
  }
  return parts;
}

}  // namespace

Result<RawResponse> HttpBackend::complete(const MultimodalRequest& req, int attempt) {
  auto parts = split_endpoint(cfg_.endpoint);
  if (!parts) return parts.error();

  httplib::Client client(parts.value().scheme_host_port);
  client.set_read_timeout(cfg_.timeout_s, 0);
  client.set_write_timeout(cfg_.timeout_s, 0);

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const std::string body = build_body(req);
  const std::string url = parts.value().path_prefix + "/chat/completions";

  std::string last_error;
  for (int i = 0; i <= cfg_.transport_retries; ++i) {
    if (i > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (i - 1)));
    }
    auto t0 = std::chrono::steady_clock::now();
    httplib::Result res = client.Post(url, headers, body, "application/json");
    double latency =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      return make_error(ErrorCode::BackendUnavailable,
                        "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    json reply = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
        !reply["choices"][0].contains("message")) {
      last_error = "malformed completion payload";
      continue;
    }
    const json& msg = reply["choices"][0]["message"];
    std::string text = msg.value("content", std::string());
    if (text.empty()) {
      last_error = "empty completion text";
      continue;
    }
    RawResponse out;
    out.text = std::move(text);
    out.latency_ms = latency;
    out.backend_id = id();
    out.attempt = attempt;
    return out;
  }
  return make_error(ErrorCode::BackendUnavailable,
                    "endpoint failed after " + std::to_string(cfg_.transport_retries + 1) +
                        " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// MllmClient
// ---------------------------------------------------------------------------

namespace {

std::string stage_base(const std::string& stage) {
  auto at = stage.find('@');
  return at == std::string::npos ? stage : stage.substr(0, at);
}

std::filesystem::path cache_file(const std::filesystem::path& dir, const std::string& key) {
  return dir / (to_hex(fnv1a64(key)) + ".json");
}

}  // namespace

MllmClient::MllmClient(std::shared_ptr<ModelBackend> backend, ClientConfig cfg)
    : backend_(std::move(backend)),
      cfg_(std::move(cfg)),
      inflight_(std::max(1, cfg_.max_inflight)) {
  if (cfg_.cache_dir) std::filesystem::create_directories(*cfg_.cache_dir);
}

std::optional<std::string> MllmClient::cache_lookup(const std::string& key, int attempt) {
  auto it = cache_.find(key);
  if (it == cache_.end() && cfg_.cache_dir && !disk_loaded_[key]) {
    disk_loaded_[key] = true;
    std::ifstream in(cache_file(*cfg_.cache_dir, key));
    if (in) {
      json rec = json::parse(in, nullptr, /*allow_exceptions=*/false);
      if (rec.is_object() && rec.value("key", std::string()) == key && rec.contains("responses") &&
          rec["responses"].is_array()) {
        auto& slot = cache_[key];
        for (const auto& r : rec["responses"]) {
          if (r.is_string()) slot.push_back(r.get<std::string>());
        }
        it = cache_.find(key);
      }
    }
  }
  if (it == cache_.end()) return std::nullopt;
  if (it->second.size() < static_cast<size_t>(attempt)) return std::nullopt;
  return it->second[attempt - 1];
}

void MllmClient::cache_store(const std::string& key, int attempt, const std::string& text) {
  auto& slot = cache_[key];
  if (slot.size() < static_cast<size_t>(attempt)) slot.resize(attempt);
  slot[attempt - 1] = text;
  if (cfg_.cache_dir) {
    std::ofstream out(cache_file(*cfg_.cache_dir, key), std::ios::trunc);
    out << json{{"key", key}, {"responses", slot}}.dump() << "\n";
  }
  if (cfg_.record_path) {
    std::ofstream rec(*cfg_.record_path, std::ios::app);
    rec << json{{"key", key}, {"text", text}}.dump() << "\n";
  }
}

Result<RawResponse> MllmClient::backend_complete(const MultimodalRequest& req, int attempt) {
  inflight_.acquire();
  auto result = backend_->complete(req, attempt);
  inflight_.release();
  return result;
}

Result<RawResponse> MllmClient::complete(const MultimodalRequest& req, int attempt) {
  const std::string key = req.key.str();
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto cached = cache_lookup(key, attempt)) {
      ++stats_.cache_hits;
      RawResponse resp;
      resp.text = *cached;
      resp.backend_id = backend_->id();
      resp.attempt = attempt;
      resp.from_cache = true;
      return resp;
    }
  }
  auto result = backend_complete(req, attempt);
  if (!result) return result;
  {
    std::lock_guard<std::mutex> lock(mu_);
    cache_store(key, attempt, result.value().text);
    ++stats_.backend_calls;
    ++stats_.calls_by_stage[stage_base(req.key.stage)];
  }
  return result;
}

CallStats MllmClient::stats() const {
  std::lock_guard<std::mutex> lock(mu_);
  return stats_;
}

void MllmClient::reset_stats() {
  std::lock_guard<std::mutex> lock(mu_);
  stats_ = CallStats{};
}

}  // namespace garssl
