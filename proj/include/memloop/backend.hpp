#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace memloop {

struct ChatRequest {
  std::string role_prompt;  // system prompt
  std::string user_payload;
  double temperature = 0.0;
};

/// Content address of a chat request: SHA-256 (hex) over the role prompt, a
/// NUL separator and the user payload. Fixture files are keyed by this.
std::string request_digest(const ChatRequest& request);

class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dimension() const noexcept { return values_.size(); }
  bool is_zero() const noexcept;
  double norm() const noexcept;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<double> values_;
};

struct BackendConfig {
  std::string chat_endpoint = "https://api.openai.com/v1/chat/completions";
  std::string embed_endpoint = "https://api.openai.com/v1/embeddings";
  std::string api_key_env_var = "OPENAI_API_KEY";
  std::string chat_model_name = "gpt-4o-mini";
  std::string embed_model_name = "text-embedding-3-small";
  double request_timeout_seconds = 60.0;
  int max_retries = 3;
  int retry_base_delay_ms = 500;
  int max_in_flight = 8;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
  /// Tokens reported by the provider so far (0 when it reports none).
  virtual std::int64_t reported_tokens() const { return 0; }
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

struct GatewayStats {
  std::int64_t chat_calls = 0;
  std::int64_t embed_calls = 0;      // embed_batch invocations
  std::int64_t embedded_texts = 0;
  std::int64_t chat_payload_chars = 0;  // role prompt + user payload
  std::int64_t embed_payload_chars = 0;
  std::int64_t reported_tokens = 0;

  friend bool operator==(const GatewayStats&, const GatewayStats&) = default;
};

/// The single door to language and embedding models. Validates the embedding
/// contract (count, dimension, no zero vectors) and keeps the call accounting
/// that the run summary reports. Safe for concurrent use.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedder);

  std::string complete(const ChatRequest& request);
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts);

  GatewayStats stats() const;

 private:
  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbeddingBackend> embedder_;
  std::atomic<std::int64_t> chat_calls_{0};
  std::atomic<std::int64_t> embed_calls_{0};
  std::atomic<std::int64_t> embedded_texts_{0};
  std::atomic<std::int64_t> chat_chars_{0};
  std::atomic<std::int64_t> embed_chars_{0};
  std::atomic<std::size_t> dimension_{0};
};

}  // namespace memloop
