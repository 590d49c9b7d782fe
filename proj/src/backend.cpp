#include "memloop/backend.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <cmath>

namespace memloop {

std::string request_digest(const ChatRequest& request) {
  std::string material;
  material.reserve(request.role_prompt.size() + request.user_payload.size() + 1);
  material += request.role_prompt;
  material += '\0';
  material += request.user_payload;
  return sha256_hex(material);
}

bool EmbeddingVector::is_zero() const noexcept {
  for (double v : values_) {
    if (v != 0.0) return false;
  }
  return true;
}

double EmbeddingVector::norm() const noexcept {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return std::sqrt(sum);
}

void BackendConfig::validate() const {
  if (!(request_timeout_seconds > 0.0)) throw ConfigError("backend.request_timeout must be > 0");
  if (max_retries < 0) throw ConfigError("backend.max_retries must be >= 0");
  if (retry_base_delay_ms < 0) throw ConfigError("backend.retry_base_delay_ms must be >= 0");
  if (max_in_flight <= 0) throw ConfigError("backend.max_in_flight must be > 0");
  if (chat_endpoint.empty() || embed_endpoint.empty()) throw ConfigError("backend endpoints must be set");
}

Gateway::Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedder)
    : chat_(std::move(chat)), embedder_(std::move(embedder)) {}

std::string Gateway::complete(const ChatRequest& request) {
  if (trim(request.role_prompt).empty()) throw ValidationError("chat request has an empty role prompt");
  if (trim(request.user_payload).empty()) throw ValidationError("chat request has an empty user payload");
  if (!chat_) throw ConfigError("no chat backend configured");
  chat_calls_.fetch_add(1);
  chat_chars_.fetch_add(static_cast<std::int64_t>(request.role_prompt.size() + request.user_payload.size()));
  return chat_->complete(request);
}

std::vector<EmbeddingVector> Gateway::embed_batch(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ValidationError("embed_batch called with no texts");
  std::int64_t chars = 0;
  for (const std::string& text : texts) {
    if (trim(text).empty()) throw ValidationError("embed_batch called with an empty text");
    chars += static_cast<std::int64_t>(text.size());
  }
  if (!embedder_) throw ConfigError("no embedding backend configured");
  embed_calls_.fetch_add(1);
  embedded_texts_.fetch_add(static_cast<std::int64_t>(texts.size()));
  embed_chars_.fetch_add(chars);

  std::vector<EmbeddingVector> vectors = embedder_->embed(texts);
  if (vectors.size() != texts.size()) {
    throw BackendProtocolError("embedding backend returned " + std::to_string(vectors.size()) +
                               " vectors for " + std::to_string(texts.size()) + " texts");
  }
  for (const EmbeddingVector& v : vectors) {
    if (v.dimension() == 0) throw BackendProtocolError("embedding backend returned an empty vector");
    if (v.is_zero()) throw BackendProtocolError("embedding backend returned a zero vector");
    std::size_t expected = 0;
    if (!dimension_.compare_exchange_strong(expected, v.dimension()) && expected != v.dimension()) {
      throw BackendProtocolError("embedding dimension changed within a run: " + std::to_string(expected) +
                                 " then " + std::to_string(v.dimension()));
    }
  }
  return vectors;
}

GatewayStats Gateway::stats() const {
  GatewayStats s;
  s.chat_calls = chat_calls_.load();
  s.embed_calls = embed_calls_.load();
  s.embedded_texts = embedded_texts_.load();
  s.chat_payload_chars = chat_chars_.load();
  s.embed_payload_chars = embed_chars_.load();
  s.reported_tokens = chat_ ? chat_->reported_tokens() : 0;
  return s;
}

}  // namespace memloop
