#pragma once

#include "memloop/backend.hpp"

#include <atomic>
#include <memory>
#include <semaphore>
#include <string>

namespace memloop {

namespace detail {
class HttpTransport;
}

/// OpenAI-compatible chat-completions client.
///
/// Transport failures, HTTP 429 and 5xx responses are retried up to
/// max_retries times with exponential backoff (retry_base_delay_ms * 2^n).
/// Exhausting the retries raises BackendUnavailableError; any other non-2xx
/// status or a body without choices[0].message.content raises
/// BackendProtocolError. The API key comes from the environment variable
/// named by api_key_env_var and is sent as a bearer token when set.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config);
  ~HttpChatBackend() override;

  std::string complete(const ChatRequest& request) override;
  std::int64_t reported_tokens() const override { return reported_tokens_.load(); }

 private:
  BackendConfig config_;
  std::unique_ptr<detail::HttpTransport> transport_;
  std::atomic<std::int64_t> reported_tokens_{0};
};

/// OpenAI-compatible embeddings client; same retry contract as the chat side.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(BackendConfig config);
  ~HttpEmbeddingBackend() override;

  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

 private:
  BackendConfig config_;
  std::unique_ptr<detail::HttpTransport> transport_;
};

}  // namespace memloop
