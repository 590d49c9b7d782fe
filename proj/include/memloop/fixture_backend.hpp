#pragma once

#include "memloop/backend.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace memloop {

/// Deterministic bag-of-tokens embedding: every lowercased whitespace token
/// is hashed (FNV-1a 64) into one of `dimension` buckets, the bucket counts
/// form the vector, and the result is L2-normalized. Identical text always
/// yields an identical vector. Throws ValidationError for text with no tokens.
EmbeddingVector fixture_embed(std::string_view text, std::size_t dimension);

/// Bucket a single token lands in under fixture_embed.
std::size_t fixture_bucket(std::string_view token, std::size_t dimension);

class HashedEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HashedEmbeddingBackend(std::size_t dimension);
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  std::size_t dimension_;
};

/// Replays recorded vectors from a {text, vector} JSONL file. A text that was
/// never recorded is a FixtureMissError carrying the SHA-256 of the text.
class RecordedEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit RecordedEmbeddingBackend(std::unordered_map<std::string, EmbeddingVector> vectors);
  static RecordedEmbeddingBackend from_file(const std::filesystem::path& path);

  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

 private:
  std::unordered_map<std::string, EmbeddingVector> vectors_;
};

/// Replays chat responses keyed by request_digest. Misses are errors, never a
/// silent fallback.
class FixtureChatBackend final : public ChatBackend {
 public:
  explicit FixtureChatBackend(std::unordered_map<std::string, std::string> responses);

  /// Reads {digest, response} JSONL. Several files may be layered; the same
  /// digest recorded twice with different responses is a ValidationError.
  static FixtureChatBackend from_files(const std::vector<std::filesystem::path>& paths);

  std::string complete(const ChatRequest& request) override;
  std::size_t size() const noexcept { return responses_.size(); }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

/// Wraps another chat backend and remembers every (digest, response) pair so
/// the session can be replayed later in fixture mode.
class RecordingChatBackend final : public ChatBackend {
 public:
  explicit RecordingChatBackend(std::shared_ptr<ChatBackend> inner);

  std::string complete(const ChatRequest& request) override;
  std::int64_t reported_tokens() const override { return inner_->reported_tokens(); }

  std::map<std::string, std::string> recorded() const;

  /// Writes the recording as {digest, response} JSONL sorted by digest.
  void write(const std::filesystem::path& path) const;

 private:
  std::shared_ptr<ChatBackend> inner_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> recorded_;
};

void write_chat_fixtures(const std::filesystem::path& path, const std::map<std::string, std::string>& responses);

}  // namespace memloop
