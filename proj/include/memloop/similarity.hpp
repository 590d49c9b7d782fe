#pragma once

#include "memloop/backend.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace memloop {

/// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws ValidationError on a
/// dimension mismatch or an all-zero vector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Per-run memo of text -> embedding in front of the gateway. Each distinct
/// text is embedded once; prefetch() issues at most one embed_batch for all
/// texts it has not seen. Not thread-safe: one cache per session worker.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(Gateway& gateway) : gateway_(gateway) {}

  void prefetch(const std::vector<std::string>& texts);
  const EmbeddingVector& get(const std::string& text);
  double similarity(const std::string& a, const std::string& b);

  std::size_t size() const noexcept { return vectors_.size(); }

 private:
  Gateway& gateway_;
  std::unordered_map<std::string, EmbeddingVector> vectors_;
};

}  // namespace memloop
