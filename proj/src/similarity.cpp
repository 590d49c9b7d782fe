#include "memloop/similarity.hpp"

#include "memloop/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace memloop {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw ValidationError("cosine_similarity: dimension mismatch (" + std::to_string(a.dimension()) + " vs " +
                          std::to_string(b.dimension()) + ")");
  }
  const auto av = a.values();
  const auto bv = b.values();
  double dot = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    dot += av[i] * bv[i];
    aa += av[i] * av[i];
    bb += bv[i] * bv[i];
  }
  if (aa == 0.0 || bb == 0.0) throw ValidationError("cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

void EmbeddingCache::prefetch(const std::vector<std::string>& texts) {
  std::vector<std::string> missing;
  std::unordered_set<std::string> queued;
  for (const std::string& text : texts) {
    if (vectors_.contains(text) || !queued.insert(text).second) continue;
    missing.push_back(text);
  }
  if (missing.empty()) return;
  std::vector<EmbeddingVector> vectors = gateway_.embed_batch(missing);
  for (std::size_t i = 0; i < missing.size(); ++i) vectors_.emplace(missing[i], std::move(vectors[i]));
}

const EmbeddingVector& EmbeddingCache::get(const std::string& text) {
  if (auto it = vectors_.find(text); it != vectors_.end()) return it->second;
  prefetch({text});
  return vectors_.at(text);
}

double EmbeddingCache::similarity(const std::string& a, const std::string& b) {
  prefetch({a, b});
  return cosine_similarity(get(a), get(b));
}

}  // namespace memloop
