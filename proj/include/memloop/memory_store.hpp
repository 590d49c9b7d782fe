#pragma once

#include "memloop/context.hpp"
#include "memloop/memory_entry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace memloop {

inline constexpr const char* kPipelineVersion = "1.0.0";

struct MemoryStore {
  std::string owner_id;
  std::vector<MemoryEntry> entries;
  std::string created_at;
  std::string pipeline_version = kPipelineVersion;

  friend bool operator==(const MemoryStore&, const MemoryStore&) = default;
};

/// Canonical JSON (keys sorted) of a store.
nlohmann::json store_to_json(const MemoryStore& store);

/// Validates and converts; throws ValidationError naming the offending field.
MemoryStore store_from_json(const nlohmann::json& j);

void save_store(const MemoryStore& store, const std::filesystem::path& path);
MemoryStore load_store(const std::filesystem::path& path);

struct RankedMemory {
  std::string entry_id;
  double score = 0.0;
  std::string annotated_text;  // "[<created_timestamp>] <text>"
};

struct RetrievalResult {
  std::vector<RankedMemory> ranked;  // scores non-increasing, size <= k
};

/// Ranks entries by cosine similarity of their raw text to the query; ties
/// keep insertion order.
RetrievalResult retrieve_top_k(const MemoryStore& store, const std::string& query, std::size_t k,
                               EmbeddingCache& embeddings);

/// Retrieves the top-k memories and asks the model to answer with them. An
/// empty retrieval uses the "no relevant memory" prompt. Returns the reply
/// verbatim.
std::string answer_question(const MemoryStore& store, const std::string& question, std::size_t k, StageContext& ctx);

}  // namespace memloop
