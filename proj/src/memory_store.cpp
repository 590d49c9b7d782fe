#include "memloop/memory_store.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

namespace memloop {

using nlohmann::json;

json store_to_json(const MemoryStore& store) {
  return json{
      {"owner_id", store.owner_id},
      {"created_at", store.created_at},
      {"pipeline_version", store.pipeline_version},
      {"entries", store.entries},
  };
}

namespace {

const json& require(const json& obj, const char* key, json::value_t type, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + ": missing field '" + key + "'");
  const bool ok = type == json::value_t::number_unsigned ? it->is_number_unsigned() : it->type() == type;
  if (!ok) throw ValidationError(where + ": field '" + std::string(key) + "' has the wrong type");
  return *it;
}

int major_version(const std::string& version) {
  try {
    return std::stoi(version.substr(0, version.find('.')));
  } catch (const std::exception&) {
    throw ValidationError("store: field 'pipeline_version' is not a version string: " + version);
  }
}

}  // namespace

MemoryStore store_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("store: top level must be an object");
  MemoryStore store;
  store.owner_id = require(j, "owner_id", json::value_t::string, "store").get<std::string>();
  store.created_at = require(j, "created_at", json::value_t::string, "store").get<std::string>();
  store.pipeline_version = require(j, "pipeline_version", json::value_t::string, "store").get<std::string>();
  if (major_version(store.pipeline_version) != major_version(kPipelineVersion)) {
    throw ValidationError("store: field 'pipeline_version' " + store.pipeline_version +
                          " is incompatible with " + kPipelineVersion);
  }

  const json& entries = require(j, "entries", json::value_t::array, "store");
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string where = "store.entries[" + std::to_string(i) + "]";
    const json& e = entries[i];
    if (!e.is_object()) throw ValidationError(where + ": must be an object");
    MemoryEntry entry;
    entry.entry_id = require(e, "entry_id", json::value_t::string, where).get<std::string>();
    entry.text = require(e, "text", json::value_t::string, where).get<std::string>();
    try {
      entry.status = parse_entry_status(require(e, "status", json::value_t::string, where).get<std::string>());
    } catch (const ValidationError& err) {
      throw ValidationError(where + ": field 'status': " + err.what());
    }
    const json& sources = require(e, "source_turn_indices", json::value_t::array, where);
    for (const json& s : sources) {
      if (!s.is_number_unsigned()) throw ValidationError(where + ": field 'source_turn_indices' must hold turn indices");
      entry.source_turn_indices.push_back(s.get<std::size_t>());
    }
    entry.session_id = require(e, "session_id", json::value_t::string, where).get<std::string>();
    entry.created_timestamp = require(e, "created_timestamp", json::value_t::string, where).get<std::string>();

    if (trim(entry.text).empty() || entry.text.find('\n') != std::string::npos) {
      throw ValidationError(where + ": field 'text' must be a single non-empty line");
    }
    if (entry.status == EntryStatus::verified && entry.source_turn_indices.empty()) {
      throw ValidationError(where + ": field 'source_turn_indices' must be non-empty for a verified entry");
    }
    if (!ids.insert(entry.entry_id).second) {
      throw ValidationError(where + ": field 'entry_id' duplicates " + entry.entry_id);
    }
    store.entries.push_back(std::move(entry));
  }
  return store;
}

void save_store(const MemoryStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write store file " + path.string());
  out << store_to_json(store).dump(2) << '\n';
  if (!out) throw Error("failed writing store file " + path.string());
}

MemoryStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open store file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON: " + e.what());
  }
  return store_from_json(j);
}

RetrievalResult retrieve_top_k(const MemoryStore& store, const std::string& query, std::size_t k,
                               EmbeddingCache& embeddings) {
  if (k == 0) throw ValidationError("retrieve_top_k: k must be positive");
  if (trim(query).empty()) throw ValidationError("retrieve_top_k: query must be non-empty");
  RetrievalResult result;
  if (store.entries.empty()) return result;

  std::vector<std::string> texts{query};
  for (const MemoryEntry& entry : store.entries) texts.push_back(entry.text);
  embeddings.prefetch(texts);

  const EmbeddingVector& q = embeddings.get(query);
  std::vector<double> scores;
  scores.reserve(store.entries.size());
  for (const MemoryEntry& entry : store.entries) scores.push_back(cosine_similarity(q, embeddings.get(entry.text)));

  std::vector<std::size_t> order(store.entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(std::min(k, order.size()));

  for (std::size_t i : order) {
    const MemoryEntry& entry = store.entries[i];
    result.ranked.push_back({entry.entry_id, scores[i], "[" + entry.created_timestamp + "] " + entry.text});
  }
  return result;
}

std::string answer_question(const MemoryStore& store, const std::string& question, std::size_t k, StageContext& ctx) {
  const RetrievalResult retrieved = retrieve_top_k(store, question, k, ctx.embeddings);
  if (retrieved.ranked.empty()) {
    return ctx.gateway.complete({ctx.prompts.answer_empty, "Memories:\n(none)\n\nQuestion: " + question});
  }
  std::string payload = "Memories:\n";
  for (const RankedMemory& m : retrieved.ranked) payload += "- " + m.annotated_text + "\n";
  payload += "\nQuestion: " + question;
  return ctx.gateway.complete({ctx.prompts.answer, payload});
}

}  // namespace memloop
