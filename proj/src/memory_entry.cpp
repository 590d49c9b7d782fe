#include "memloop/memory_entry.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace memloop {

std::string_view to_string(EntryStatus status) {
  switch (status) {
    case EntryStatus::initial: return "initial";
    case EntryStatus::supplementary: return "supplementary";
    case EntryStatus::verified: return "verified";
  }
  return "initial";
}

EntryStatus parse_entry_status(std::string_view name) {
  if (name == "initial") return EntryStatus::initial;
  if (name == "supplementary") return EntryStatus::supplementary;
  if (name == "verified") return EntryStatus::verified;
  throw ValidationError("unknown entry status '" + std::string(name) + "'");
}

std::string normalize_fact_text(std::string_view text) { return collapse_whitespace(text); }

void add_source_turn(MemoryEntry& entry, std::size_t turn_index) {
  auto& turns = entry.source_turn_indices;
  auto it = std::lower_bound(turns.begin(), turns.end(), turn_index);
  if (it == turns.end() || *it != turn_index) turns.insert(it, turn_index);
}

void refresh_created_timestamp(MemoryEntry& entry, const DialogueSession& session, const std::string& run_time) {
  entry.created_timestamp = session.latest_timestamp(entry.source_turn_indices).value_or(run_time);
}

void to_json(nlohmann::json& j, const MemoryEntry& entry) {
  j = nlohmann::json{
      {"entry_id", entry.entry_id},
      {"text", entry.text},
      {"status", to_string(entry.status)},
      {"source_turn_indices", entry.source_turn_indices},
      {"session_id", entry.session_id},
      {"created_timestamp", entry.created_timestamp},
  };
}

void from_json(const nlohmann::json& j, MemoryEntry& entry) {
  entry.entry_id = j.at("entry_id").get<std::string>();
  entry.text = j.at("text").get<std::string>();
  entry.status = parse_entry_status(j.at("status").get<std::string>());
  entry.source_turn_indices = j.at("source_turn_indices").get<std::vector<std::size_t>>();
  entry.session_id = j.at("session_id").get<std::string>();
  entry.created_timestamp = j.at("created_timestamp").get<std::string>();
}

}  // namespace memloop
