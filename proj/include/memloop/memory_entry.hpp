#pragma once

#include "memloop/dialogue.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace memloop {

enum class EntryStatus { initial, supplementary, verified };

std::string_view to_string(EntryStatus status);
EntryStatus parse_entry_status(std::string_view name);

/// One extracted fact about the user.
struct MemoryEntry {
  std::string entry_id;
  std::string text;
  EntryStatus status = EntryStatus::initial;
  std::vector<std::size_t> source_turn_indices;  // sorted, unique
  std::string session_id;
  std::string created_timestamp;

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

/// Whitespace-collapsed single-line form used for every stored fact text.
std::string normalize_fact_text(std::string_view text);

/// Adds a turn index keeping source_turn_indices sorted and unique.
void add_source_turn(MemoryEntry& entry, std::size_t turn_index);

/// created_timestamp := latest timestamp among the entry's source turns,
/// falling back to `run_time` when none of them carries one.
void refresh_created_timestamp(MemoryEntry& entry, const DialogueSession& session, const std::string& run_time);

void to_json(nlohmann::json& j, const MemoryEntry& entry);
void from_json(const nlohmann::json& j, MemoryEntry& entry);

}  // namespace memloop
