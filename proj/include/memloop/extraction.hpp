#pragma once

#include "memloop/context.hpp"
#include "memloop/dialogue.hpp"
#include "memloop/memory_entry.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace memloop {

/// Turns a model's list output into fact strings. Three shapes are tried in
/// order:
///   1. a JSON array of strings (optionally inside a ``` fence);
///   2. marked lines ("1.", "2)", "-", "*", "•"), keeping only marked lines;
///   3. one fact per non-empty line.
/// Items are whitespace-collapsed and empty ones dropped. A blank response or
/// an explicit empty JSON array yields no items; any other response that
/// yields nothing raises ExtractionFormatError.
std::vector<std::string> parse_memory_list(std::string_view raw);

/// Builds entries from parsed items: exact duplicates (after normalization)
/// collapse to the first occurrence, ids are "<session_id>/<prefix><n>" with n
/// counting from `first_ordinal`.
std::vector<MemoryEntry> make_entries(const std::vector<std::string>& items, EntryStatus status,
                                      const std::string& session_id, std::string_view id_prefix,
                                      std::size_t first_ordinal = 1);

/// Feed-forward pass: one extraction call per window of `window_turns` turns
/// (a single call when the session fits), results concatenated in order.
/// Entries come back with status=initial and no source turns.
std::vector<MemoryEntry> extract_initial(const DialogueSession& session, StageContext& ctx,
                                         std::size_t window_turns = 50);

}  // namespace memloop
