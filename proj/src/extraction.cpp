#include "memloop/extraction.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <regex>
#include <unordered_set>

namespace memloop {

namespace {

std::string_view strip_code_fence(std::string_view s) {
  s = trim(s);
  if (!s.starts_with("```")) return s;
  const auto first_newline = s.find('\n');
  if (first_newline == std::string_view::npos) return s;
  s.remove_prefix(first_newline + 1);
  s = trim(s);
  if (s.ends_with("```")) s.remove_suffix(3);
  return trim(s);
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find('\n', start);
    lines.emplace_back(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

void push_item(std::vector<std::string>& items, std::string_view text) {
  std::string item = normalize_fact_text(text);
  if (!item.empty()) items.push_back(std::move(item));
}

}  // namespace

std::vector<std::string> parse_memory_list(std::string_view raw) {
  const std::string_view body = strip_code_fence(raw);
  if (body.empty()) return {};

  if (body.front() == '[') {
    const auto parsed = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_array() &&
        std::all_of(parsed.begin(), parsed.end(), [](const nlohmann::json& v) { return v.is_string(); })) {
      if (parsed.empty()) return {};
      std::vector<std::string> items;
      for (const auto& v : parsed) push_item(items, v.get_ref<const std::string&>());
      if (items.empty()) throw ExtractionFormatError("JSON array holds only blank items", std::string(raw));
      return items;
    }
  }

  static const std::regex kMarked(R"(^\s*(?:\d+[.)]|[-*]|\xE2\x80\xA2)\s+(\S.*)$)");
  static const std::regex kBareMarker(R"(^\s*(?:\d+[.)]|[-*]|\xE2\x80\xA2)\s*$)");
  const std::vector<std::string> lines = split_lines(body);
  std::vector<std::string> items;
  for (const std::string& line : lines) {
    std::smatch m;
    if (std::regex_match(line, m, kMarked)) push_item(items, m[1].str());
  }
  if (items.empty()) {
    for (const std::string& line : lines) {
      if (!std::regex_match(line, kBareMarker)) push_item(items, line);
    }
  }
  if (items.empty()) throw ExtractionFormatError("no list items found", std::string(raw));
  return items;
}

std::vector<MemoryEntry> make_entries(const std::vector<std::string>& items, EntryStatus status,
                                      const std::string& session_id, std::string_view id_prefix,
                                      std::size_t first_ordinal) {
  std::vector<MemoryEntry> entries;
  std::unordered_set<std::string> seen;
  std::size_t ordinal = first_ordinal;
  for (const std::string& item : items) {
    std::string text = normalize_fact_text(item);
    if (text.empty() || !seen.insert(text).second) continue;
    MemoryEntry entry;
    entry.entry_id = session_id + "/" + std::string(id_prefix) + std::to_string(ordinal++);
    entry.text = std::move(text);
    entry.status = status;
    entry.session_id = session_id;
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<MemoryEntry> extract_initial(const DialogueSession& session, StageContext& ctx, std::size_t window_turns) {
  if (session.turns.empty()) throw ValidationError("session " + session.session_id + " has no turns");
  if (window_turns == 0) throw ValidationError("window_turns must be positive");

  std::vector<std::string> items;
  const std::span<const DialogueTurn> all(session.turns);
  for (std::size_t start = 0; start < all.size(); start += window_turns) {
    const auto window = all.subspan(start, std::min(window_turns, all.size() - start));
    const std::string raw = ctx.gateway.complete({ctx.prompts.extract, "Conversation:\n" + render_turns(window)});
    const std::string_view body = trim(raw);
    std::vector<std::string> window_items = parse_memory_list(raw);
    if (window_items.empty() && body.empty()) {
      throw ExtractionFormatError("empty extraction response for session " + session.session_id, raw);
    }
    items.insert(items.end(), window_items.begin(), window_items.end());
  }

  std::vector<MemoryEntry> entries = make_entries(items, EntryStatus::initial, session.session_id, "i");
  for (MemoryEntry& entry : entries) entry.created_timestamp = ctx.run_time;
  return entries;
}

}  // namespace memloop
