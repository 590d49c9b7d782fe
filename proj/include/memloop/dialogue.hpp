#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memloop {

enum class Speaker { user, assistant };

std::string_view to_string(Speaker speaker);

/// Throws ValidationError for anything other than "user" / "assistant".
Speaker parse_speaker(std::string_view name);

struct DialogueTurn {
  std::size_t turn_index = 0;
  Speaker speaker = Speaker::user;
  std::string text;
  std::optional<std::string> timestamp;

  friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

struct DialogueSession {
  std::string session_id;
  std::vector<DialogueTurn> turns;

  const DialogueTurn* find_turn(std::size_t turn_index) const;

  /// Latest timestamp among the given turns, if any of them carries one.
  std::optional<std::string> latest_timestamp(std::span<const std::size_t> turn_indices) const;

  friend bool operator==(const DialogueSession&, const DialogueSession&) = default;
};

/// Reads the JSONL session format: one turn per line with fields
/// session_id, turn_index, speaker, text and optional timestamp.
///
/// Sessions come back in order of first appearance with turns sorted by
/// turn_index. Blank lines are skipped. Malformed JSON raises ParseError with
/// the line number; invariant violations (duplicate or non-contiguous
/// turn_index, unknown speaker, empty text) raise ValidationError.
std::vector<DialogueSession> parse_sessions(std::istream& in, std::string_view source_name = "<input>");

std::vector<DialogueSession> parse_session_file(const std::filesystem::path& path);

/// Writes sessions back out in canonical form: one line per turn, sessions in
/// order, turns by index, fields in the documented order.
void write_sessions(std::ostream& out, std::span<const DialogueSession> sessions);

void write_session_file(const std::filesystem::path& path, std::span<const DialogueSession> sessions);

/// "<speaker>: <trimmed text>", the string that gets embedded for a turn.
std::string turn_text_for_embedding(const DialogueTurn& turn);

/// One line per turn, "[<turn_index>] <speaker>: <text>". Used for every
/// prompt payload that shows the model raw dialogue.
std::string render_turns(std::span<const DialogueTurn> turns);

}  // namespace memloop
