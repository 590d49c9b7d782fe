#include "memloop/dialogue.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

namespace memloop {

using nlohmann::json;

std::string_view to_string(Speaker speaker) {
  return speaker == Speaker::user ? "user" : "assistant";
}

Speaker parse_speaker(std::string_view name) {
  if (name == "user") return Speaker::user;
  if (name == "assistant") return Speaker::assistant;
  throw ValidationError("unknown speaker '" + std::string(name) + "' (expected user or assistant)");
}

const DialogueTurn* DialogueSession::find_turn(std::size_t turn_index) const {
  // turns are contiguous from 0 once validated, but stay defensive for
  // hand-built sessions.
  if (turn_index < turns.size() && turns[turn_index].turn_index == turn_index) return &turns[turn_index];
  auto it = std::find_if(turns.begin(), turns.end(),
                         [&](const DialogueTurn& t) { return t.turn_index == turn_index; });
  return it == turns.end() ? nullptr : &*it;
}

std::optional<std::string> DialogueSession::latest_timestamp(std::span<const std::size_t> turn_indices) const {
  std::optional<std::string> latest;
  for (std::size_t index : turn_indices) {
    const DialogueTurn* turn = find_turn(index);
    if (turn == nullptr || !turn->timestamp) continue;
    if (!latest || *turn->timestamp > *latest) latest = turn->timestamp;
  }
  return latest;
}

namespace {

DialogueTurn turn_from_line(const json& obj, const std::string& source, std::size_t line_no, std::string& session_id) {
  auto fail = [&](const std::string& what) -> ValidationError {
    return ValidationError(source + ":" + std::to_string(line_no) + ": " + what);
  };
  if (!obj.is_object()) throw ParseError(source, line_no, "expected a JSON object");

  auto require_string = [&](const char* key) -> std::string {
    auto it = obj.find(key);
    if (it == obj.end()) throw fail(std::string("missing field '") + key + "'");
    if (!it->is_string()) throw fail(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  };

  session_id = require_string("session_id");
  if (trim(session_id).empty()) throw fail("session_id must be non-empty");

  auto index_it = obj.find("turn_index");
  if (index_it == obj.end()) throw fail("missing field 'turn_index'");
  if (!index_it->is_number_integer() || index_it->get<long long>() < 0) {
    throw fail("turn_index must be a non-negative integer");
  }

  DialogueTurn turn;
  turn.turn_index = index_it->get<std::size_t>();
  try {
    turn.speaker = parse_speaker(require_string("speaker"));
  } catch (const ValidationError& e) {
    throw fail(e.what());
  }
  turn.text = require_string("text");
  if (trim(turn.text).empty()) throw fail("text must be non-empty");

  if (auto ts = obj.find("timestamp"); ts != obj.end() && !ts->is_null()) {
    if (!ts->is_string()) throw fail("timestamp must be a string");
    turn.timestamp = ts->get<std::string>();
    if (!looks_like_iso8601(*turn.timestamp)) throw fail("timestamp is not ISO-8601: " + *turn.timestamp);
  }
  return turn;
}

}  // namespace

std::vector<DialogueSession> parse_sessions(std::istream& in, std::string_view source_name) {
  const std::string source(source_name);
  std::vector<DialogueSession> sessions;
  std::unordered_map<std::string, std::size_t> position;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, line_no, std::string("malformed JSON: ") + e.what());
    }
    std::string session_id;
    DialogueTurn turn = turn_from_line(obj, source, line_no, session_id);

    auto [it, inserted] = position.try_emplace(session_id, sessions.size());
    if (inserted) sessions.push_back(DialogueSession{session_id, {}});
    DialogueSession& session = sessions[it->second];
    for (const DialogueTurn& existing : session.turns) {
      if (existing.turn_index == turn.turn_index) {
        throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate turn_index " +
                              std::to_string(turn.turn_index) + " in session " + session_id);
      }
    }
    session.turns.push_back(std::move(turn));
  }

  for (DialogueSession& session : sessions) {
    std::stable_sort(session.turns.begin(), session.turns.end(),
                     [](const DialogueTurn& a, const DialogueTurn& b) { return a.turn_index < b.turn_index; });
    for (std::size_t i = 0; i < session.turns.size(); ++i) {
      if (session.turns[i].turn_index != i) {
        throw ValidationError(source + ": session " + session.session_id + " is missing turn_index " +
                              std::to_string(i));
      }
    }
  }
  return sessions;
}

std::vector<DialogueSession> parse_session_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open session file " + path.string());
  return parse_sessions(in, path.string());
}

void write_sessions(std::ostream& out, std::span<const DialogueSession> sessions) {
  for (const DialogueSession& session : sessions) {
    for (const DialogueTurn& turn : session.turns) {
      nlohmann::ordered_json obj;
      obj["session_id"] = session.session_id;
      obj["turn_index"] = turn.turn_index;
      obj["speaker"] = to_string(turn.speaker);
      obj["text"] = turn.text;
      if (turn.timestamp) obj["timestamp"] = *turn.timestamp;
      out << obj.dump() << '\n';
    }
  }
}

void write_session_file(const std::filesystem::path& path, std::span<const DialogueSession> sessions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write session file " + path.string());
  write_sessions(out, sessions);
}

std::string turn_text_for_embedding(const DialogueTurn& turn) {
  std::string out(to_string(turn.speaker));
  out += ": ";
  out += trim(turn.text);
  return out;
}

std::string render_turns(std::span<const DialogueTurn> turns) {
  std::string out;
  for (const DialogueTurn& turn : turns) {
    out += '[';
    out += std::to_string(turn.turn_index);
    out += "] ";
    out += to_string(turn.speaker);
    out += ": ";
    out += collapse_whitespace(turn.text);
    out += '\n';
  }
  return out;
}

}  // namespace memloop
