#include "memloop/completion.hpp"

#include "memloop/error.hpp"
#include "memloop/extraction.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <unordered_set>

namespace memloop {

void CompletionConfig::validate() const {
  if (!(tau_match >= -1.0 && tau_match <= 1.0)) throw ConfigError("completion.tau_match must lie in [-1, 1]");
  if (rounds < 1) throw ConfigError("completion.rounds must be >= 1");
}

AlignmentReport align(std::vector<MemoryEntry>& entries, const DialogueSession& session,
                      const CompletionConfig& config, StageContext& ctx) {
  AlignmentReport report;
  report.tau_match = config.tau_match;
  report.per_turn.reserve(session.turns.size());

  std::vector<std::string> turn_texts;
  turn_texts.reserve(session.turns.size());
  for (const DialogueTurn& turn : session.turns) turn_texts.push_back(turn_text_for_embedding(turn));

  if (!entries.empty()) {
    std::vector<std::string> texts = turn_texts;
    for (const MemoryEntry& entry : entries) texts.push_back(entry.text);
    ctx.embeddings.prefetch(texts);
  }

  for (std::size_t t = 0; t < session.turns.size(); ++t) {
    AlignmentRow row;
    row.turn_index = session.turns[t].turn_index;
    std::optional<std::size_t> best;
    if (!entries.empty()) {
      const EmbeddingVector& turn_vec = ctx.embeddings.get(turn_texts[t]);
      for (std::size_t e = 0; e < entries.size(); ++e) {
        const double score = cosine_similarity(turn_vec, ctx.embeddings.get(entries[e].text));
        if (!best || score > row.best_score) {
          best = e;
          row.best_score = score;
        }
      }
    }
    if (best) {
      row.best_entry_id = entries[*best].entry_id;
      row.covered = row.best_score > config.tau_match;
      if (row.covered) {
        add_source_turn(entries[*best], row.turn_index);
        refresh_created_timestamp(entries[*best], session, ctx.run_time);
      }
    }
    report.per_turn.push_back(std::move(row));
  }
  return report;
}

std::vector<DialogueTurn> find_uncovered_turns(const AlignmentReport& report, const DialogueSession& session) {
  std::vector<DialogueTurn> uncovered;
  for (const AlignmentRow& row : report.per_turn) {
    if (row.covered) continue;
    if (const DialogueTurn* turn = session.find_turn(row.turn_index)) uncovered.push_back(*turn);
  }
  return uncovered;
}

std::vector<MemoryEntry> recover_missing(const std::vector<DialogueTurn>& uncovered, const std::string& session_id,
                                         StageContext& ctx, std::size_t first_ordinal) {
  if (uncovered.empty()) return {};
  const std::string raw = ctx.gateway.complete({ctx.prompts.supplement, "Uncovered turns:\n" + render_turns(uncovered)});
  if (trim(raw).empty()) throw ExtractionFormatError("empty supplementary response for session " + session_id, raw);

  std::vector<MemoryEntry> entries =
      make_entries(parse_memory_list(raw), EntryStatus::supplementary, session_id, "s", first_ordinal);
  std::optional<std::string> latest;
  for (const DialogueTurn& turn : uncovered) {
    if (turn.timestamp && (!latest || *turn.timestamp > *latest)) latest = turn.timestamp;
  }
  for (MemoryEntry& entry : entries) {
    for (const DialogueTurn& turn : uncovered) add_source_turn(entry, turn.turn_index);
    entry.created_timestamp = latest.value_or(ctx.run_time);
  }
  return entries;
}

std::vector<MemoryEntry> merge_candidates(const std::vector<MemoryEntry>& initial,
                                          const std::vector<MemoryEntry>& supplementary) {
  std::vector<MemoryEntry> merged;
  merged.reserve(initial.size() + supplementary.size());
  std::unordered_set<std::string> seen;
  for (const auto* list : {&initial, &supplementary}) {
    for (const MemoryEntry& entry : *list) {
      if (seen.insert(entry.text).second) merged.push_back(entry);
    }
  }
  return merged;
}

CompletionResult run_completion(std::vector<MemoryEntry> initial, const DialogueSession& session,
                                const CompletionConfig& config, StageContext& ctx) {
  CompletionResult result;
  result.candidates = std::move(initial);
  std::size_t next_ordinal = 1;
  for (int round = 0; round < config.rounds; ++round) {
    AlignmentReport report = align(result.candidates, session, config, ctx);
    const std::vector<DialogueTurn> uncovered = find_uncovered_turns(report, session);
    result.reports.push_back(std::move(report));
    if (uncovered.empty()) break;
    std::vector<MemoryEntry> recovered = recover_missing(uncovered, session.session_id, ctx, next_ordinal);
    next_ordinal += recovered.size();
    const std::size_t before = result.candidates.size();
    result.candidates = merge_candidates(result.candidates, recovered);
    result.recovered += result.candidates.size() - before;
  }
  return result;
}

void to_json(nlohmann::json& j, const AlignmentReport& report) {
  j = nlohmann::json{{"tau_match", report.tau_match}, {"per_turn", nlohmann::json::array()}};
  for (const AlignmentRow& row : report.per_turn) {
    j["per_turn"].push_back({
        {"turn_index", row.turn_index},
        {"best_entry_id", row.best_entry_id ? nlohmann::json(*row.best_entry_id) : nlohmann::json(nullptr)},
        {"best_score", row.best_score},
        {"covered", row.covered},
    });
  }
}

}  // namespace memloop
