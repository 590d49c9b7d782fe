#pragma once

#include "memloop/context.hpp"
#include "memloop/dialogue.hpp"
#include "memloop/memory_entry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <vector>

namespace memloop {

struct CompletionConfig {
  double tau_match = 0.6;
  /// Number of align -> recover rounds. One round is the standard pass.
  int rounds = 1;

  void validate() const;
};

struct AlignmentRow {
  std::size_t turn_index = 0;
  std::optional<std::string> best_entry_id;  // absent when there are no entries
  double best_score = -1.0;
  bool covered = false;  // best_score > tau_match

  friend bool operator==(const AlignmentRow&, const AlignmentRow&) = default;
};

struct AlignmentReport {
  std::vector<AlignmentRow> per_turn;  // one row per turn, by turn_index
  double tau_match = 0.6;
};

/// Maps every turn to its most similar entry (cosine over embeddings of
/// turn_text_for_embedding and the entry text; ties go to the earlier entry)
/// and marks it covered when the score strictly exceeds tau_match. Each
/// covered turn is added to its best entry's source_turn_indices. With no
/// entries every turn is uncovered with score -1.
AlignmentReport align(std::vector<MemoryEntry>& entries, const DialogueSession& session,
                      const CompletionConfig& config, StageContext& ctx);

/// Turns whose row is not covered, in turn order.
std::vector<DialogueTurn> find_uncovered_turns(const AlignmentReport& report, const DialogueSession& session);

/// One targeted extraction call over all uncovered turns. Every recovered
/// entry is status=supplementary and sourced to all of the uncovered turns.
std::vector<MemoryEntry> recover_missing(const std::vector<DialogueTurn>& uncovered, const std::string& session_id,
                                         StageContext& ctx, std::size_t first_ordinal = 1);

/// Initial entries first, then supplementary ones whose text is new.
std::vector<MemoryEntry> merge_candidates(const std::vector<MemoryEntry>& initial,
                                          const std::vector<MemoryEntry>& supplementary);

struct CompletionResult {
  std::vector<MemoryEntry> candidates;
  std::vector<AlignmentReport> reports;  // one per round that ran
  std::size_t recovered = 0;
};

/// align -> find_uncovered_turns -> recover_missing -> merge_candidates, for
/// config.rounds rounds (stops early once nothing is uncovered).
CompletionResult run_completion(std::vector<MemoryEntry> initial, const DialogueSession& session,
                                const CompletionConfig& config, StageContext& ctx);

void to_json(nlohmann::json& j, const AlignmentReport& report);

}  // namespace memloop
