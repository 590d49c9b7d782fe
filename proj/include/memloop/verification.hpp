#pragma once

#include "memloop/context.hpp"
#include "memloop/dialogue.hpp"
#include "memloop/memory_entry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memloop {

struct VerificationConfig {
  double tau_sim = 0.8;
  /// Full question/judge/merge passes over the entry list.
  int passes = 1;

  void validate() const;
};

struct ProbeQuestion {
  std::string entry_id;
  std::string question_text;  // always ends with '?'
};

enum class VerdictOutcome { hallucination, evidence_found };

struct VerificationVerdict {
  std::string entry_id;
  VerdictOutcome outcome = VerdictOutcome::hallucination;
  std::optional<std::string> grounded_text;        // set iff evidence_found
  std::vector<std::size_t> evidence_turn_indices;  // non-empty iff evidence_found
};

enum class MergeAction { keep_new_drop_original, replace_original_with_new, discard_both };

std::string_view to_string(VerdictOutcome outcome);
std::string_view to_string(MergeAction action);

/// Asks the model for a question whose answer is the evidence for `entry`.
/// The reply is whitespace-collapsed and gets a '?' appended when missing;
/// an empty reply is a VerificationFormatError.
ProbeQuestion generate_question(const MemoryEntry& entry, StageContext& ctx);

/// Parses the judge envelope {"found": "yes"|"no", "answer": ..., "turns": [...]}.
/// Tolerates a ``` fence or prose around the object. Turn indices must exist in
/// `session`. Anything else is a VerificationFormatError.
VerificationVerdict parse_judge_envelope(std::string_view raw, const std::string& entry_id,
                                         const DialogueSession& session);

/// Shows the judge the question and the whole dialogue and parses its verdict.
VerificationVerdict seek_evidence(const ProbeQuestion& question, const DialogueSession& session, StageContext& ctx);

/// Decides what happens to `original` given its verdict:
///   hallucination                              -> discard_both
///   evidence, cos(grounded, original) > tau    -> keep_new_drop_original
///   evidence, cos(grounded, original) <= tau   -> replace_original_with_new
MergeAction dedup_merge(const MemoryEntry& original, const VerificationVerdict& verdict,
                        const VerificationConfig& config, StageContext& ctx);

/// The entry that survives an evidence_found verdict: grounded text, status
/// verified, sourced to the evidence turns.
MemoryEntry grounded_entry(const MemoryEntry& original, const VerificationVerdict& verdict,
                           const DialogueSession& session, const std::string& run_time);

struct VerificationTrace {
  std::string entry_id;
  std::string original_text;
  std::optional<std::string> question;
  std::optional<VerdictOutcome> outcome;
  std::optional<std::string> grounded_text;
  std::vector<std::size_t> evidence_turn_indices;
  std::optional<double> similarity;
  std::optional<MergeAction> action;
  std::optional<std::string> dropped_as_duplicate_of;
  std::optional<std::string> warning;
};

struct VerificationReport {
  double tau_sim = 0.8;
  std::vector<VerificationTrace> entries;
  std::vector<std::string> warnings;
};

struct VerificationResult {
  std::vector<MemoryEntry> entries;  // M_final
  VerificationReport report;
};

/// For each candidate in order: question -> evidence -> merge action. Entries
/// whose question or verdict cannot be parsed are kept with their previous
/// status and a warning. Survivors then go through a pairwise dedup where a
/// later entry whose similarity to an earlier survivor exceeds tau_sim is
/// dropped.
VerificationResult run_verification(const std::vector<MemoryEntry>& candidates, const DialogueSession& session,
                                    const VerificationConfig& config, StageContext& ctx);

void to_json(nlohmann::json& j, const VerificationReport& report);

}  // namespace memloop
