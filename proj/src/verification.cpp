#include "memloop/verification.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace memloop {

using nlohmann::json;

void VerificationConfig::validate() const {
  if (!(tau_sim >= -1.0 && tau_sim <= 1.0)) throw ConfigError("verification.tau_sim must lie in [-1, 1]");
  if (passes < 1) throw ConfigError("verification.passes must be >= 1");
}

std::string_view to_string(VerdictOutcome outcome) {
  return outcome == VerdictOutcome::hallucination ? "hallucination" : "evidence_found";
}

std::string_view to_string(MergeAction action) {
  switch (action) {
    case MergeAction::keep_new_drop_original: return "keep_new_drop_original";
    case MergeAction::replace_original_with_new: return "replace_original_with_new";
    case MergeAction::discard_both: return "discard_both";
  }
  return "discard_both";
}

ProbeQuestion generate_question(const MemoryEntry& entry, StageContext& ctx) {
  if (trim(entry.text).empty()) throw ValidationError("cannot question an empty entry " + entry.entry_id);
  const std::string raw = ctx.gateway.complete({ctx.prompts.question, "Memory entry: " + entry.text});
  std::string question = collapse_whitespace(raw);
  if (question.empty()) throw VerificationFormatError("empty question generated for entry " + entry.entry_id);
  if (question.back() != '?') question.push_back('?');
  return ProbeQuestion{entry.entry_id, std::move(question)};
}

namespace {

bool parse_found(const json& value, std::string_view raw) {
  if (value.is_boolean()) return value.get<bool>();
  if (value.is_string()) {
    const std::string v = to_lower_ascii(trim(value.get_ref<const std::string&>()));
    if (v == "yes" || v == "true") return true;
    if (v == "no" || v == "false") return false;
  }
  throw VerificationFormatError("judge envelope has an unrecognised 'found' value: " + std::string(raw));
}

}  // namespace

VerificationVerdict parse_judge_envelope(std::string_view raw, const std::string& entry_id,
                                         const DialogueSession& session) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw VerificationFormatError("judge reply holds no JSON object: " + std::string(raw));
  }
  const json envelope = json::parse(raw.substr(open, close - open + 1), nullptr, /*allow_exceptions=*/false);
  if (!envelope.is_object() || !envelope.contains("found")) {
    throw VerificationFormatError("judge reply is not a {found, ...} envelope: " + std::string(raw));
  }

  VerificationVerdict verdict;
  verdict.entry_id = entry_id;
  if (!parse_found(envelope.at("found"), raw)) {
    verdict.outcome = VerdictOutcome::hallucination;
    return verdict;
  }

  const auto answer = envelope.find("answer");
  if (answer == envelope.end() || !answer->is_string() || collapse_whitespace(answer->get<std::string>()).empty()) {
    throw VerificationFormatError("judge found evidence but gave no answer: " + std::string(raw));
  }
  const auto turns = envelope.find("turns");
  if (turns == envelope.end() || !turns->is_array() || turns->empty()) {
    throw VerificationFormatError("judge found evidence but cited no turns: " + std::string(raw));
  }
  for (const json& t : *turns) {
    if (!t.is_number_integer() || t.get<long long>() < 0 || session.find_turn(t.get<std::size_t>()) == nullptr) {
      throw VerificationFormatError("judge cited a turn that does not exist: " + t.dump());
    }
    verdict.evidence_turn_indices.push_back(t.get<std::size_t>());
  }
  std::sort(verdict.evidence_turn_indices.begin(), verdict.evidence_turn_indices.end());
  verdict.evidence_turn_indices.erase(
      std::unique(verdict.evidence_turn_indices.begin(), verdict.evidence_turn_indices.end()),
      verdict.evidence_turn_indices.end());
  verdict.outcome = VerdictOutcome::evidence_found;
  verdict.grounded_text = normalize_fact_text(answer->get<std::string>());
  return verdict;
}

VerificationVerdict seek_evidence(const ProbeQuestion& question, const DialogueSession& session, StageContext& ctx) {
  const std::string payload = "Question: " + question.question_text + "\n\nConversation:\n" + render_turns(session.turns);
  const std::string raw = ctx.gateway.complete({ctx.prompts.judge, payload});
  return parse_judge_envelope(raw, question.entry_id, session);
}

MergeAction dedup_merge(const MemoryEntry& original, const VerificationVerdict& verdict,
                        const VerificationConfig& config, StageContext& ctx) {
  if (verdict.entry_id != original.entry_id) {
    throw ValidationError("verdict for " + verdict.entry_id + " applied to entry " + original.entry_id);
  }
  if (verdict.outcome == VerdictOutcome::hallucination) return MergeAction::discard_both;
  const double similarity = ctx.embeddings.similarity(*verdict.grounded_text, original.text);
  return similarity > config.tau_sim ? MergeAction::keep_new_drop_original : MergeAction::replace_original_with_new;
}

MemoryEntry grounded_entry(const MemoryEntry& original, const VerificationVerdict& verdict,
                           const DialogueSession& session, const std::string& run_time) {
  MemoryEntry entry = original;
  entry.text = verdict.grounded_text.value_or(original.text);
  entry.status = EntryStatus::verified;
  entry.source_turn_indices = verdict.evidence_turn_indices;
  refresh_created_timestamp(entry, session, run_time);
  return entry;
}

namespace {

struct Judged {
  std::optional<VerificationVerdict> verdict;  // empty when a format error kept the entry
};

VerificationResult verify_once(const std::vector<MemoryEntry>& candidates, const DialogueSession& session,
                               const VerificationConfig& config, StageContext& ctx) {
  VerificationResult result;
  result.report.tau_sim = config.tau_sim;
  std::vector<Judged> judged(candidates.size());

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const MemoryEntry& entry = candidates[i];
    VerificationTrace trace;
    trace.entry_id = entry.entry_id;
    trace.original_text = entry.text;
    try {
      const ProbeQuestion question = generate_question(entry, ctx);
      trace.question = question.question_text;
      VerificationVerdict verdict = seek_evidence(question, session, ctx);
      trace.outcome = verdict.outcome;
      trace.grounded_text = verdict.grounded_text;
      trace.evidence_turn_indices = verdict.evidence_turn_indices;
      judged[i].verdict = std::move(verdict);
    } catch (const VerificationFormatError& e) {
      trace.warning = std::string("kept unverified: ") + e.what();
      result.report.warnings.push_back(entry.entry_id + ": " + *trace.warning);
    }
    result.report.entries.push_back(std::move(trace));
  }

  // All similarities below come from one embedding batch.
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& verdict = judged[i].verdict;
    if (verdict && verdict->outcome == VerdictOutcome::hallucination) continue;
    if (verdict) texts.push_back(*verdict->grounded_text);
    texts.push_back(candidates[i].text);
  }
  if (!texts.empty()) ctx.embeddings.prefetch(texts);

  std::vector<std::pair<MemoryEntry, std::size_t>> survivors;  // entry, trace index
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& verdict = judged[i].verdict;
    VerificationTrace& trace = result.report.entries[i];
    if (!verdict) {
      survivors.emplace_back(candidates[i], i);
      continue;
    }
    const MergeAction action = dedup_merge(candidates[i], *verdict, config, ctx);
    trace.action = action;
    if (action == MergeAction::discard_both) continue;
    trace.similarity = ctx.embeddings.similarity(*verdict->grounded_text, candidates[i].text);
    survivors.emplace_back(grounded_entry(candidates[i], *verdict, session, ctx.run_time), i);
  }

  for (auto& [entry, trace_index] : survivors) {
    std::optional<std::string> duplicate_of;
    for (const MemoryEntry& kept : result.entries) {
      if (ctx.embeddings.similarity(entry.text, kept.text) > config.tau_sim) {
        duplicate_of = kept.entry_id;
        break;
      }
    }
    if (duplicate_of) {
      result.report.entries[trace_index].dropped_as_duplicate_of = duplicate_of;
      continue;
    }
    result.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace

VerificationResult run_verification(const std::vector<MemoryEntry>& candidates, const DialogueSession& session,
                                    const VerificationConfig& config, StageContext& ctx) {
  VerificationResult result = verify_once(candidates, session, config, ctx);
  for (int pass = 1; pass < config.passes; ++pass) {
    VerificationResult next = verify_once(result.entries, session, config, ctx);
    for (auto& trace : next.report.entries) result.report.entries.push_back(std::move(trace));
    for (auto& warning : next.report.warnings) result.report.warnings.push_back(std::move(warning));
    result.entries = std::move(next.entries);
  }
  return result;
}

void to_json(json& j, const VerificationReport& report) {
  j = json{{"tau_sim", report.tau_sim}, {"warnings", report.warnings}, {"entries", json::array()}};
  auto opt = [](const auto& v) -> json {
    if (!v) return nullptr;
    if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, VerdictOutcome> ||
                  std::is_same_v<std::decay_t<decltype(*v)>, MergeAction>) {
      return std::string(to_string(*v));
    } else {
      return *v;
    }
  };
  for (const VerificationTrace& t : report.entries) {
    j["entries"].push_back({
        {"entry_id", t.entry_id},
        {"original_text", t.original_text},
        {"question", opt(t.question)},
        {"outcome", opt(t.outcome)},
        {"grounded_text", opt(t.grounded_text)},
        {"evidence_turn_indices", t.evidence_turn_indices},
        {"similarity", opt(t.similarity)},
        {"action", opt(t.action)},
        {"dropped_as_duplicate_of", opt(t.dropped_as_duplicate_of)},
        {"warning", opt(t.warning)},
    });
  }
}

}  // namespace memloop
