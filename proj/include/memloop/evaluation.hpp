#pragma once

#include "memloop/context.hpp"
#include "memloop/memory_entry.hpp"
#include "memloop/memory_store.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace memloop {

struct QaItem {
  std::string question;
  std::string gold_answer;
};

struct GoldAnnotation {
  std::string session_id;
  std::vector<std::string> gold_facts;
  std::vector<QaItem> qa_items;
};

/// JSONL, one {session_id, gold_facts, qa_items} object per line.
std::vector<GoldAnnotation> load_gold_file(const std::filesystem::path& path);

/// Decides whether a candidate memory states a gold fact.
class FactMatcher {
 public:
  virtual ~FactMatcher() = default;
  virtual bool matches(const std::string& gold, const std::string& candidate) = 0;
};

/// cosine(gold, candidate) > tau_eval. Symmetric.
class EmbeddingMatcher final : public FactMatcher {
 public:
  EmbeddingMatcher(EmbeddingCache& embeddings, double tau_eval) : embeddings_(embeddings), tau_eval_(tau_eval) {}
  bool matches(const std::string& gold, const std::string& candidate) override;

 private:
  EmbeddingCache& embeddings_;
  double tau_eval_;
};

/// One entailment call per (gold, candidate) pair, memoised. The reply must
/// start with "yes" or "no".
class JudgeMatcher final : public FactMatcher {
 public:
  explicit JudgeMatcher(StageContext& ctx) : ctx_(ctx) {}
  bool matches(const std::string& gold, const std::string& candidate) override;

 private:
  StageContext& ctx_;
  std::map<std::pair<std::string, std::string>, bool> memo_;
};

struct MatchTrace {
  std::string subject;               // gold fact (integrity) or entry id (accuracy)
  std::vector<std::string> matches;  // entry ids (integrity) or gold facts (accuracy)
};

struct MetricResult {
  double value = 0.0;
  std::size_t matched = 0;
  std::size_t total = 0;
  std::vector<MatchTrace> trace;
  std::vector<std::string> warnings;
};

/// Recall: fraction of gold facts matched by at least one extracted entry.
/// Throws ValidationError for an empty gold list.
MetricResult memory_integrity(const std::vector<std::string>& gold, const std::vector<MemoryEntry>& extracted,
                              FactMatcher& matcher);

/// Precision: fraction of extracted entries matched by at least one gold fact.
/// An empty extraction scores a vacuous 1.0 with a warning.
MetricResult memory_accuracy(const std::vector<std::string>& gold, const std::vector<MemoryEntry>& extracted,
                             FactMatcher& matcher);

enum class MatcherKind { embedding, judge };
enum class QaJudgeKind { containment, llm };

struct QaTrace {
  std::string question;
  std::string gold_answer;
  std::string answer;
  bool correct = false;
  std::optional<std::string> warning;
};

struct QaResult {
  double value = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<QaTrace> trace;
};

/// Case-insensitive containment of the gold answer in the answer.
bool containment_judge(const std::string& answer, const std::string& gold_answer);

/// Answers each item from the store and grades it. Backend failures count as
/// incorrect with a warning. Throws ValidationError for an empty item list.
QaResult qa_accuracy(const std::vector<QaItem>& items, const MemoryStore& store, QaJudgeKind judge, std::size_t k,
                     StageContext& ctx);

struct EvalConfig {
  double tau_eval = 0.8;
  MatcherKind matcher = MatcherKind::embedding;
  QaJudgeKind qa_judge = QaJudgeKind::containment;
  std::size_t retrieval_k = 20;
  bool run_qa = true;

  void validate() const;
};

struct SessionEval {
  std::string session_id;
  MetricResult integrity;
  MetricResult accuracy;
  std::optional<QaResult> qa;
  std::vector<std::string> warnings;
};

struct EvalReport {
  double memory_integrity = 0.0;
  double memory_accuracy = 0.0;
  std::optional<double> qa_accuracy;
  std::vector<SessionEval> sessions;
};

SessionEval evaluate_session(const GoldAnnotation& gold, const MemoryStore* store, const EvalConfig& config,
                             StageContext& ctx);

/// Micro-averages the per-session counts.
EvalReport aggregate(std::vector<SessionEval> sessions);

void to_json(nlohmann::json& j, const EvalReport& report);
std::string format_table(const EvalReport& report);

}  // namespace memloop
