#include "memloop/evaluation.hpp"

#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace memloop {

using nlohmann::json;

std::vector<GoldAnnotation> load_gold_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open gold file " + path.string());
  std::vector<GoldAnnotation> gold;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    GoldAnnotation annotation;
    try {
      const json obj = json::parse(line);
      annotation.session_id = obj.at("session_id").get<std::string>();
      annotation.gold_facts = obj.at("gold_facts").get<std::vector<std::string>>();
      if (auto qa = obj.find("qa_items"); qa != obj.end()) {
        for (const json& item : *qa) {
          annotation.qa_items.push_back({item.at("question").get<std::string>(), item.at("gold_answer").get<std::string>()});
        }
      }
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    for (const QaItem& item : annotation.qa_items) {
      if (trim(item.question).empty()) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": empty QA question");
      }
    }
    gold.push_back(std::move(annotation));
  }
  return gold;
}

bool EmbeddingMatcher::matches(const std::string& gold, const std::string& candidate) {
  return embeddings_.similarity(gold, candidate) > tau_eval_;
}

bool JudgeMatcher::matches(const std::string& gold, const std::string& candidate) {
  const auto key = std::make_pair(gold, candidate);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  const std::string raw =
      ctx_.gateway.complete({ctx_.prompts.entail, "Reference fact: " + gold + "\nCandidate memory: " + candidate});
  const std::string reply = to_lower_ascii(trim(raw));
  bool verdict = false;
  if (reply.starts_with("yes")) {
    verdict = true;
  } else if (!reply.starts_with("no")) {
    throw BackendProtocolError("entailment judge answered neither yes nor no: " + raw);
  }
  memo_.emplace(key, verdict);
  return verdict;
}

namespace {

double ratio(std::size_t num, std::size_t den) { return static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

MetricResult memory_integrity(const std::vector<std::string>& gold, const std::vector<MemoryEntry>& extracted,
                              FactMatcher& matcher) {
  if (gold.empty()) throw ValidationError("memory_integrity needs at least one gold fact");
  MetricResult result;
  result.total = gold.size();
  for (const std::string& fact : gold) {
    MatchTrace trace{fact, {}};
    for (const MemoryEntry& entry : extracted) {
      if (matcher.matches(fact, entry.text)) trace.matches.push_back(entry.entry_id);
    }
    if (!trace.matches.empty()) ++result.matched;
    result.trace.push_back(std::move(trace));
  }
  result.value = ratio(result.matched, result.total);
  return result;
}

MetricResult memory_accuracy(const std::vector<std::string>& gold, const std::vector<MemoryEntry>& extracted,
                             FactMatcher& matcher) {
  MetricResult result;
  result.total = extracted.size();
  if (extracted.empty()) {
    result.value = 1.0;
    result.warnings.push_back("memory_accuracy over an empty extraction is vacuously 1.0");
    return result;
  }
  for (const MemoryEntry& entry : extracted) {
    MatchTrace trace{entry.entry_id, {}};
    for (const std::string& fact : gold) {
      if (matcher.matches(fact, entry.text)) trace.matches.push_back(fact);
    }
    if (!trace.matches.empty()) ++result.matched;
    result.trace.push_back(std::move(trace));
  }
  result.value = ratio(result.matched, result.total);
  return result;
}

bool containment_judge(const std::string& answer, const std::string& gold_answer) {
  if (trim(gold_answer).empty()) return false;
  return contains_ci(answer, gold_answer);
}

namespace {

bool llm_judge(const QaItem& item, const std::string& answer, StageContext& ctx) {
  const std::string payload =
      "Question: " + item.question + "\nGold answer: " + item.gold_answer + "\nCandidate answer: " + answer;
  const std::string raw = ctx.gateway.complete({ctx.prompts.qa_judge, payload});
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    const json verdict = json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (verdict.is_object() && verdict.contains("correct") && verdict["correct"].is_boolean()) {
      return verdict["correct"].get<bool>();
    }
  }
  throw BackendProtocolError("QA judge reply is not {\"correct\": bool}: " + raw);
}

}  // namespace

QaResult qa_accuracy(const std::vector<QaItem>& items, const MemoryStore& store, QaJudgeKind judge, std::size_t k,
                     StageContext& ctx) {
  if (items.empty()) throw ValidationError("qa_accuracy needs at least one QA item");
  QaResult result;
  result.total = items.size();
  for (const QaItem& item : items) {
    QaTrace trace{item.question, item.gold_answer, {}, false, std::nullopt};
    try {
      trace.answer = answer_question(store, item.question, k, ctx);
      trace.correct = judge == QaJudgeKind::containment ? containment_judge(trace.answer, item.gold_answer)
                                                        : llm_judge(item, trace.answer, ctx);
    } catch (const Error& e) {
      trace.correct = false;
      trace.warning = e.what();
    }
    if (trace.correct) ++result.correct;
    result.trace.push_back(std::move(trace));
  }
  result.value = ratio(result.correct, result.total);
  return result;
}

void EvalConfig::validate() const {
  if (!(tau_eval >= -1.0 && tau_eval <= 1.0)) throw ConfigError("evaluation.tau_eval must lie in [-1, 1]");
  if (retrieval_k == 0) throw ConfigError("retrieval_k must be positive");
}

SessionEval evaluate_session(const GoldAnnotation& gold, const MemoryStore* store, const EvalConfig& config,
                             StageContext& ctx) {
  SessionEval eval;
  eval.session_id = gold.session_id;
  const MemoryStore empty{gold.session_id, {}, ctx.run_time, kPipelineVersion};
  if (store == nullptr) {
    eval.warnings.push_back("no store for session " + gold.session_id + "; scored as empty");
    store = &empty;
  }

  std::unique_ptr<FactMatcher> matcher;
  if (config.matcher == MatcherKind::embedding) {
    std::vector<std::string> texts = gold.gold_facts;
    for (const MemoryEntry& entry : store->entries) texts.push_back(entry.text);
    if (!texts.empty()) ctx.embeddings.prefetch(texts);
    matcher = std::make_unique<EmbeddingMatcher>(ctx.embeddings, config.tau_eval);
  } else {
    matcher = std::make_unique<JudgeMatcher>(ctx);
  }
  eval.integrity = memory_integrity(gold.gold_facts, store->entries, *matcher);
  eval.accuracy = memory_accuracy(gold.gold_facts, store->entries, *matcher);
  for (const auto& w : eval.accuracy.warnings) eval.warnings.push_back(gold.session_id + ": " + w);
  if (config.run_qa && !gold.qa_items.empty()) {
    eval.qa = qa_accuracy(gold.qa_items, *store, config.qa_judge, config.retrieval_k, ctx);
    for (const QaTrace& t : eval.qa->trace) {
      if (t.warning) eval.warnings.push_back(gold.session_id + ": " + *t.warning);
    }
  }
  return eval;
}

EvalReport aggregate(std::vector<SessionEval> sessions) {
  EvalReport report;
  std::size_t gold_matched = 0, gold_total = 0, entries_matched = 0, entries_total = 0, qa_correct = 0, qa_total = 0;
  for (const SessionEval& s : sessions) {
    gold_matched += s.integrity.matched;
    gold_total += s.integrity.total;
    entries_matched += s.accuracy.matched;
    entries_total += s.accuracy.total;
    if (s.qa) {
      qa_correct += s.qa->correct;
      qa_total += s.qa->total;
    }
  }
  report.memory_integrity = gold_total == 0 ? 0.0 : ratio(gold_matched, gold_total);
  report.memory_accuracy = entries_total == 0 ? 1.0 : ratio(entries_matched, entries_total);
  if (qa_total > 0) report.qa_accuracy = ratio(qa_correct, qa_total);
  report.sessions = std::move(sessions);
  return report;
}

namespace {

json metric_json(const MetricResult& m) {
  json trace = json::array();
  for (const MatchTrace& t : m.trace) trace.push_back({{"subject", t.subject}, {"matches", t.matches}});
  return json{{"value", m.value}, {"matched", m.matched}, {"total", m.total}, {"trace", trace}};
}

}  // namespace

void to_json(json& j, const EvalReport& report) {
  j = json{
      {"memory_integrity", report.memory_integrity},
      {"memory_accuracy", report.memory_accuracy},
      {"qa_accuracy", report.qa_accuracy ? json(*report.qa_accuracy) : json(nullptr)},
      {"sessions", json::array()},
  };
  for (const SessionEval& s : report.sessions) {
    json session{
        {"session_id", s.session_id},
        {"memory_integrity", metric_json(s.integrity)},
        {"memory_accuracy", metric_json(s.accuracy)},
        {"warnings", s.warnings},
        {"qa", nullptr},
    };
    if (s.qa) {
      json trace = json::array();
      for (const QaTrace& t : s.qa->trace) {
        trace.push_back({{"question", t.question},
                         {"gold_answer", t.gold_answer},
                         {"answer", t.answer},
                         {"correct", t.correct},
                         {"warning", t.warning ? json(*t.warning) : json(nullptr)}});
      }
      session["qa"] = {{"value", s.qa->value}, {"correct", s.qa->correct}, {"total", s.qa->total}, {"trace", trace}};
    }
    j["sessions"].push_back(std::move(session));
  }
}

std::string format_table(const EvalReport& report) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %10s %10s %10s\n", "session", "integrity", "accuracy", "qa");
  out << buf;
  auto qa_cell = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char cell[32];
    std::snprintf(cell, sizeof cell, "%.4f", *v);
    return std::string(cell);
  };
  for (const SessionEval& s : report.sessions) {
    std::snprintf(buf, sizeof buf, "%-24s %10.4f %10.4f %10s\n", s.session_id.c_str(), s.integrity.value,
                  s.accuracy.value, qa_cell(s.qa ? std::optional<double>(s.qa->value) : std::nullopt).c_str());
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-24s %10.4f %10.4f %10s\n", "TOTAL", report.memory_integrity,
                report.memory_accuracy, qa_cell(report.qa_accuracy).c_str());
  out << buf;
  return out.str();
}

}  // namespace memloop
