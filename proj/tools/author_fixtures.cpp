// Regenerates a fixture corpus from a planted-facts manifest: sessions.jsonl,
// gold.jsonl and chat.jsonl (every chat exchange the pipeline variants make).

#include "scripted_chat.hpp"

#include "memloop/compressor.hpp"
#include "memloop/config.hpp"
#include "memloop/error.hpp"
#include "memloop/fixture_backend.hpp"
#include "memloop/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

using namespace memloop;

namespace {

void write_gold(const std::filesystem::path& path, const std::vector<GoldAnnotation>& gold) {
  std::ofstream out(path, std::ios::binary);
  for (const GoldAnnotation& g : gold) {
    nlohmann::ordered_json row;
    row["session_id"] = g.session_id;
    row["gold_facts"] = g.gold_facts;
    row["qa_items"] = nlohmann::ordered_json::array();
    for (const QaItem& q : g.qa_items) row["qa_items"].push_back({{"question", q.question}, {"gold_answer", q.gold_answer}});
    out << row.dump() << "\n";
  }
}

void report(const std::string& label, const RunResult& result) {
  std::cout << std::left << std::setw(18) << label;
  if (result.eval) {
    std::cout << " integrity=" << result.eval->memory_integrity << " accuracy=" << result.eval->memory_accuracy;
    if (result.eval->qa_accuracy) std::cout << " qa=" << *result.eval->qa_accuracy;
  }
  std::cout << " chat_calls=" << result.summary.stats.chat_calls << "\n";
  for (const SessionRun& run : result.sessions) {
    if (run.error) std::cout << "  " << run.session_id << ": " << *run.error << "\n";
    for (const AlignmentReport& a : run.alignment) {
      std::cout << "  " << run.session_id << " uncovered:";
      for (const AlignmentRow& row : a.per_turn) {
        if (!row.covered) std::cout << " " << row.turn_index << "(" << std::setprecision(3) << row.best_score << ")";
      }
      std::cout << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Author fixture-mode replay files from a planted-facts manifest"};
  std::filesystem::path manifest_path;
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::optional<double> ratio;
  std::uint64_t seed = 7;
  app.add_option("--manifest", manifest_path, "planted-facts manifest")->required()->check(CLI::ExistingFile);
  app.add_option("--config", config_path, "pipeline config of the target corpus")->required()->check(CLI::ExistingFile);
  app.add_option("--out-dir", out_dir, "where sessions.jsonl, gold.jsonl and chat.jsonl go")->required();
  app.add_option("--ratio", ratio, "compress sessions first, keeping this fraction of tokens");
  app.add_option("--seed", seed, "compression seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const PipelineConfig config = load_pipeline_config(config_path);
    const auto planted = authoring::load_manifest(manifest_path);
    const auto gold = authoring::gold_from_manifest(planted);

    std::vector<DialogueSession> sessions;
    for (const auto& p : planted) sessions.push_back(p.session);
    if (ratio) {
      const CompressionConfig cc{*ratio, seed};
      cc.validate();
      for (auto& s : sessions) s = compress_session(s, cc);
    }

    std::filesystem::create_directories(out_dir);
    write_session_file(out_dir / "sessions.jsonl", sessions);
    write_gold(out_dir / "gold.jsonl", gold);

    const PromptSet prompts = PromptSet::load(config.prompt_dir);
    auto scripted = std::make_shared<authoring::ScriptedChatBackend>(planted, sessions, prompts);
    auto recorder = std::make_shared<RecordingChatBackend>(scripted);
    auto embedder = std::make_shared<HashedEmbeddingBackend>(config.fixtures.embedding_dimension);

    const std::vector<std::pair<std::string, StageGates>> variants = {
        {"full", {true, true, std::nullopt}},
        {"no-completion", {false, true, std::nullopt}},
        {"no-verification", {true, false, std::nullopt}},
        {"one-pass", {false, false, std::nullopt}},
    };
    for (const auto& [label, gates] : variants) {
      Gateway gateway(recorder, embedder);
      const Pipeline pipeline(config, gateway, prompts, gates);
      const RunResult result = pipeline.run(sessions, gold);
      report(label, result);

      PipelineConfig judged = config;
      judged.evaluation.matcher = MatcherKind::judge;
      judged.evaluation.qa_judge = QaJudgeKind::llm;
      std::vector<MemoryStore> stores;
      for (const SessionRun& run : result.sessions) {
        if (run.store) stores.push_back(*run.store);
      }
      const EvalReport with_judges = Pipeline(judged, gateway, prompts, gates).evaluate(gold, stores);
      std::cout << "  judged: integrity=" << with_judges.memory_integrity
                << " accuracy=" << with_judges.memory_accuracy << "\n";
    }

    recorder->write(out_dir / "chat.jsonl");
    std::cout << "recorded " << recorder->recorded().size() << " exchanges\n";
  } catch (const std::exception& e) {
    std::cerr << "author_fixtures: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
