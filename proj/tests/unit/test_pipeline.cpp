#include "memloop/config.hpp"
#include "memloop/error.hpp"
#include "memloop/fixture_backend.hpp"
#include "memloop/pipeline.hpp"
#include "scripted_chat.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ts = memloop::test_support;
using namespace memloop;

namespace {

constexpr double kExact = 1e-12;

/// Corpus config, backends and counting interceptors wired together.
struct CorpusRig {
  explicit CorpusRig(const std::filesystem::path& dir = ts::corpus_dir()) : config(ts::corpus_config(dir)) {
    const Backends backends = make_backends(config);
    chat = std::make_shared<ts::CountingChat>(backends.chat);
    embedder = std::make_shared<ts::CountingEmbedder>(backends.embedder);
    gateway = std::make_unique<Gateway>(chat, embedder);
    sessions = parse_session_file(dir / "sessions.jsonl");
    gold = load_gold_file(dir / "gold.jsonl");
  }

  RunResult run(StageGates gates = {}, bool with_gold = false) {
    const Pipeline pipeline(config, *gateway, PromptSet::load(config.prompt_dir), gates);
    return with_gold ? pipeline.run(sessions, gold) : pipeline.run(sessions);
  }

  PipelineConfig config;
  std::shared_ptr<ts::CountingChat> chat;
  std::shared_ptr<ts::CountingEmbedder> embedder;
  std::unique_ptr<Gateway> gateway;
  std::vector<DialogueSession> sessions;
  std::vector<GoldAnnotation> gold;
};

const MemoryStore& store_of(const RunResult& r, const std::string& id) {
  for (const SessionRun& run : r.sessions) {
    if (run.session_id == id) {
      EXPECT_TRUE(run.store.has_value()) << id << ": " << run.error.value_or("");
      return *run.store;
    }
  }
  throw std::runtime_error("no session " + id);
}

bool has_text(const MemoryStore& store, const std::string& text) {
  return std::any_of(store.entries.begin(), store.entries.end(), [&](const MemoryEntry& e) { return e.text == text; });
}

std::string store_bytes(const RunResult& r) {
  std::string out;
  for (const SessionRun& run : r.sessions) {
    if (run.store) out += store_to_json(*run.store).dump(2) + "\n";
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Pipeline, CorpusFullRunScoresPerfectly) {
  CorpusRig rig;
  const RunResult r = rig.run({}, true);
  ASSERT_TRUE(r.ok());
  ASSERT_TRUE(r.eval);
  EXPECT_NEAR(r.eval->memory_integrity, 1.0, kExact);
  EXPECT_NEAR(r.eval->memory_accuracy, 1.0, kExact);
  ASSERT_TRUE(r.eval->qa_accuracy);
  EXPECT_NEAR(*r.eval->qa_accuracy, 1.0, kExact);
  for (const SessionRun& run : r.sessions) {
    for (const MemoryEntry& e : run.store->entries) {
      EXPECT_EQ(e.status, EntryStatus::verified) << e.entry_id;
      EXPECT_FALSE(e.source_turn_indices.empty()) << e.entry_id;
    }
  }
}

TEST(Pipeline, CompletionRecoversTheOmittedFacts) {
  CorpusRig rig;
  const RunResult r = rig.run();
  for (const SessionRun& run : r.sessions) {
    EXPECT_EQ(run.recovered_entries, 2u) << run.session_id;
    EXPECT_EQ(run.candidate_entries, run.initial_entries + 2) << run.session_id;
  }
  for (const auto& planted : authoring::load_manifest(ts::corpus_dir() / "manifest.json")) {
    const MemoryStore& store = store_of(r, planted.session.session_id);
    for (const auto& fact : planted.facts) {
      if (fact.omitted_initially) EXPECT_TRUE(has_text(store, fact.gold)) << fact.gold;
    }
  }
}

TEST(Pipeline, StopAfterExtractionKeepsInitialEntriesOnly) {
  CorpusRig rig;
  StageGates gates;
  gates.stop_after = Stage::extraction;
  const RunResult r = rig.run(gates);
  ASSERT_TRUE(r.ok());
  for (const SessionRun& run : r.sessions) {
    EXPECT_TRUE(run.alignment.empty());
    EXPECT_FALSE(run.verification);
    EXPECT_EQ(run.store->entries.size(), run.initial_entries);
    for (const MemoryEntry& e : run.store->entries) {
      EXPECT_EQ(e.status, EntryStatus::initial);
      EXPECT_NE(e.entry_id.find("/i"), std::string::npos);
    }
  }
  EXPECT_EQ(rig.chat->calls.load(), 3);
  EXPECT_EQ(rig.embedder->calls.load(), 0);
}

TEST(Pipeline, StopAfterCompletionSkipsVerification) {
  CorpusRig rig;
  StageGates gates;
  gates.stop_after = Stage::completion;
  const RunResult r = rig.run(gates);
  for (const SessionRun& run : r.sessions) {
    EXPECT_FALSE(run.verification);
    EXPECT_EQ(run.store->entries.size(), run.candidate_entries);
  }
}

TEST(Pipeline, ParseStage) {
  EXPECT_EQ(parse_stage("extraction"), Stage::extraction);
  EXPECT_EQ(parse_stage("completion"), Stage::completion);
  EXPECT_EQ(parse_stage("verification"), Stage::verification);
  EXPECT_THROW(parse_stage("storage"), ConfigError);
}

TEST(Pipeline, AblationsMoveMetricsInTheExpectedDirection) {
  CorpusRig full_rig, no_completion_rig, no_verification_rig;
  const RunResult full = full_rig.run({}, true);
  const RunResult no_completion = no_completion_rig.run({false, true, std::nullopt}, true);
  const RunResult no_verification = no_verification_rig.run({true, false, std::nullopt}, true);

  // Six omitted facts out of thirty.
  EXPECT_NEAR(no_completion.eval->memory_integrity, 24.0 / 30.0, kExact);
  EXPECT_GT(full.eval->memory_integrity, no_completion.eval->memory_integrity);
  EXPECT_LT(no_verification.eval->memory_accuracy, full.eval->memory_accuracy);
}

TEST(Pipeline, VerificationDiscardsThePlantedHallucination) {
  CorpusRig full_rig, no_verification_rig;
  const RunResult full = full_rig.run();
  const RunResult raw = no_verification_rig.run({true, false, std::nullopt});
  const std::vector<std::pair<std::string, std::string>> planted = {
      {"ana-2025", "User is allergic to peanuts"},
      {"ben-2025", "User owns a sailboat named Seabird"},
      {"chloe-2025", "User has a twin brother named Jonas"},
  };
  for (const auto& [id, text] : planted) {
    EXPECT_FALSE(has_text(store_of(full, id), text)) << id;
    EXPECT_TRUE(has_text(store_of(raw, id), text)) << id;
  }
  for (const SessionRun& run : full.sessions) {
    const auto& traces = run.verification->entries;
    EXPECT_EQ(std::count_if(traces.begin(), traces.end(),
                            [](const VerificationTrace& t) { return t.outcome == VerdictOutcome::hallucination; }),
              1)
        << run.session_id;
  }
}

TEST(Pipeline, CallCountsMatchInterceptorsExactly) {
  CorpusRig rig;
  const RunResult r = rig.run();
  // Per session: one extraction, one supplementary pass, then a question and a
  // judge call for each of the eleven candidates. Embeddings: one alignment
  // batch and one verification batch.
  EXPECT_EQ(rig.chat->calls.load(), 72);
  EXPECT_EQ(rig.embedder->calls.load(), 6);
  EXPECT_EQ(r.summary.stats.chat_calls, rig.chat->calls.load());
  EXPECT_EQ(r.summary.stats.embed_calls, rig.embedder->calls.load());
  EXPECT_EQ(r.summary.stats.embedded_texts, rig.embedder->texts_seen.load());
  EXPECT_EQ(r.summary.stats.chat_payload_chars, rig.chat->chars.load());
  EXPECT_EQ(r.summary.stats.embed_payload_chars, rig.embedder->chars.load());
}

TEST(Pipeline, CallCountsIncludeEvaluationWhenGoldIsGiven) {
  CorpusRig rig;
  const RunResult r = rig.run({}, true);
  EXPECT_EQ(r.summary.stats.chat_calls, rig.chat->calls.load());
  EXPECT_EQ(r.summary.stats.embed_calls, rig.embedder->calls.load());
  // Thirty QA answers on top of the pipeline's 72.
  EXPECT_EQ(rig.chat->calls.load(), 102);
}

TEST(Pipeline, OnePassIsCheaperThanFull) {
  CorpusRig full_rig, one_pass_rig;
  const RunResult full = full_rig.run();
  const RunResult one_pass = one_pass_rig.run({false, false, std::nullopt});
  EXPECT_EQ(one_pass.summary.stats.chat_calls, 3);
  EXPECT_EQ(one_pass.summary.stats.embed_calls, 0);
  EXPECT_GT(full.summary.stats.chat_calls, one_pass.summary.stats.chat_calls);
  EXPECT_GT(full.summary.stats.chat_payload_chars, one_pass.summary.stats.chat_payload_chars);
}

TEST(Pipeline, RunsAreByteIdentical) {
  CorpusRig a, b;
  const RunResult ra = a.run({}, true);
  const RunResult rb = b.run({}, true);
  EXPECT_EQ(store_bytes(ra), store_bytes(rb));
  EXPECT_EQ(nlohmann::json(*ra.eval).dump(), nlohmann::json(*rb.eval).dump());
}

TEST(Pipeline, WorkersDoNotChangeResults) {
  CorpusRig serial, parallel;
  parallel.config.workers = 3;
  const RunResult rs = serial.run({}, true);
  const RunResult rp = parallel.run({}, true);
  ASSERT_EQ(rp.sessions.size(), rs.sessions.size());
  for (std::size_t i = 0; i < rs.sessions.size(); ++i) EXPECT_EQ(rp.sessions[i].session_id, rs.sessions[i].session_id);
  EXPECT_EQ(store_bytes(rs), store_bytes(rp));
  EXPECT_EQ(nlohmann::json(*rs.eval).dump(), nlohmann::json(*rp.eval).dump());
  EXPECT_EQ(rs.summary.stats, rp.summary.stats);
}

TEST(Pipeline, FailingSessionDoesNotStopTheOthers) {
  CorpusRig rig;
  rig.config.workers = 2;
  auto stranger = ts::make_session("stranger", {{Speaker::user, "I collect antique typewriters."},
                                                {Speaker::assistant, "What a lovely hobby."}});
  rig.sessions.insert(rig.sessions.begin() + 1, stranger);
  const RunResult r = rig.run();
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.summary.sessions_total, 4u);
  EXPECT_EQ(r.summary.sessions_ok, 3u);
  ASSERT_EQ(r.summary.failures.size(), 1u);
  EXPECT_EQ(r.summary.failures[0].first, "stranger");
  EXPECT_FALSE(r.sessions[1].store);
  ASSERT_TRUE(r.sessions[1].error);
  EXPECT_NE(r.sessions[1].error->find("fixture"), std::string::npos);
  for (std::size_t i : {0u, 2u, 3u}) EXPECT_TRUE(r.sessions[i].store) << r.sessions[i].session_id;
}

TEST(Pipeline, FailedSessionScoresZeroInEvaluation) {
  CorpusRig rig;
  rig.sessions.erase(rig.sessions.begin());
  rig.sessions.insert(rig.sessions.begin(), ts::make_session("ana-2025", {{Speaker::user, "unknown text"}}));
  const RunResult r = rig.run({}, true);
  EXPECT_EQ(r.summary.sessions_ok, 2u);
  ASSERT_TRUE(r.eval);
  EXPECT_NEAR(r.eval->sessions[0].integrity.value, 0.0, kExact);
  EXPECT_NEAR(r.eval->memory_integrity, 20.0 / 30.0, kExact);
}

TEST(Pipeline, WritesRunArtifacts) {
  CorpusRig rig;
  const RunResult r = rig.run({}, true);
  const auto dir = ts::scratch_dir("artifacts");
  write_run_artifacts(r, dir, {true, true});
  for (const SessionRun& run : r.sessions) {
    const auto store_path = dir / (run.session_id + ".store.json");
    ASSERT_TRUE(std::filesystem::exists(store_path));
    EXPECT_EQ(store_to_json(load_store(store_path)).dump(), store_to_json(*run.store).dump());
    EXPECT_TRUE(std::filesystem::exists(dir / (run.session_id + ".alignment.json")));
    EXPECT_TRUE(std::filesystem::exists(dir / (run.session_id + ".verification.json")));
  }
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary.at("sessions_ok"), 3);
  EXPECT_EQ(summary.at("chat_calls"), r.summary.stats.chat_calls);
  const auto report = nlohmann::json::parse(slurp(dir / "eval_report.json"));
  EXPECT_DOUBLE_EQ(report.at("memory_integrity").get<double>(), 1.0);

  const auto quiet = ts::scratch_dir("artifacts-quiet");
  write_run_artifacts(r, quiet, {});
  EXPECT_FALSE(std::filesystem::exists(quiet / "ana-2025.alignment.json"));
  EXPECT_FALSE(std::filesystem::exists(quiet / "ana-2025.verification.json"));
}

TEST(Pipeline, ArtifactStemIsFileSystemSafe) {
  EXPECT_EQ(artifact_stem("ana-2025"), "ana-2025");
  EXPECT_EQ(artifact_stem("a/b c:d"), "a_b_c_d");
}

TEST(Pipeline, CompressedCorpusKeepsCompletionAhead) {
  CorpusRig full_rig(ts::compressed_dir()), no_completion_rig(ts::compressed_dir());
  const RunResult full = full_rig.run({}, true);
  const RunResult no_completion = no_completion_rig.run({false, true, std::nullopt}, true);
  ASSERT_TRUE(full.ok());
  ASSERT_TRUE(no_completion.ok());
  EXPECT_GE(full.eval->memory_integrity, no_completion.eval->memory_integrity);
}

// The replay files must be exactly what the scripted responder produces for
// the current prompts and pipeline; a stale fixture shows up here first.
class FixtureFreshness : public ::testing::TestWithParam<const char*> {};

TEST_P(FixtureFreshness, ScriptedResponderReproducesRecordedChat) {
  const auto dir = ts::source_dir() / "fixtures" / GetParam();
  const PipelineConfig config = ts::corpus_config(dir);
  const auto planted = authoring::load_manifest(ts::corpus_dir() / "manifest.json");
  const auto sessions = parse_session_file(dir / "sessions.jsonl");
  const auto gold = load_gold_file(dir / "gold.jsonl");
  const PromptSet prompts = PromptSet::load(config.prompt_dir);

  auto recorder = std::make_shared<RecordingChatBackend>(
      std::make_shared<authoring::ScriptedChatBackend>(planted, sessions, prompts));
  auto embedder = std::make_shared<HashedEmbeddingBackend>(config.fixtures.embedding_dimension);
  for (const StageGates gates : {StageGates{true, true, std::nullopt}, StageGates{false, true, std::nullopt},
                                 StageGates{true, false, std::nullopt}, StageGates{false, false, std::nullopt}}) {
    Gateway gateway(recorder, embedder);
    const RunResult result = Pipeline(config, gateway, prompts, gates).run(sessions, gold);
    PipelineConfig judged = config;
    judged.evaluation.matcher = MatcherKind::judge;
    judged.evaluation.qa_judge = QaJudgeKind::llm;
    std::vector<MemoryStore> stores;
    for (const SessionRun& run : result.sessions) {
      if (run.store) stores.push_back(*run.store);
    }
    Pipeline(judged, gateway, prompts, gates).evaluate(gold, stores);
  }

  const auto scratch = ts::scratch_dir(std::string("fresh-") + GetParam());
  recorder->write(scratch / "chat.jsonl");
  EXPECT_EQ(slurp(scratch / "chat.jsonl"), slurp(dir / "chat.jsonl"))
      << "regenerate with author_fixtures (see README)";
}

INSTANTIATE_TEST_SUITE_P(Corpora, FixtureFreshness, ::testing::Values("corpus", "compressed-0.2"));
