#include "memloop/pipeline.hpp"

#include "memloop/error.hpp"
#include "memloop/extraction.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <fstream>
#include <map>
#include <thread>

namespace memloop {

using nlohmann::json;

Stage parse_stage(std::string_view name) {
  if (name == "extraction") return Stage::extraction;
  if (name == "completion") return Stage::completion;
  if (name == "verification") return Stage::verification;
  throw ConfigError("unknown stage '" + std::string(name) + "' (expected extraction, completion or verification)");
}

Pipeline::Pipeline(PipelineConfig config, Gateway& gateway, PromptSet prompts, StageGates gates)
    : config_(std::move(config)), gateway_(gateway), prompts_(std::move(prompts)), gates_(gates) {
  config_.validate();
}

SessionRun Pipeline::run_session(const DialogueSession& session) const {
  SessionRun run;
  run.session_id = session.session_id;
  EmbeddingCache cache(gateway_);
  StageContext ctx{gateway_, prompts_, cache, config_.run_time()};

  auto finish = [&](std::vector<MemoryEntry> entries) {
    run.store = MemoryStore{session.session_id, std::move(entries), ctx.run_time, kPipelineVersion};
    return run;
  };

  try {
    std::vector<MemoryEntry> entries = extract_initial(session, ctx, config_.window_turns);
    run.initial_entries = entries.size();
    if (gates_.stop_after == Stage::extraction) return finish(std::move(entries));

    if (gates_.completion) {
      CompletionResult completion = run_completion(std::move(entries), session, config_.completion, ctx);
      run.alignment = std::move(completion.reports);
      run.recovered_entries = completion.recovered;
      entries = std::move(completion.candidates);
    }
    run.candidate_entries = entries.size();
    if (gates_.stop_after == Stage::completion) return finish(std::move(entries));

    if (gates_.verification) {
      VerificationResult verified = run_verification(entries, session, config_.verification, ctx);
      run.verification = std::move(verified.report);
      entries = std::move(verified.entries);
    }
    return finish(std::move(entries));
  } catch (const std::exception& e) {
    run.store.reset();
    run.error = e.what();
    return run;
  }
}

RunResult Pipeline::run(const std::vector<DialogueSession>& sessions,
                        const std::optional<std::vector<GoldAnnotation>>& gold) const {
  RunResult result;
  result.sessions.resize(sessions.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < sessions.size(); i = next.fetch_add(1)) {
      result.sessions[i] = run_session(sessions[i]);
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(config_.workers), sessions.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  result.summary.sessions_total = sessions.size();
  std::vector<MemoryStore> stores;
  for (const SessionRun& run : result.sessions) {
    if (run.error) {
      result.summary.failures.emplace_back(run.session_id, *run.error);
    } else {
      ++result.summary.sessions_ok;
      stores.push_back(*run.store);
    }
  }
  if (gold) result.eval = evaluate(*gold, stores);
  result.summary.stats = gateway_.stats();
  return result;
}

EvalReport Pipeline::evaluate(const std::vector<GoldAnnotation>& gold, const std::vector<MemoryStore>& stores) const {
  std::map<std::string, const MemoryStore*> by_owner;
  for (const MemoryStore& store : stores) by_owner.emplace(store.owner_id, &store);

  std::vector<SessionEval> evals;
  for (const GoldAnnotation& annotation : gold) {
    EmbeddingCache cache(gateway_);
    StageContext ctx{gateway_, prompts_, cache, config_.run_time()};
    auto it = by_owner.find(annotation.session_id);
    evals.push_back(evaluate_session(annotation, it == by_owner.end() ? nullptr : it->second, config_.evaluation, ctx));
  }
  return aggregate(std::move(evals));
}

std::string artifact_stem(const std::string& session_id) {
  std::string stem;
  for (char c : session_id) {
    const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                      c == '_' || c == '.';
    stem.push_back(safe ? c : '_');
  }
  return stem;
}

void to_json(json& j, const RunSummary& summary) {
  json failures = json::array();
  for (const auto& [id, message] : summary.failures) failures.push_back({{"session_id", id}, {"error", message}});
  j = json{
      {"sessions_total", summary.sessions_total},
      {"sessions_ok", summary.sessions_ok},
      {"sessions_failed", summary.failures.size()},
      {"failures", failures},
      {"chat_calls", summary.stats.chat_calls},
      {"embed_calls", summary.stats.embed_calls},
      {"embedded_texts", summary.stats.embedded_texts},
      {"chat_payload_chars", summary.stats.chat_payload_chars},
      {"embed_payload_chars", summary.stats.embed_payload_chars},
      {"reported_tokens", summary.stats.reported_tokens},
  };
}

namespace {

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

void write_run_artifacts(const RunResult& result, const std::filesystem::path& out_dir, const ArtifactOptions& options) {
  std::filesystem::create_directories(out_dir);
  for (const SessionRun& run : result.sessions) {
    const std::string stem = artifact_stem(run.session_id);
    if (run.store) save_store(*run.store, out_dir / (stem + ".store.json"));
    if (options.emit_alignment && !run.alignment.empty()) {
      write_json(out_dir / (stem + ".alignment.json"), json(run.alignment));
    }
    if (options.emit_verification && run.verification) {
      write_json(out_dir / (stem + ".verification.json"), json(*run.verification));
    }
  }
  write_json(out_dir / "summary.json", json(result.summary));
  if (result.eval) write_json(out_dir / "eval_report.json", json(*result.eval));
}

}  // namespace memloop
