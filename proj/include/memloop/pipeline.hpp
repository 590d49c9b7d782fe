#pragma once

#include "memloop/completion.hpp"
#include "memloop/config.hpp"
#include "memloop/dialogue.hpp"
#include "memloop/evaluation.hpp"
#include "memloop/memory_store.hpp"
#include "memloop/prompts.hpp"
#include "memloop/verification.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memloop {

enum class Stage { extraction, completion, verification };

Stage parse_stage(std::string_view name);

/// Stage gating. Gates remove stages; they never reorder them.
struct StageGates {
  bool completion = true;
  bool verification = true;
  std::optional<Stage> stop_after;
};

struct SessionRun {
  std::string session_id;
  std::optional<MemoryStore> store;  // absent when the session failed
  std::vector<AlignmentReport> alignment;
  std::optional<VerificationReport> verification;
  std::optional<std::string> error;
  std::size_t initial_entries = 0;
  std::size_t recovered_entries = 0;
  std::size_t candidate_entries = 0;
};

struct RunSummary {
  std::size_t sessions_total = 0;
  std::size_t sessions_ok = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // session id, message
  GatewayStats stats;
};

struct RunResult {
  std::vector<SessionRun> sessions;  // input order
  std::optional<EvalReport> eval;
  RunSummary summary;

  bool ok() const { return summary.failures.empty(); }
};

/// Drives extraction -> completion -> verification -> store for each session,
/// optionally followed by evaluation. Sessions are independent and run on
/// config.workers threads; results keep input order.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, Gateway& gateway, PromptSet prompts, StageGates gates = {});

  SessionRun run_session(const DialogueSession& session) const;

  /// Runs every session, then evaluates against `gold` when given.
  RunResult run(const std::vector<DialogueSession>& sessions,
                const std::optional<std::vector<GoldAnnotation>>& gold = std::nullopt) const;

  EvalReport evaluate(const std::vector<GoldAnnotation>& gold, const std::vector<MemoryStore>& stores) const;

  const PipelineConfig& config() const noexcept { return config_; }

 private:
  PipelineConfig config_;
  Gateway& gateway_;
  PromptSet prompts_;
  StageGates gates_;
};

/// File-system safe form of a session id.
std::string artifact_stem(const std::string& session_id);

void to_json(nlohmann::json& j, const RunSummary& summary);

struct ArtifactOptions {
  bool emit_alignment = false;
  bool emit_verification = false;
};

/// Writes <stem>.store.json per successful session, summary.json, and
/// eval_report.json when evaluation ran; optionally the alignment and
/// verification reports.
void write_run_artifacts(const RunResult& result, const std::filesystem::path& out_dir, const ArtifactOptions& options);

}  // namespace memloop
