#pragma once

#include "memloop/backend.hpp"
#include "memloop/completion.hpp"
#include "memloop/evaluation.hpp"
#include "memloop/verification.hpp"

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace memloop {

enum class RunMode { live, fixture };

RunMode parse_run_mode(std::string_view name);

enum class FixtureEmbeddingKind { hashed, recorded };

struct FixtureConfig {
  std::vector<std::filesystem::path> chat_files;
  FixtureEmbeddingKind embedding_kind = FixtureEmbeddingKind::hashed;
  std::size_t embedding_dimension = 1024;
  std::optional<std::filesystem::path> embedding_file;
};

/// Clock used in fixture mode when no fixed_time is configured.
inline constexpr const char* kFixtureEpoch = "1970-01-01T00:00:00Z";

struct PipelineConfig {
  RunMode mode = RunMode::live;
  BackendConfig backend;
  FixtureConfig fixtures;
  CompletionConfig completion;
  VerificationConfig verification;
  EvalConfig evaluation;
  std::size_t retrieval_k = 20;
  std::size_t window_turns = 50;
  int workers = 1;
  std::optional<std::string> fixed_time;
  std::optional<std::filesystem::path> prompt_dir;

  void validate() const;

  /// fixed_time if set; the fixture epoch in fixture mode; wall-clock UTC otherwise.
  std::string run_time() const;
};

/// Builds a config from JSON. Relative paths resolve against `base_dir`.
/// Unknown keys and ill-typed values raise ConfigError.
PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Reads a JSON config file; a missing file is a ConfigError.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct Backends {
  std::shared_ptr<ChatBackend> chat;
  std::shared_ptr<EmbeddingBackend> embedder;
};

/// Live HTTP clients or fixture replays, per config.mode.
Backends make_backends(const PipelineConfig& config);

}  // namespace memloop
