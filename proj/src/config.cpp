#include "memloop/config.hpp"

#include "memloop/error.hpp"
#include "memloop/fixture_backend.hpp"
#include "memloop/http_backend.hpp"
#include "memloop/text.hpp"

#include <nlohmann/json.hpp>

#include <type_traits>

#include <fstream>
#include <initializer_list>

namespace memloop {

using nlohmann::json;

RunMode parse_run_mode(std::string_view name) {
  if (name == "live") return RunMode::live;
  if (name == "fixture") return RunMode::fixture;
  throw ConfigError("mode must be 'live' or 'fixture', got '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  backend.validate();
  completion.validate();
  verification.validate();
  evaluation.validate();
  if (retrieval_k == 0) throw ConfigError("retrieval_k must be positive");
  if (window_turns == 0) throw ConfigError("window_turns must be positive");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (fixed_time && !looks_like_iso8601(*fixed_time)) throw ConfigError("fixed_time is not ISO-8601");
  if (mode == RunMode::fixture) {
    if (fixtures.chat_files.empty()) throw ConfigError("fixture mode requires fixtures.chat");
    if (fixtures.embedding_kind == FixtureEmbeddingKind::recorded && !fixtures.embedding_file) {
      throw ConfigError("recorded fixture embeddings require fixtures.embedding.path");
    }
    if (fixtures.embedding_kind == FixtureEmbeddingKind::hashed && fixtures.embedding_dimension == 0) {
      throw ConfigError("fixtures.embedding.dimension must be positive");
    }
  }
}

std::string PipelineConfig::run_time() const {
  if (fixed_time) return *fixed_time;
  return mode == RunMode::fixture ? kFixtureEpoch : utc_now_iso8601();
}

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

const json& section(const json& j, const char* key) {
  static const json kEmpty = json::object();
  auto it = j.find(key);
  if (it == j.end()) return kEmpty;
  if (!it->is_object()) throw ConfigError(std::string("config key '") + key + "' must be an object");
  return *it;
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  bool typed = true;
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    typed = it->is_number_integer() && (!std::is_unsigned_v<T> || it->get<long long>() >= 0);
  }
  if (!typed) throw ConfigError("config key '" + where + key + "' has the wrong type");
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

PipelineConfig parse_pipeline_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, "", {"mode", "backend", "fixtures", "completion", "verification", "evaluation", "retrieval_k",
                         "window_turns", "workers", "fixed_time", "prompt_dir"});
  PipelineConfig config;

  std::string mode = "live";
  read(j, "mode", mode, "");
  config.mode = parse_run_mode(mode);

  const json& backend = section(j, "backend");
  reject_unknown(backend, "backend.", {"chat_endpoint", "embed_endpoint", "api_key_env_var", "chat_model_name",
                                       "embed_model_name", "request_timeout", "max_retries", "retry_base_delay_ms",
                                       "max_in_flight"});
  read(backend, "chat_endpoint", config.backend.chat_endpoint, "backend.");
  read(backend, "embed_endpoint", config.backend.embed_endpoint, "backend.");
  read(backend, "api_key_env_var", config.backend.api_key_env_var, "backend.");
  read(backend, "chat_model_name", config.backend.chat_model_name, "backend.");
  read(backend, "embed_model_name", config.backend.embed_model_name, "backend.");
  read(backend, "request_timeout", config.backend.request_timeout_seconds, "backend.");
  read(backend, "max_retries", config.backend.max_retries, "backend.");
  read(backend, "retry_base_delay_ms", config.backend.retry_base_delay_ms, "backend.");
  read(backend, "max_in_flight", config.backend.max_in_flight, "backend.");

  const json& fixtures = section(j, "fixtures");
  reject_unknown(fixtures, "fixtures.", {"chat", "embedding"});
  if (auto chat = fixtures.find("chat"); chat != fixtures.end()) {
    std::vector<std::string> files;
    if (chat->is_string()) {
      files.push_back(chat->get<std::string>());
    } else {
      read(fixtures, "chat", files, "fixtures.");
    }
    for (const std::string& f : files) config.fixtures.chat_files.push_back(resolve(base_dir, f));
  }
  const json& embedding = section(fixtures, "embedding");
  reject_unknown(embedding, "fixtures.embedding.", {"kind", "dimension", "path"});
  std::string kind = "hashed";
  read(embedding, "kind", kind, "fixtures.embedding.");
  if (kind == "hashed") {
    config.fixtures.embedding_kind = FixtureEmbeddingKind::hashed;
  } else if (kind == "recorded") {
    config.fixtures.embedding_kind = FixtureEmbeddingKind::recorded;
  } else {
    throw ConfigError("fixtures.embedding.kind must be 'hashed' or 'recorded'");
  }
  read(embedding, "dimension", config.fixtures.embedding_dimension, "fixtures.embedding.");
  if (embedding.contains("path")) {
    std::string p;
    read(embedding, "path", p, "fixtures.embedding.");
    config.fixtures.embedding_file = resolve(base_dir, p);
  }

  const json& completion = section(j, "completion");
  reject_unknown(completion, "completion.", {"tau_match", "rounds"});
  read(completion, "tau_match", config.completion.tau_match, "completion.");
  read(completion, "rounds", config.completion.rounds, "completion.");

  const json& verification = section(j, "verification");
  reject_unknown(verification, "verification.", {"tau_sim", "passes"});
  read(verification, "tau_sim", config.verification.tau_sim, "verification.");
  read(verification, "passes", config.verification.passes, "verification.");

  const json& evaluation = section(j, "evaluation");
  reject_unknown(evaluation, "evaluation.", {"tau_eval", "matcher", "qa_judge", "run_qa"});
  read(evaluation, "tau_eval", config.evaluation.tau_eval, "evaluation.");
  read(evaluation, "run_qa", config.evaluation.run_qa, "evaluation.");
  std::string matcher = "embedding";
  read(evaluation, "matcher", matcher, "evaluation.");
  if (matcher == "embedding") {
    config.evaluation.matcher = MatcherKind::embedding;
  } else if (matcher == "judge") {
    config.evaluation.matcher = MatcherKind::judge;
  } else {
    throw ConfigError("evaluation.matcher must be 'embedding' or 'judge'");
  }
  std::string qa_judge = "containment";
  read(evaluation, "qa_judge", qa_judge, "evaluation.");
  if (qa_judge == "containment") {
    config.evaluation.qa_judge = QaJudgeKind::containment;
  } else if (qa_judge == "llm") {
    config.evaluation.qa_judge = QaJudgeKind::llm;
  } else {
    throw ConfigError("evaluation.qa_judge must be 'containment' or 'llm'");
  }

  read(j, "retrieval_k", config.retrieval_k, "");
  read(j, "window_turns", config.window_turns, "");
  read(j, "workers", config.workers, "");
  if (j.contains("fixed_time")) {
    std::string t;
    read(j, "fixed_time", t, "");
    config.fixed_time = t;
  }
  if (j.contains("prompt_dir")) {
    std::string p;
    read(j, "prompt_dir", p, "");
    config.prompt_dir = resolve(base_dir, p);
  }
  config.evaluation.retrieval_k = config.retrieval_k;

  config.validate();
  return config;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return parse_pipeline_config(j, path.parent_path());
}

Backends make_backends(const PipelineConfig& config) {
  if (config.mode == RunMode::live) {
    return {std::make_shared<HttpChatBackend>(config.backend), std::make_shared<HttpEmbeddingBackend>(config.backend)};
  }
  Backends backends;
  backends.chat = std::make_shared<FixtureChatBackend>(FixtureChatBackend::from_files(config.fixtures.chat_files));
  if (config.fixtures.embedding_kind == FixtureEmbeddingKind::hashed) {
    backends.embedder = std::make_shared<HashedEmbeddingBackend>(config.fixtures.embedding_dimension);
  } else {
    backends.embedder =
        std::make_shared<RecordedEmbeddingBackend>(RecordedEmbeddingBackend::from_file(*config.fixtures.embedding_file));
  }
  return backends;
}

}  // namespace memloop
