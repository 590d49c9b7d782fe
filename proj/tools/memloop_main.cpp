// memloop: command-line driver for the memory construction pipeline.
//
// Exit codes: 0 success, 1 pipeline error, 2 usage or configuration error.

#include "memloop/compressor.hpp"
#include "memloop/config.hpp"
#include "memloop/context.hpp"
#include "memloop/error.hpp"
#include "memloop/fixture_backend.hpp"
#include "memloop/memory_store.hpp"
#include "memloop/pipeline.hpp"
#include "memloop/similarity.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>

using namespace memloop;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kPipelineError = 1;
constexpr int kUsageError = 2;

struct GlobalOptions {
  std::optional<fs::path> config_path;
  std::optional<std::string> mode;
  bool emit_alignment = false;
  bool emit_verification = false;
  std::optional<std::string> stop_after;
  bool no_completion = false;
  bool no_verification = false;
  std::optional<int> workers;
  bool quiet = false;
};

PipelineConfig resolve_config(const GlobalOptions& g) {
  PipelineConfig config = g.config_path ? load_pipeline_config(*g.config_path) : PipelineConfig{};
  if (g.mode) config.mode = parse_run_mode(*g.mode);
  if (g.workers) config.workers = *g.workers;
  config.validate();
  return config;
}

StageGates resolve_gates(const GlobalOptions& g) {
  StageGates gates;
  gates.completion = !g.no_completion;
  gates.verification = !g.no_verification;
  if (g.stop_after) {
    try {
      gates.stop_after = parse_stage(*g.stop_after);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  return gates;
}

void log(const GlobalOptions& g, const std::string& line) {
  if (!g.quiet) std::cerr << "memloop: " << line << "\n";
}

std::string describe(const GatewayStats& s) {
  return "chat calls " + std::to_string(s.chat_calls) + ", embedding calls " + std::to_string(s.embed_calls) +
         ", payload chars " + std::to_string(s.chat_payload_chars + s.embed_payload_chars) + ", reported tokens " +
         std::to_string(s.reported_tokens);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

int run_pipeline(const GlobalOptions& g, StageGates gates, const fs::path& sessions_path,
                 const std::optional<fs::path>& gold_path, const fs::path& out_dir,
                 const std::optional<fs::path>& record_path) {
  const PipelineConfig config = resolve_config(g);
  const PromptSet prompts = PromptSet::load(config.prompt_dir);
  const auto sessions = parse_session_file(sessions_path);
  std::optional<std::vector<GoldAnnotation>> gold;
  if (gold_path) gold = load_gold_file(*gold_path);

  Backends backends = make_backends(config);
  std::shared_ptr<RecordingChatBackend> recorder;
  if (record_path) {
    recorder = std::make_shared<RecordingChatBackend>(backends.chat);
    backends.chat = recorder;
  }
  Gateway gateway(backends.chat, backends.embedder);
  const Pipeline pipeline(config, gateway, prompts, gates);

  log(g, "processing " + std::to_string(sessions.size()) + " session(s)");
  const RunResult result = pipeline.run(sessions, gold);
  write_run_artifacts(result, out_dir, {g.emit_alignment, g.emit_verification});
  if (recorder) recorder->write(*record_path);

  for (const SessionRun& run : result.sessions) {
    if (run.error) {
      std::cerr << "memloop: session " << run.session_id << " failed: " << *run.error << "\n";
    } else {
      log(g, "session " + run.session_id + ": " + std::to_string(run.store->entries.size()) + " entries");
    }
  }
  if (result.eval) std::cout << format_table(*result.eval);
  std::cout << "sessions ok " << result.summary.sessions_ok << "/" << result.summary.sessions_total << "; "
            << describe(result.summary.stats) << "\n";
  return result.ok() ? kOk : kPipelineError;
}

int run_qa(const GlobalOptions& g, const fs::path& store_path, const std::string& question,
           std::optional<std::size_t> k) {
  const PipelineConfig config = resolve_config(g);
  const PromptSet prompts = PromptSet::load(config.prompt_dir);
  const MemoryStore store = load_store(store_path);
  const Backends backends = make_backends(config);
  Gateway gateway(backends.chat, backends.embedder);
  EmbeddingCache cache(gateway);
  StageContext ctx{gateway, prompts, cache, config.run_time()};
  std::cout << answer_question(store, question, k.value_or(config.retrieval_k), ctx) << "\n";
  return kOk;
}

int run_eval(const GlobalOptions& g, const fs::path& gold_path, const fs::path& stores_dir,
             const std::optional<fs::path>& report_path) {
  const PipelineConfig config = resolve_config(g);
  const PromptSet prompts = PromptSet::load(config.prompt_dir);
  const auto gold = load_gold_file(gold_path);

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(stores_dir)) {
    if (entry.is_regular_file() && entry.path().filename().string().ends_with(".store.json")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<MemoryStore> stores;
  for (const fs::path& f : files) stores.push_back(load_store(f));
  log(g, "loaded " + std::to_string(stores.size()) + " store(s)");

  const Backends backends = make_backends(config);
  Gateway gateway(backends.chat, backends.embedder);
  const EvalReport report = Pipeline(config, gateway, prompts).evaluate(gold, stores);
  std::cout << format_table(report);
  if (report_path) write_json(*report_path, report);
  return kOk;
}

int run_compress(double ratio, std::uint64_t seed, const fs::path& in, const fs::path& out) {
  const CompressionConfig config{ratio, seed};
  try {
    config.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  auto sessions = parse_session_file(in);
  for (auto& s : sessions) s = compress_session(s, config);
  write_session_file(out, sessions);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build long-term conversational memory: extract, complete, verify, store, evaluate"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "pipeline config (JSON)");
  app.add_option("--mode", g.mode, "live or fixture; overrides the config")->check(CLI::IsMember({"live", "fixture"}));
  app.add_flag("--emit-alignment", g.emit_alignment, "write per-session alignment reports");
  app.add_flag("--emit-verification", g.emit_verification, "write per-session verification reports");
  app.add_option("--stop-after", g.stop_after, "extraction, completion or verification");
  app.add_flag("--no-completion", g.no_completion, "skip the completion stage");
  app.add_flag("--no-verification", g.no_verification, "skip the verification stage");
  app.add_option("--workers", g.workers, "sessions processed concurrently")->check(CLI::PositiveNumber);
  app.add_flag("-q,--quiet", g.quiet, "no progress lines on stderr");

  fs::path sessions_path;
  fs::path out_dir;
  std::optional<fs::path> gold_path;
  std::optional<fs::path> record_path;

  auto* run = app.add_subcommand("run", "full pipeline over a sessions file");
  run->add_option("--in,--sessions", sessions_path, "dialogue sessions (JSONL)")->required()->check(CLI::ExistingFile);
  run->add_option("--gold", gold_path, "gold annotations (JSONL); enables evaluation")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "artifact directory")->required();
  run->add_option("--record-fixtures", record_path, "save every chat exchange as replayable JSONL");

  auto* extract = app.add_subcommand("extract", "initial extraction only");
  extract->add_option("--in,--sessions", sessions_path, "dialogue sessions (JSONL)")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", out_dir, "artifact directory")->required();

  fs::path store_path;
  std::string question;
  std::optional<std::size_t> k;
  auto* qa = app.add_subcommand("qa", "answer a question from a memory store");
  qa->add_option("--store", store_path, "memory store file")->required()->check(CLI::ExistingFile);
  qa->add_option("--question", question, "question to answer")->required();
  qa->add_option("--k", k, "memories to retrieve")->check(CLI::PositiveNumber);

  fs::path stores_dir;
  std::optional<fs::path> report_path;
  auto* eval = app.add_subcommand("eval", "score stores against gold annotations");
  eval->add_option("--gold", gold_path, "gold annotations (JSONL)")->required()->check(CLI::ExistingFile);
  eval->add_option("--stores", stores_dir, "directory of *.store.json files")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", report_path, "write the EvalReport JSON here");

  double ratio = 1.0;
  std::uint64_t seed = 0;
  fs::path compress_out;
  auto* compress = app.add_subcommand("compress", "drop tokens at random to shrink the input");
  compress->add_option("--ratio", ratio, "fraction of tokens kept, in (0, 1]")->required();
  compress->add_option("--seed", seed, "generator seed")->required();
  compress->add_option("--in", sessions_path, "dialogue sessions (JSONL)")->required()->check(CLI::ExistingFile);
  compress->add_option("--out", compress_out, "compressed sessions (JSONL)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*run) return run_pipeline(g, resolve_gates(g), sessions_path, gold_path, out_dir, record_path);
    if (*extract) {
      StageGates gates = resolve_gates(g);
      gates.stop_after = Stage::extraction;
      return run_pipeline(g, gates, sessions_path, std::nullopt, out_dir, std::nullopt);
    }
    if (*qa) return run_qa(g, store_path, question, k);
    if (*eval) return run_eval(g, *gold_path, stores_dir, report_path);
    if (*compress) return run_compress(ratio, seed, sessions_path, compress_out);
  } catch (const ConfigError& e) {
    std::cerr << "memloop: configuration error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "memloop: " << e.what() << "\n";
    return kPipelineError;
  }
  return kUsageError;
}
