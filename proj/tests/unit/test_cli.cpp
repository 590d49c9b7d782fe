#include "memloop/dialogue.hpp"
#include "memloop/memory_store.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

namespace ts = memloop::test_support;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Outcome cli(const std::vector<std::string>& args, const std::string& tag) {
  const fs::path dir = ts::scratch_dir("cli-io-" + tag);
  std::string cmd = quote(MEMLOOP_CLI);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote((dir / "out").string()) + " 2>" + quote((dir / "err").string());
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(dir / "out");
  o.err = slurp(dir / "err");
  return o;
}

std::string corpus(const std::string& name) { return (ts::corpus_dir() / name).string(); }

}  // namespace

TEST(Cli, RunWithGoldPrintsTableAndSummary) {
  const fs::path out = ts::scratch_dir("cli-run");
  const Outcome o = cli({"--config", corpus("config.json"), "-q", "run", "--in", corpus("sessions.jsonl"), "--gold",
                         corpus("gold.jsonl"), "--out", out.string(), "--emit-alignment"},
                        "run");
  ASSERT_EQ(o.exit_code, 0) << o.err;
  EXPECT_NE(o.out.find("sessions ok 3/3; chat calls 102,"), std::string::npos) << o.out;
  EXPECT_TRUE(o.err.empty()) << o.err;
  EXPECT_TRUE(fs::exists(out / "ana-2025.store.json"));
  EXPECT_TRUE(fs::exists(out / "ana-2025.alignment.json"));
  EXPECT_FALSE(fs::exists(out / "ana-2025.verification.json"));
  const auto report = nlohmann::json::parse(slurp(out / "eval_report.json"));
  EXPECT_DOUBLE_EQ(report.at("memory_integrity").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(report.at("memory_accuracy").get<double>(), 1.0);
}

TEST(Cli, StopAfterExtractionWritesInitialEntries) {
  const fs::path out = ts::scratch_dir("cli-stop");
  const Outcome o = cli({"--config", corpus("config.json"), "--stop-after", "extraction", "run", "--in",
                         corpus("sessions.jsonl"), "--out", out.string()},
                        "stop");
  ASSERT_EQ(o.exit_code, 0) << o.err;
  EXPECT_NE(o.out.find("chat calls 3, embedding calls 0"), std::string::npos) << o.out;
  for (const char* id : {"ana-2025", "ben-2025", "chloe-2025"}) {
    const memloop::MemoryStore store = memloop::load_store(out / (std::string(id) + ".store.json"));
    ASSERT_FALSE(store.entries.empty());
    for (const auto& e : store.entries) EXPECT_EQ(e.status, memloop::EntryStatus::initial);
  }
}

TEST(Cli, ExtractSubcommandMatchesStopAfterExtraction) {
  const fs::path a = ts::scratch_dir("cli-extract");
  const fs::path b = ts::scratch_dir("cli-extract-ref");
  ASSERT_EQ(cli({"--config", corpus("config.json"), "extract", "--in", corpus("sessions.jsonl"), "--out", a.string()},
                "extract")
                .exit_code,
            0);
  ASSERT_EQ(cli({"--config", corpus("config.json"), "--stop-after", "extraction", "run", "--in",
                 corpus("sessions.jsonl"), "--out", b.string()},
                "extract-ref")
                .exit_code,
            0);
  EXPECT_EQ(slurp(a / "ben-2025.store.json"), slurp(b / "ben-2025.store.json"));
}

TEST(Cli, QaAnswersFromAStore) {
  const fs::path out = ts::scratch_dir("cli-qa-run");
  ASSERT_EQ(cli({"--config", corpus("config.json"), "run", "--in", corpus("sessions.jsonl"), "--out", out.string()},
                "qa-run")
                .exit_code,
            0);
  const auto gold = memloop::load_gold_file(corpus("gold.jsonl"));
  const auto& item = gold.at(0).qa_items.at(0);
  const Outcome o = cli({"--config", corpus("config.json"), "qa", "--store", (out / "ana-2025.store.json").string(),
                         "--question", item.question},
                        "qa");
  ASSERT_EQ(o.exit_code, 0) << o.err;
  EXPECT_TRUE(memloop::containment_judge(o.out, item.gold_answer)) << o.out;
}

TEST(Cli, EvalScoresStoredRuns) {
  const fs::path out = ts::scratch_dir("cli-eval-run");
  ASSERT_EQ(cli({"--config", corpus("config.json"), "run", "--in", corpus("sessions.jsonl"), "--out", out.string()},
                "eval-run")
                .exit_code,
            0);
  const fs::path report = ts::scratch_dir("cli-eval") / "report.json";
  const Outcome o = cli({"--config", corpus("config.json"), "eval", "--gold", corpus("gold.jsonl"), "--stores",
                         out.string(), "--out", report.string()},
                        "eval");
  ASSERT_EQ(o.exit_code, 0) << o.err;
  const auto j = nlohmann::json::parse(slurp(report));
  EXPECT_DOUBLE_EQ(j.at("memory_integrity").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j.at("qa_accuracy").get<double>(), 1.0);
  EXPECT_EQ(j.at("sessions").size(), 3u);
}

TEST(Cli, CompressReproducesTheCompressedCorpus) {
  const fs::path out = ts::scratch_dir("cli-compress") / "s.jsonl";
  const Outcome o =
      cli({"compress", "--ratio", "0.2", "--seed", "7", "--in", corpus("sessions.jsonl"), "--out", out.string()},
          "compress");
  ASSERT_EQ(o.exit_code, 0) << o.err;
  EXPECT_EQ(slurp(out), slurp(ts::compressed_dir() / "sessions.jsonl"));
}

TEST(Cli, CompressRejectsBadRatio) {
  const fs::path out = ts::scratch_dir("cli-compress-bad") / "s.jsonl";
  for (const char* ratio : {"0", "1.5", "-0.1"}) {
    EXPECT_EQ(
        cli({"compress", "--ratio", ratio, "--seed", "1", "--in", corpus("sessions.jsonl"), "--out", out.string()},
            "compress-bad")
            .exit_code,
        2)
        << ratio;
  }
}

TEST(Cli, UsageAndConfigErrorsExitWithTwo) {
  const fs::path out = ts::scratch_dir("cli-usage");
  EXPECT_EQ(cli({}, "none").exit_code, 2);
  EXPECT_EQ(cli({"frobnicate"}, "unknown-sub").exit_code, 2);
  EXPECT_EQ(cli({"run", "--in", corpus("sessions.jsonl")}, "no-out").exit_code, 2);
  EXPECT_EQ(cli({"--mode", "offline", "run", "--in", corpus("sessions.jsonl"), "--out", out.string()}, "mode")
                .exit_code,
            2);
  const Outcome missing = cli({"--config", (out / "absent.json").string(), "run", "--in", corpus("sessions.jsonl"),
                               "--out", out.string()},
                              "missing-config");
  EXPECT_EQ(missing.exit_code, 2);
  EXPECT_NE(missing.err.find("configuration error"), std::string::npos) << missing.err;
  EXPECT_EQ(cli({"--config", corpus("config.json"), "--stop-after", "storage", "run", "--in",
                 corpus("sessions.jsonl"), "--out", out.string()},
                "bad-stage")
                .exit_code,
            2);
  // Fixture mode without chat files.
  EXPECT_EQ(cli({"--mode", "fixture", "run", "--in", corpus("sessions.jsonl"), "--out", out.string()}, "no-chat")
                .exit_code,
            2);
}

TEST(Cli, HelpExitsZero) {
  const Outcome o = cli({"--help"}, "help");
  EXPECT_EQ(o.exit_code, 0);
  EXPECT_NE(o.out.find("compress"), std::string::npos);
}

TEST(Cli, FixtureMissFailsTheSessionAndExitsOne) {
  const fs::path dir = ts::scratch_dir("cli-miss");
  const auto session = ts::make_session("stranger", {{memloop::Speaker::user, "I collect antique typewriters."}});
  memloop::write_session_file(dir / "s.jsonl", std::vector<memloop::DialogueSession>{session});
  const Outcome o =
      cli({"--config", corpus("config.json"), "run", "--in", (dir / "s.jsonl").string(), "--out", (dir / "o").string()},
          "miss");
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_NE(o.err.find("session stranger failed"), std::string::npos) << o.err;
  EXPECT_NE(o.out.find("sessions ok 0/1"), std::string::npos) << o.out;
  EXPECT_TRUE(fs::exists(dir / "o" / "summary.json"));
}

TEST(Cli, RecordFixturesCanBeReplayed) {
  const fs::path dir = ts::scratch_dir("cli-record");
  ASSERT_EQ(cli({"--config", corpus("config.json"), "run", "--in", corpus("sessions.jsonl"), "--out",
                 (dir / "a").string(), "--record-fixtures", (dir / "chat.jsonl").string()},
                "record")
                .exit_code,
            0);
  std::ofstream(dir / "config.json") << R"({"mode":"fixture","fixtures":{"chat":"chat.jsonl"},)"
                                     << R"("fixed_time":"2025-06-01T00:00:00Z"})";
  ASSERT_EQ(cli({"--config", (dir / "config.json").string(), "run", "--in", corpus("sessions.jsonl"), "--out",
                 (dir / "b").string()},
                "replay")
                .exit_code,
            0);
  EXPECT_EQ(slurp(dir / "a" / "chloe-2025.store.json"), slurp(dir / "b" / "chloe-2025.store.json"));
}
