#include "memloop/dialogue.hpp"
#include "memloop/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace memloop;
namespace ts = memloop::test_support;

namespace {

std::vector<DialogueSession> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_sessions(in, "mem.jsonl");
}

std::string line(const std::string& sid, int index, const std::string& speaker, const std::string& text) {
  return R"({"session_id":")" + sid + R"(","turn_index":)" + std::to_string(index) + R"(,"speaker":")" + speaker +
         R"(","text":")" + text + "\"}\n";
}

}  // namespace

TEST(ParseSessions, TwoLinesOfOneSession) {
  const auto sessions = parse(line("s1", 0, "user", "hi") + line("s1", 1, "assistant", "hello"));
  ASSERT_EQ(sessions.size(), 1u);
  EXPECT_EQ(sessions[0].session_id, "s1");
  ASSERT_EQ(sessions[0].turns.size(), 2u);
  EXPECT_EQ(sessions[0].turns[1].speaker, Speaker::assistant);
  EXPECT_EQ(sessions[0].turns[1].text, "hello");
}

TEST(ParseSessions, EmptyInputGivesNoSessions) {
  EXPECT_TRUE(parse("").empty());
  EXPECT_TRUE(parse("\n\n   \n").empty());
}

TEST(ParseSessions, TurnsAreSortedByIndex) {
  const auto sessions = parse(line("s1", 1, "assistant", "second") + line("s1", 0, "user", "first"));
  ASSERT_EQ(sessions[0].turns.size(), 2u);
  EXPECT_EQ(sessions[0].turns[0].turn_index, 0u);
  EXPECT_EQ(sessions[0].turns[0].text, "first");
  EXPECT_EQ(sessions[0].turns[1].text, "second");
}

TEST(ParseSessions, SessionsKeepFirstAppearanceOrder) {
  const auto sessions = parse(line("b", 0, "user", "x") + line("a", 0, "user", "y") + line("b", 1, "user", "z"));
  ASSERT_EQ(sessions.size(), 2u);
  EXPECT_EQ(sessions[0].session_id, "b");
  EXPECT_EQ(sessions[0].turns.size(), 2u);
  EXPECT_EQ(sessions[1].session_id, "a");
}

TEST(ParseSessions, MalformedJsonReportsLine) {
  try {
    parse(line("s1", 0, "user", "ok") + "{not json\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("mem.jsonl"), std::string::npos);
  }
}

TEST(ParseSessions, FieldErrorsAreValidationErrors) {
  EXPECT_THROW(parse(R"({"session_id":"s","turn_index":0,"speaker":"user"})" "\n"), ValidationError);
  EXPECT_THROW(parse(line("s", 0, "robot", "x")), ValidationError);
  EXPECT_THROW(parse(line("s", 0, "user", "   ")), ValidationError);
  EXPECT_THROW(parse(R"({"session_id":"s","turn_index":-1,"speaker":"user","text":"x"})" "\n"), ValidationError);
  EXPECT_THROW(parse(R"({"session_id":"s","turn_index":0,"speaker":"user","text":"x","timestamp":"yesterday"})" "\n"),
               ValidationError);
}

TEST(ParseSessions, DuplicateTurnIndexNamesTheLine) {
  try {
    parse(line("s", 0, "user", "a") + line("s", 0, "user", "b"));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("mem.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(ParseSessions, GapInTurnIndicesIsRejected) {
  EXPECT_THROW(parse(line("s", 0, "user", "a") + line("s", 2, "user", "b")), ValidationError);
}

TEST(TurnText, FormatsSpeakerAndTrims) {
  EXPECT_EQ(turn_text_for_embedding({0, Speaker::user, "I like apples", std::nullopt}), "user: I like apples");
  EXPECT_EQ(turn_text_for_embedding({0, Speaker::assistant, "Noted.", std::nullopt}), "assistant: Noted.");
  EXPECT_EQ(turn_text_for_embedding({0, Speaker::user, "  padded \t", std::nullopt}), "user: padded");
}

TEST(RenderTurns, OneLinePerTurn) {
  const auto s = ts::make_session("s", {{Speaker::user, "a\nb"}, {Speaker::assistant, "c"}});
  EXPECT_EQ(render_turns(s.turns), "[0] user: a b\n[1] assistant: c\n");
}

TEST(LatestTimestamp, PicksMaximumOfListedTurns) {
  const auto s = ts::make_session("s", {{Speaker::user, "a"}, {Speaker::user, "b"}, {Speaker::user, "c"}});
  const std::vector<std::size_t> idx = {2, 0};
  EXPECT_EQ(s.latest_timestamp(idx), "2025-02-01T10:02:00Z");
  const std::vector<std::size_t> none;
  EXPECT_FALSE(s.latest_timestamp(none).has_value());
}

TEST(Corpus, ParsesEveryLine) {
  const auto path = ts::corpus_dir() / "sessions.jsonl";
  std::ifstream in(path);
  std::size_t lines = 0;
  for (std::string l; std::getline(in, l);) lines += !l.empty();
  const auto sessions = parse_session_file(path);
  std::size_t turns = 0;
  for (const auto& s : sessions) turns += s.turns.size();
  EXPECT_EQ(turns, lines);
  EXPECT_GE(sessions.size(), 3u);
}

TEST(Corpus, SerializeParseRoundTrip) {
  const auto path = ts::corpus_dir() / "sessions.jsonl";
  const auto sessions = parse_session_file(path);
  std::ostringstream out;
  write_sessions(out, sessions);
  std::ifstream raw(path, std::ios::binary);
  std::stringstream original;
  original << raw.rdbuf();
  EXPECT_EQ(out.str(), original.str());
  std::istringstream again(out.str());
  EXPECT_EQ(parse_sessions(again), sessions);
}

TEST(RoundTrip, ShuffledInputSerializesCanonically) {
  const std::string shuffled = line("s", 2, "user", "c") + line("s", 0, "user", "a") + line("s", 1, "assistant", "b");
  std::ostringstream out;
  write_sessions(out, parse(shuffled));
  EXPECT_EQ(parse(out.str()), parse(shuffled));
  EXPECT_LT(out.str().find("\"a\""), out.str().find("\"c\""));
}
