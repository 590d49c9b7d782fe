#include "memloop/compressor.hpp"
#include "memloop/error.hpp"
#include "memloop/text.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace memloop;
namespace ts = memloop::test_support;

namespace {

bool is_subsequence(const std::vector<std::string>& kept, const std::vector<std::string>& original) {
  std::size_t j = 0;
  for (const auto& tok : original) {
    if (j < kept.size() && kept[j] == tok) ++j;
  }
  return j == kept.size();
}

DialogueSession hundred_tokens() {
  std::string text;
  for (int i = 0; i < 100; ++i) text += "w" + std::to_string(i) + " ";
  return ts::make_session("long", {{Speaker::user, text}});
}

}  // namespace

TEST(Compress, RatioOneIsIdentity) {
  const auto sessions = parse_session_file(ts::corpus_dir() / "sessions.jsonl");
  for (const auto& s : sessions) EXPECT_EQ(compress_session(s, {1.0, 3}), s);
}

TEST(Compress, SingleTokenTurnSurvives) {
  const auto s = ts::make_session("s", {{Speaker::user, "hello"}, {Speaker::assistant, "  ok  "}});
  for (double ratio : {0.01, 0.2, 0.5}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto c = compress_session(s, {ratio, seed});
      EXPECT_EQ(c.turns[0].text, "hello");
      EXPECT_EQ(c.turns[1].text, "ok");
    }
  }
}

TEST(Compress, HundredTokensAtTwentyPercent) {
  const auto s = hundred_tokens();
  const auto once = compress_session(s, {0.2, 7});
  const auto kept = split_whitespace(once.turns[0].text).size();
  EXPECT_GE(kept, 10u);
  EXPECT_LE(kept, 30u);
  EXPECT_EQ(compress_session(s, {0.2, 7}), once);
}

TEST(Compress, KeptTokensAreAnOrderedSubsequence) {
  const auto sessions = parse_session_file(ts::corpus_dir() / "sessions.jsonl");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const auto& s : sessions) {
      const auto c = compress_session(s, {0.5, seed});
      ASSERT_EQ(c.turns.size(), s.turns.size());
      for (std::size_t i = 0; i < s.turns.size(); ++i) {
        const auto kept = split_whitespace(c.turns[i].text);
        EXPECT_FALSE(kept.empty());
        EXPECT_TRUE(is_subsequence(kept, split_whitespace(s.turns[i].text)));
        EXPECT_EQ(c.turns[i].speaker, s.turns[i].speaker);
        EXPECT_EQ(c.turns[i].timestamp, s.turns[i].timestamp);
        EXPECT_EQ(c.turns[i].turn_index, s.turns[i].turn_index);
        EXPECT_EQ(c.turns[i].text, collapse_whitespace(c.turns[i].text));
      }
    }
  }
}

TEST(Compress, DistinctSeedsGiveDistinctOutputs) {
  const auto s = hundred_tokens();
  EXPECT_NE(compress_session(s, {0.5, 1}), compress_session(s, {0.5, 2}));
}

TEST(Compress, DependsOnSessionAndTurn) {
  auto a = hundred_tokens();
  auto b = a;
  b.session_id = "other";
  EXPECT_NE(compress_session(a, {0.5, 1}).turns[0].text, compress_session(b, {0.5, 1}).turns[0].text);
}

TEST(Compress, KeptFractionTracksRatioOverCorpus) {
  const auto sessions = parse_session_file(ts::corpus_dir() / "sessions.jsonl");
  std::size_t total = 0;
  for (const auto& s : sessions) {
    for (const auto& t : s.turns) total += split_whitespace(t.text).size();
  }
  for (double ratio : {0.2, 0.4, 0.6, 0.8}) {
    std::size_t kept = 0;
    for (const auto& s : sessions) {
      for (const auto& t : compress_session(s, {ratio, 7}).turns) kept += split_whitespace(t.text).size();
    }
    EXPECT_NEAR(static_cast<double>(kept) / static_cast<double>(total), ratio, 0.05) << "ratio " << ratio;
  }
}

TEST(Compress, InvalidRatio) {
  for (double bad : {0.0, -0.1, 1.5}) EXPECT_THROW((CompressionConfig{bad, 1}.validate()), ValidationError) << bad;
  EXPECT_THROW(compress_session(hundred_tokens(), {0.0, 1}), ValidationError);
}
