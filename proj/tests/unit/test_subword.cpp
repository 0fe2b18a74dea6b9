#include <gtest/gtest.h>

#include <random>

#include "tablefill/subword.hpp"
#include "test_support.hpp"

using namespace tablefill;

TEST(ChunkSplitter, SplitsIntoFourCharacterPieces) {
  ChunkSplitter s;
  EXPECT_EQ(s.split("London"), (std::vector<std::string>{"Lond", "##on"}));
  EXPECT_EQ(s.split("a"), (std::vector<std::string>{"a"}));
  EXPECT_EQ(s.split("abcd"), (std::vector<std::string>{"abcd"}));
  EXPECT_EQ(s.split("abcdefghi"), (std::vector<std::string>{"abcd", "##efgh", "##i"}));
  // Code points, not bytes.
  EXPECT_EQ(s.split("Zürich"), (std::vector<std::string>{"Züri", "##ch"}));
}

TEST(ChunkSplitter, AlignsLondon) {
  ChunkSplitter s;
  const std::vector<std::string> words{"London"};
  AlignedSentence a = split_words(words, s);
  ASSERT_EQ(a.spans.size(), 1u);
  EXPECT_EQ(a.spans[0], (WordSpan{0, 2}));
}

TEST(WordPieceSplitter, LongestMatchFirst) {
  WordPieceSplitter s({"Johan", "John", "##son", "##s", "##on", "Smith", "a"});
  EXPECT_EQ(s.split("Johanson"), (std::vector<std::string>{"Johan", "##son"}));
  EXPECT_EQ(s.split("Smith"), (std::vector<std::string>{"Smith"}));
  EXPECT_EQ(s.split("a"), (std::vector<std::string>{"a"}));
  EXPECT_EQ(s.split("Xyz"), (std::vector<std::string>{"[UNK]"}));
}

TEST(SplitterRegistry, BuildsByName) {
  auto chunk = make_splitter("chunk", {{"max_chars", 2}});
  EXPECT_EQ(chunk->split("abcde"), (std::vector<std::string>{"ab", "##cd", "##e"}));
  auto wp = make_splitter("wordpiece", {{"vocab", {"Johan", "##son"}}});
  EXPECT_EQ(wp->split("Johanson"), (std::vector<std::string>{"Johan", "##son"}));
  EXPECT_THROW(make_splitter("nope"), std::invalid_argument);
}

TEST(SplitWords, SpansPartitionSubwords) {
  ChunkSplitter s(3);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> words;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) words.push_back(std::string(1 + rng() % 9, static_cast<char>('a' + rng() % 26)));
    AlignedSentence a = split_words(words, s);
    ASSERT_EQ(a.spans.size(), words.size());
    int next = 0, total = 0;
    for (const WordSpan& w : a.spans) {
      EXPECT_EQ(w.first, next);
      EXPECT_GE(w.count, 1);
      next = w.end();
      total += w.count;
    }
    EXPECT_EQ(total, static_cast<int>(a.subwords.size()));
  }
}

TEST(SplitWords, RejectsEmptyInput) {
  ChunkSplitter s;
  EXPECT_THROW(split_words(std::vector<std::string>{}, s), std::invalid_argument);
  EXPECT_THROW(split_words(std::vector<std::string>{"ok", ""}, s), std::invalid_argument);
}

TEST(PoolWord, Examples) {
  Matrix m(2, 2);
  m << 1, 4, 3, 2;
  EXPECT_EQ(pool_word(m, PoolingMode::kMax), (RowVector(2) << 3, 4).finished());
  EXPECT_EQ(pool_word(m, PoolingMode::kMean), (RowVector(2) << 2, 3).finished());
  EXPECT_EQ(pool_word(m, PoolingMode::kFirst), (RowVector(2) << 1, 4).finished());
  Matrix one(1, 3);
  one << 0.5, -1, 2;
  for (auto mode : {PoolingMode::kFirst, PoolingMode::kMean, PoolingMode::kMax}) {
    EXPECT_EQ(pool_word(one, mode), RowVector(one.row(0)));
  }
  EXPECT_THROW(pool_word(Matrix(0, 3)), std::invalid_argument);
}

TEST(PoolWord, Properties) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int s = 1 + static_cast<int>(rng() % 5);
    Matrix m = tablefill::testing::random_matrix(rng, s, 4);
    Matrix perm = m.colwise().reverse();
    EXPECT_EQ(pool_word(m, PoolingMode::kMax), pool_word(perm, PoolingMode::kMax));
    for (auto mode : {PoolingMode::kFirst, PoolingMode::kMean, PoolingMode::kMax}) {
      RowVector p = pool_word(m, mode);
      for (int c = 0; c < 4; ++c) {
        EXPECT_GE(p(c), m.col(c).minCoeff() - 1e-15);
        EXPECT_LE(p(c), m.col(c).maxCoeff() + 1e-15);
      }
    }
  }
  Matrix same = Matrix::Constant(3, 2, 1.5);
  EXPECT_EQ(pool_word(same, PoolingMode::kMax), RowVector::Constant(2, 1.5));
}

TEST(PoolingMode, StringConversion) {
  for (auto mode : {PoolingMode::kFirst, PoolingMode::kMean, PoolingMode::kMax}) {
    EXPECT_EQ(pooling_mode_from_string(to_string(mode)), mode);
  }
  EXPECT_THROW(pooling_mode_from_string("sum"), std::invalid_argument);
}

TEST(Utf8, CountsCodePoints) {
  EXPECT_EQ(utf8_length("abc"), 3u);
  EXPECT_EQ(utf8_length("Zürich"), 6u);
  EXPECT_EQ(utf8_length(""), 0u);
}
