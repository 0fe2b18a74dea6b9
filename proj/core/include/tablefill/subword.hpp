#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace tablefill {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

// Subword range of one word inside AlignedSentence::subwords.
struct WordSpan {
  int first = 0;
  int count = 0;

  int end() const { return first + count; }
  bool operator==(const WordSpan&) const = default;
};

struct AlignedSentence {
  std::vector<std::string> words;
  std::vector<std::string> subwords;
  std::vector<WordSpan> spans;  // one per word, partitions `subwords` in order
};

class SubwordSplitter {
 public:
  virtual ~SubwordSplitter() = default;
  // Non-empty list of pieces for a non-empty word.
  virtual std::vector<std::string> split(std::string_view word) const = 0;
  virtual std::string name() const = 0;
  virtual nlohmann::json options() const { return nlohmann::json::object(); }
};

// Deterministic stand-in for a trained tokenizer: greedy chunks of at most
// `max_chars` code points; every chunk after the first carries a "##" prefix.
class ChunkSplitter final : public SubwordSplitter {
 public:
  explicit ChunkSplitter(int max_chars = 4);

  std::vector<std::string> split(std::string_view word) const override;
  std::string name() const override { return "chunk"; }
  nlohmann::json options() const override { return {{"max_chars", max_chars_}}; }

 private:
  int max_chars_;
};

// Greedy longest-match-first WordPiece over a fixed vocabulary.
class WordPieceSplitter final : public SubwordSplitter {
 public:
  explicit WordPieceSplitter(std::vector<std::string> vocab, std::string unknown = "[UNK]",
                             int max_chars_per_word = 100);

  std::vector<std::string> split(std::string_view word) const override;
  std::string name() const override { return "wordpiece"; }
  nlohmann::json options() const override;

 private:
  std::vector<std::string> vocab_list_;
  std::unordered_set<std::string> vocab_;
  std::string unknown_;
  int max_chars_per_word_;
};

using SplitterFactory = std::function<std::unique_ptr<SubwordSplitter>(const nlohmann::json& options)>;

// Built-ins: "chunk" {max_chars} and "wordpiece" {vocab | vocab_file, unknown}.
void register_splitter(const std::string& name, SplitterFactory factory);
std::unique_ptr<SubwordSplitter> make_splitter(const std::string& name,
                                               const nlohmann::json& options = nlohmann::json::object());

AlignedSentence split_words(std::span<const std::string> words, const SubwordSplitter& splitter);

enum class PoolingMode { kFirst, kMean, kMax };

std::string to_string(PoolingMode mode);
PoolingMode pooling_mode_from_string(std::string_view s);

// Pools the rows of an s x d block into one d-vector.
RowVector pool_word(const Eigen::Ref<const Matrix>& subword_embeddings, PoolingMode mode = PoolingMode::kMax);

// Number of UTF-8 code points; malformed lead bytes count as one each.
std::size_t utf8_length(std::string_view s);

}  // namespace tablefill
