#include "tablefill/subword.hpp"

#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>

namespace tablefill {

namespace {

std::size_t utf8_sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

// Byte offsets of every code point boundary, including the final end offset.
std::vector<std::size_t> code_point_offsets(std::string_view s) {
  std::vector<std::size_t> offsets;
  std::size_t pos = 0;
  while (pos < s.size()) {
    offsets.push_back(pos);
    pos = std::min(s.size(), pos + utf8_sequence_length(static_cast<unsigned char>(s[pos])));
  }
  offsets.push_back(s.size());
  return offsets;
}

struct Registry {
  std::mutex mu;
  std::map<std::string, SplitterFactory> factories;

  Registry() {
    factories["chunk"] = [](const nlohmann::json& o) {
      return std::make_unique<ChunkSplitter>(o.value("max_chars", 4));
    };
    factories["wordpiece"] = [](const nlohmann::json& o) -> std::unique_ptr<SubwordSplitter> {
      std::vector<std::string> vocab;
      if (o.contains("vocab")) {
        vocab = o.at("vocab").get<std::vector<std::string>>();
      } else if (o.contains("vocab_file")) {
        std::ifstream in(o.at("vocab_file").get<std::string>());
        if (!in) throw std::runtime_error("cannot open wordpiece vocabulary: " + o.at("vocab_file").get<std::string>());
        for (std::string line; std::getline(in, line);) {
          if (!line.empty() && line.back() == '\r') line.pop_back();
          if (!line.empty()) vocab.push_back(line);
        }
      } else {
        throw std::invalid_argument("wordpiece splitter needs 'vocab' or 'vocab_file'");
      }
      return std::make_unique<WordPieceSplitter>(std::move(vocab), o.value("unknown", std::string("[UNK]")));
    };
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

std::size_t utf8_length(std::string_view s) { return code_point_offsets(s).size() - 1; }

ChunkSplitter::ChunkSplitter(int max_chars) : max_chars_(max_chars) {
  if (max_chars_ < 1) throw std::invalid_argument("chunk size must be positive");
}

std::vector<std::string> ChunkSplitter::split(std::string_view word) const {
  if (word.empty()) throw std::invalid_argument("cannot split an empty word");
  const auto offsets = code_point_offsets(word);
  const std::size_t chars = offsets.size() - 1;
  std::vector<std::string> pieces;
  for (std::size_t c = 0; c < chars; c += max_chars_) {
    const std::size_t stop = std::min(chars, c + max_chars_);
    std::string piece(word.substr(offsets[c], offsets[stop] - offsets[c]));
    pieces.push_back(c == 0 ? piece : "##" + piece);
  }
  return pieces;
}

WordPieceSplitter::WordPieceSplitter(std::vector<std::string> vocab, std::string unknown, int max_chars_per_word)
    : vocab_list_(std::move(vocab)),
      vocab_(vocab_list_.begin(), vocab_list_.end()),
      unknown_(std::move(unknown)),
      max_chars_per_word_(max_chars_per_word) {}

std::vector<std::string> WordPieceSplitter::split(std::string_view word) const {
  if (word.empty()) throw std::invalid_argument("cannot split an empty word");
  const auto offsets = code_point_offsets(word);
  const std::size_t chars = offsets.size() - 1;
  if (static_cast<int>(chars) > max_chars_per_word_) return {unknown_};

  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < chars) {
    std::size_t stop = chars;
    std::string match;
    while (stop > start) {
      std::string candidate(word.substr(offsets[start], offsets[stop] - offsets[start]));
      if (start > 0) candidate = "##" + candidate;
      if (vocab_.count(candidate)) {
        match = std::move(candidate);
        break;
      }
      --stop;
    }
    if (match.empty()) return {unknown_};
    pieces.push_back(std::move(match));
    start = stop;
  }
  return pieces;
}

nlohmann::json WordPieceSplitter::options() const { return {{"vocab", vocab_list_}, {"unknown", unknown_}}; }

void register_splitter(const std::string& name, SplitterFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  r.factories[name] = std::move(factory);
}

std::unique_ptr<SubwordSplitter> make_splitter(const std::string& name, const nlohmann::json& options) {
  auto& r = registry();
  SplitterFactory factory;
  {
    std::lock_guard lock(r.mu);
    auto it = r.factories.find(name);
    if (it == r.factories.end()) throw std::invalid_argument("unknown subword splitter: " + name);
    factory = it->second;
  }
  return factory(options.is_null() ? nlohmann::json::object() : options);
}

AlignedSentence split_words(std::span<const std::string> words, const SubwordSplitter& splitter) {
  if (words.empty()) throw std::invalid_argument("cannot align an empty sentence");
  AlignedSentence out;
  out.words.assign(words.begin(), words.end());
  for (const auto& w : words) {
    if (w.empty()) throw std::invalid_argument("cannot split an empty word");
    auto pieces = splitter.split(w);
    if (pieces.empty()) throw std::logic_error("splitter '" + splitter.name() + "' returned no pieces for: " + w);
    out.spans.push_back({static_cast<int>(out.subwords.size()), static_cast<int>(pieces.size())});
    for (auto& p : pieces) out.subwords.push_back(std::move(p));
  }
  return out;
}

std::string to_string(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::kFirst: return "first";
    case PoolingMode::kMean: return "mean";
    case PoolingMode::kMax: return "max";
  }
  return "max";
}

PoolingMode pooling_mode_from_string(std::string_view s) {
  if (s == "first") return PoolingMode::kFirst;
  if (s == "mean") return PoolingMode::kMean;
  if (s == "max") return PoolingMode::kMax;
  throw std::invalid_argument("unknown pooling mode: " + std::string(s));
}

RowVector pool_word(const Eigen::Ref<const Matrix>& rows, PoolingMode mode) {
  if (rows.rows() == 0 || rows.cols() == 0) throw std::invalid_argument("pool_word: empty input");
  switch (mode) {
    case PoolingMode::kFirst: return rows.row(0);
    case PoolingMode::kMean: return rows.colwise().mean();
    case PoolingMode::kMax: return rows.colwise().maxCoeff();
  }
  return rows.colwise().maxCoeff();
}

}  // namespace tablefill
