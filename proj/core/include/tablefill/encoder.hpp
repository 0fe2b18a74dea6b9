#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablefill/data_model.hpp"
#include "tablefill/graph.hpp"
#include "tablefill/params.hpp"
#include "tablefill/subword.hpp"

namespace tablefill {

inline constexpr std::string_view kStartMarker = "[CLS]";
inline constexpr std::string_view kSeparatorMarker = "[SEP]";
inline constexpr std::string_view kUnknownToken = "[UNK]";

struct EncoderConfig {
  std::string kind = "toy";  // "toy" or "external"
  std::string adapter;       // registered embedding provider, for kind == "external"
  nlohmann::json adapter_options = nlohmann::json::object();

  int d_model = 768;
  int num_layers = 2;
  int num_heads = 4;
  int d_ff = 0;  // 0 means 4 * d_model
  int max_positions = 512;
  bool position_embeddings = true;
  std::uint64_t seed = 13;

  std::string splitter = "chunk";
  nlohmann::json splitter_options = nlohmann::json::object();

  int ff_width() const { return d_ff > 0 ? d_ff : 4 * d_model; }
  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

// Token inventory of the toy encoder: markers first, then sorted subwords.
class Vocabulary {
 public:
  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary build(const Corpus& corpus, const SubwordSplitter& splitter);

  int id(std::string_view token) const;  // unknown tokens map to [UNK]
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Where a segment position came from: a sentence subword, or a marker (sentence < 0).
struct TokenOrigin {
  int sentence = -1;  // index of the sentence within the document
  int subword = -1;   // index within that sentence's subword list

  bool is_marker() const { return sentence < 0; }
  bool operator==(const TokenOrigin&) const = default;
};

// [CLS] s_1 [SEP] s_2 ... [SEP] s_k
struct Segment {
  std::vector<int> sentence_ids;
  std::vector<std::string> tokens;
  std::vector<TokenOrigin> origin;       // one per token
  std::vector<AlignedSentence> aligned;  // parallel to sentence_ids
  std::vector<int> offsets;              // segment position of each sentence's first subword
  bool over_length = false;

  int size() const { return static_cast<int>(tokens.size()); }
  // Segment rows holding the subwords of word `word` of the k-th packed sentence.
  RowRange word_rows(int k, int word) const;
  // Inverse of `origin` for sentence subwords; nullopt-free: throws if absent.
  int position_of(int sentence, int subword) const;
};

struct SegmentWarning {
  int sentence = 0;
  int tokens = 0;
  int limit = 0;
  std::string message;
};

struct SegmentPlan {
  std::vector<Segment> segments;
  std::vector<SegmentWarning> warnings;
};

// Greedy whole-sentence packing in document order. Markers count toward max_tokens.
SegmentPlan segment_document(const Document& doc, int max_tokens, const SubwordSplitter& splitter);
Segment single_sentence_segment(const Sentence& sentence, const SubwordSplitter& splitter, int sentence_id = 0);

class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual int d_model() const = 0;
  virtual int max_positions() const = 0;
  virtual const SubwordSplitter& splitter() const = 0;
  // tokens.size() x d_model contextual embeddings, markers included.
  virtual Var encode(Graph& g, std::span<const std::string> tokens) const = 0;

  Matrix encode(std::span<const std::string> tokens) const;

 protected:
  void check_length(std::size_t n) const;
};

class EncoderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Small post-LayerNorm transformer stack trained from scratch.
class ToyEncoder final : public Encoder {
 public:
  ToyEncoder(const EncoderConfig& config, Vocabulary vocab, ParamStore& store);

  int d_model() const override { return config_.d_model; }
  int max_positions() const override { return config_.max_positions; }
  const SubwordSplitter& splitter() const override { return *splitter_; }
  Var encode(Graph& g, std::span<const std::string> tokens) const override;
  using Encoder::encode;

  const Vocabulary& vocabulary() const { return vocab_; }

 private:
  struct Layer {
    Param *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    Param *ln1_gain, *ln1_bias;
    Param *w1, *b1, *w2, *b2;
    Param *ln2_gain, *ln2_bias;
  };

  EncoderConfig config_;
  Vocabulary vocab_;
  std::unique_ptr<SubwordSplitter> splitter_;
  Param* token_embeddings_;
  Param* position_embeddings_ = nullptr;
  Param* ln_emb_gain_;
  Param* ln_emb_bias_;
  std::vector<Layer> layers_;
};

// Frozen contextual embeddings from an outside model: subwords in, embeddings out.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual int dim() const = 0;
  virtual int max_positions() const = 0;
  virtual std::unique_ptr<SubwordSplitter> make_splitter() const = 0;
  virtual Matrix embed(std::span<const std::string> tokens) const = 0;
};

using EmbeddingProviderFactory = std::function<std::unique_ptr<EmbeddingProvider>(const nlohmann::json& options)>;
void register_embedding_provider(const std::string& name, EmbeddingProviderFactory factory);
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const std::string& name, const nlohmann::json& options);

// Adapts an EmbeddingProvider to the Encoder interface; gradients stop here.
class ExternalEncoder final : public Encoder {
 public:
  explicit ExternalEncoder(std::unique_ptr<EmbeddingProvider> provider);

  int d_model() const override { return provider_->dim(); }
  int max_positions() const override { return provider_->max_positions(); }
  const SubwordSplitter& splitter() const override { return *splitter_; }
  Var encode(Graph& g, std::span<const std::string> tokens) const override;
  using Encoder::encode;

 private:
  std::unique_ptr<EmbeddingProvider> provider_;
  std::unique_ptr<SubwordSplitter> splitter_;
};

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, const Vocabulary& vocab, ParamStore& store);

}  // namespace tablefill
