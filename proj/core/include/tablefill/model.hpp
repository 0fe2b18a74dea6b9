#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablefill/data_model.hpp"
#include "tablefill/encoder.hpp"
#include "tablefill/label_table.hpp"
#include "tablefill/ner_head.hpp"
#include "tablefill/re_head.hpp"

namespace tablefill {

struct ModelConfig {
  EncoderConfig encoder;
  int d_label = 50;
  int d_att = 20;
  NerFlags ner_flags;
  HistoryOptions history;  // sequential relation decoding, off by default
  PoolingMode pooling = PoolingMode::kMax;
  DecodePolicy decode;
  bool multi_sentence = false;
  int max_segment_tokens = 256;
  std::uint64_t seed = 7;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  // Small toy-encoder configuration for checks and smoke runs.
  static ModelConfig toy();
};

// Contextual word embeddings of one sentence plus the start-marker row that
// stands in for the word before position 0.
struct WordEncoding {
  Var words;
  Var start;
};

struct SentencePrediction {
  std::vector<int> entity_labels;
  std::vector<EntitySpan> spans;
  SpanIndex span_index;
  CellGrid cells;
  RelScoreTable scores;
  std::vector<RelationTriple> triples;
};

struct DocumentPrediction {
  std::vector<SentencePrediction> sentences;
  std::vector<SegmentWarning> warnings;
};

struct SentenceLoss {
  Var ner;
  Var re;  // invalid for single-word sentences
};

class Model {
 public:
  Model(ModelConfig config, LabelSchema schema, Vocabulary vocab);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  // Schema and vocabulary collected from the training corpus.
  static Model from_corpus(const ModelConfig& config, const Corpus& train);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const LabelSchema& schema() const { return schema_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  ParamStore& params() { return *store_; }
  const ParamStore& params() const { return *store_; }
  const Encoder& encoder() const { return *encoder_; }
  const NerHead& ner() const { return *ner_; }
  const ReHead& re() const { return *re_; }
  NerHead& ner() { return *ner_; }
  ReHead& re() { return *re_; }
  Param& label_embeddings() { return *label_embeddings_; }

  // Pooled word rows for packed sentence k of an encoded segment.
  WordEncoding pool_segment(Graph& g, Var encoded, const Segment& segment, int k) const;
  WordEncoding encode_sentence(Graph& g, const Sentence& sentence) const;
  // One encoding per sentence; packs sentences into segments when multi_sentence is on.
  std::vector<WordEncoding> encode_document(Graph& g, const Document& doc,
                                            std::vector<SegmentWarning>* warnings = nullptr) const;

  SentencePrediction predict_encoded(const Matrix& words, const RowVector& start, bool keep_scores = true) const;
  DocumentPrediction predict(const Document& doc) const;

  // Teacher-forced per-head losses for one annotated sentence.
  SentenceLoss sentence_loss(Graph& g, const WordEncoding& enc, const Sentence& sentence, LossReduction reduction,
                             const Dropout& ner_dropout = {}, const Dropout& re_dropout = {}) const;

  nlohmann::json to_checkpoint(const nlohmann::json& extra = nlohmann::json::object()) const;
  static Model from_checkpoint(const nlohmann::json& j);
  void save(const std::filesystem::path& path, const nlohmann::json& extra = nlohmann::json::object()) const;
  static Model load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  LabelSchema schema_;
  Vocabulary vocab_;
  std::unique_ptr<ParamStore> store_;
  std::unique_ptr<Encoder> encoder_;
  Param* label_embeddings_ = nullptr;
  std::unique_ptr<NerHead> ner_;
  std::unique_ptr<ReHead> re_;
};

inline constexpr std::string_view kCheckpointFormat = "tablefill-checkpoint";
inline constexpr int kCheckpointVersion = 1;

}  // namespace tablefill
