#include "tablefill/model.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

namespace tablefill {

nlohmann::json ModelConfig::to_json() const {
  return {{"encoder", encoder.to_json()},
          {"d_label", d_label},
          {"d_att", d_att},
          {"ner", {{"use_label_feature", ner_flags.use_label_feature}, {"use_span_feature", ner_flags.use_span_feature}}},
          {"prediction_order", history.enabled ? "history" : "once"},
          {"d_hist", history.d_hist},
          {"pooling", to_string(pooling)},
          {"bilou_repair", to_string(decode.bilou_repair)},
          {"rel_aggregation", to_string(decode.rel_aggregation)},
          {"multi_sentence", multi_sentence},
          {"max_segment_tokens", max_segment_tokens},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("encoder")) c.encoder = EncoderConfig::from_json(j.at("encoder"));
  c.d_label = j.value("d_label", c.d_label);
  c.d_att = j.value("d_att", c.d_att);
  if (j.contains("ner")) {
    c.ner_flags.use_label_feature = j.at("ner").value("use_label_feature", true);
    c.ner_flags.use_span_feature = j.at("ner").value("use_span_feature", true);
  }
  const std::string order = j.value("prediction_order", std::string("once"));
  if (order != "once" && order != "history") throw std::invalid_argument("prediction_order must be 'once' or 'history'");
  c.history.enabled = order == "history";
  c.history.d_hist = j.value("d_hist", c.history.d_hist);
  c.pooling = pooling_mode_from_string(j.value("pooling", std::string("max")));
  c.decode.bilou_repair = bilou_repair_from_string(j.value("bilou_repair", std::string("greedy_repair")));
  c.decode.rel_aggregation = rel_aggregation_from_string(j.value("rel_aggregation", std::string("last_last_cell")));
  c.multi_sentence = j.value("multi_sentence", c.multi_sentence);
  c.max_segment_tokens = j.value("max_segment_tokens", c.max_segment_tokens);
  c.seed = j.value("seed", c.seed);
  if (c.d_label < 1) throw std::invalid_argument("d_label must be positive");
  return c;
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.encoder.d_model = 16;
  c.encoder.num_layers = 1;
  c.encoder.num_heads = 2;
  c.encoder.d_ff = 32;
  c.encoder.max_positions = 64;
  c.d_label = 8;
  c.d_att = 6;
  c.history.d_hist = 4;
  c.max_segment_tokens = 64;
  return c;
}

Model::Model(ModelConfig config, LabelSchema schema, Vocabulary vocab)
    : config_(std::move(config)),
      schema_(std::move(schema)),
      vocab_(std::move(vocab)),
      store_(std::make_unique<ParamStore>()) {
  encoder_ = make_encoder(config_.encoder, vocab_, *store_);
  std::mt19937_64 rng(config_.seed);
  const int d = encoder_->d_model();
  label_embeddings_ = &store_->add("label_embeddings", random_normal(schema_.num_entity_labels(), config_.d_label, 0.1, rng),
                                   ParamGroup::kHeads);
  ner_ = std::make_unique<NerHead>(*store_, schema_.num_entity_labels(), d, *label_embeddings_, config_.ner_flags, rng);
  re_ = std::make_unique<ReHead>(*store_, schema_.num_relation_labels(), d, *label_embeddings_, config_.d_att,
                                 config_.history, rng);
}

Model Model::from_corpus(const ModelConfig& config, const Corpus& train) {
  LabelSchema schema = schema_from_corpus(train);
  Vocabulary vocab;
  if (config.encoder.kind == "toy") {
    auto splitter = make_splitter(config.encoder.splitter, config.encoder.splitter_options);
    vocab = Vocabulary::build(train, *splitter);
  }
  return Model(config, std::move(schema), std::move(vocab));
}

WordEncoding Model::pool_segment(Graph& g, Var encoded, const Segment& segment, int k) const {
  const AlignedSentence& a = segment.aligned.at(k);
  std::vector<RowRange> ranges;
  ranges.reserve(a.spans.size());
  for (std::size_t w = 0; w < a.spans.size(); ++w) ranges.push_back(segment.word_rows(k, static_cast<int>(w)));
  return {ops::pool_rows(g, encoded, ranges, config_.pooling), ops::slice_rows(g, encoded, 0, 1)};
}

WordEncoding Model::encode_sentence(Graph& g, const Sentence& sentence) const {
  Segment seg = single_sentence_segment(sentence, encoder_->splitter());
  Var encoded = encoder_->encode(g, seg.tokens);
  return pool_segment(g, encoded, seg, 0);
}

std::vector<WordEncoding> Model::encode_document(Graph& g, const Document& doc,
                                                 std::vector<SegmentWarning>* warnings) const {
  std::vector<WordEncoding> out(doc.sentences.size());
  if (!config_.multi_sentence) {
    for (std::size_t k = 0; k < doc.sentences.size(); ++k) out[k] = encode_sentence(g, doc.sentences[k]);
    return out;
  }
  SegmentPlan plan = segment_document(doc, config_.max_segment_tokens, encoder_->splitter());
  if (warnings) warnings->insert(warnings->end(), plan.warnings.begin(), plan.warnings.end());
  for (const Segment& seg : plan.segments) {
    Var encoded = encoder_->encode(g, seg.tokens);
    for (std::size_t k = 0; k < seg.sentence_ids.size(); ++k) {
      out[seg.sentence_ids[k]] = pool_segment(g, encoded, seg, static_cast<int>(k));
    }
  }
  return out;
}

SentencePrediction Model::predict_encoded(const Matrix& words, const RowVector& start, bool keep_scores) const {
  SentencePrediction p;
  NerDecodeResult ner = ner_->decode(words, start, schema_, config_.decode.bilou_repair);
  p.entity_labels = std::move(ner.labels);
  p.spans = std::move(ner.spans);
  p.span_index = std::move(ner.span_index);

  const Matrix h = re_->rel_inputs(words, p.entity_labels, p.span_index, Phase::kPredict);
  RelScoreTable scores = re_->score(h);
  p.cells = re_->has_history() ? re_->decode_history(h) : decode_relations_once(scores);
  p.triples = triples_from_cells(p.cells, p.spans, schema_, config_.decode.rel_aggregation);
  if (keep_scores) p.scores = std::move(scores);
  return p;
}

DocumentPrediction Model::predict(const Document& doc) const {
  DocumentPrediction out;
  Graph g;
  auto encodings = encode_document(g, doc, &out.warnings);
  for (const auto& enc : encodings) {
    const Matrix& start = g.value(enc.start);
    out.sentences.push_back(predict_encoded(g.value(enc.words), start.row(0)));
  }
  return out;
}

SentenceLoss Model::sentence_loss(Graph& g, const WordEncoding& enc, const Sentence& sentence,
                                  LossReduction reduction, const Dropout& ner_dropout,
                                  const Dropout& re_dropout) const {
  const LabelTable gold = build_gold_table(sentence, schema_);
  const SpanIndex spans = span_index(entity_spans(sentence, schema_), sentence.size());
  SentenceLoss out;
  out.ner = ner_->loss(g, enc.words, enc.start, gold.diag, spans, reduction, ner_dropout);
  if (sentence.size() >= 2) out.re = re_->loss(g, enc.words, gold.diag, gold, reduction, re_dropout);
  return out;
}

nlohmann::json Model::to_checkpoint(const nlohmann::json& extra) const {
  nlohmann::json j = {{"format", kCheckpointFormat},
                      {"version", kCheckpointVersion},
                      {"schema", schema_.to_json()},
                      {"model_config", config_.to_json()},
                      {"vocabulary", vocab_.tokens()},
                      {"params", store_->to_json()}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

Model Model::from_checkpoint(const nlohmann::json& j) {
  if (j.value("format", std::string()) != kCheckpointFormat) throw std::invalid_argument("not a tablefill checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw std::invalid_argument("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  }
  Model m(ModelConfig::from_json(j.at("model_config")), LabelSchema::from_json(j.at("schema")),
          Vocabulary(j.at("vocabulary").get<std::vector<std::string>>()));
  m.store_->load_json(j.at("params"));
  return m;
}

void Model::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << to_checkpoint(extra).dump() << '\n';
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  return from_checkpoint(nlohmann::json::parse(in));
}

}  // namespace tablefill
