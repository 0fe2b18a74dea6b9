#include "tablefill/encoder.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <stdexcept>

namespace tablefill {

void EncoderConfig::validate() const {
  if (kind != "toy" && kind != "external") throw std::invalid_argument("encoder kind must be 'toy' or 'external'");
  if (kind == "external" && adapter.empty()) throw std::invalid_argument("external encoder needs an adapter name");
  if (kind == "toy") {
    if (d_model < 1) throw std::invalid_argument("d_model must be positive");
    if (num_layers < 0) throw std::invalid_argument("num_layers must be non-negative");
    if (num_heads < 1 || d_model % num_heads != 0) throw std::invalid_argument("num_heads must divide d_model");
    if (max_positions < 1) throw std::invalid_argument("max_positions must be positive");
  }
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"kind", kind},
          {"adapter", adapter},
          {"adapter_options", adapter_options},
          {"d_model", d_model},
          {"num_layers", num_layers},
          {"num_heads", num_heads},
          {"d_ff", d_ff},
          {"max_positions", max_positions},
          {"position_embeddings", position_embeddings},
          {"seed", seed},
          {"splitter", splitter},
          {"splitter_options", splitter_options}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.kind = j.value("kind", c.kind);
  c.adapter = j.value("adapter", c.adapter);
  c.adapter_options = j.value("adapter_options", c.adapter_options);
  c.d_model = j.value("d_model", c.d_model);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.position_embeddings = j.value("position_embeddings", c.position_embeddings);
  c.seed = j.value("seed", c.seed);
  c.splitter = j.value("splitter", c.splitter);
  c.splitter_options = j.value("splitter_options", c.splitter_options);
  c.validate();
  return c;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  for (std::string_view special : {kUnknownToken, kStartMarker, kSeparatorMarker}) {
    if (std::find(tokens.begin(), tokens.end(), special) == tokens.end()) tokens_.emplace_back(special);
  }
  for (auto& t : tokens) tokens_.push_back(std::move(t));
  for (std::size_t k = 0; k < tokens_.size(); ++k) {
    if (!index_.emplace(tokens_[k], static_cast<int>(k)).second) {
      throw std::invalid_argument("duplicate vocabulary entry: " + tokens_[k]);
    }
  }
}

Vocabulary Vocabulary::build(const Corpus& corpus, const SubwordSplitter& splitter) {
  std::set<std::string> pieces;
  for (const auto& doc : corpus) {
    for (const auto& s : doc.sentences) {
      for (const auto& w : s.words) {
        for (auto& p : splitter.split(w)) pieces.insert(std::move(p));
      }
    }
  }
  for (std::string_view special : {kUnknownToken, kStartMarker, kSeparatorMarker}) pieces.erase(std::string(special));
  return Vocabulary({pieces.begin(), pieces.end()});
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  return index_.at(std::string(kUnknownToken));
}

RowRange Segment::word_rows(int k, int word) const {
  const WordSpan& span = aligned.at(k).spans.at(word);
  const int begin = offsets.at(k) + span.first;
  return {begin, begin + span.count};
}

int Segment::position_of(int sentence, int subword) const {
  for (std::size_t k = 0; k < sentence_ids.size(); ++k) {
    if (sentence_ids[k] != sentence) continue;
    if (subword < 0 || subword >= static_cast<int>(aligned[k].subwords.size())) break;
    return offsets[k] + subword;
  }
  throw std::out_of_range("segment does not contain the requested subword");
}

namespace {

struct SegmentBuilder {
  Segment seg;

  SegmentBuilder() {
    seg.tokens.emplace_back(kStartMarker);
    seg.origin.push_back({});
  }

  bool empty() const { return seg.sentence_ids.empty(); }

  int cost(const AlignedSentence& a) const {
    return static_cast<int>(a.subwords.size()) + (empty() ? 0 : 1);
  }

  void append(int sentence_id, AlignedSentence a) {
    if (!empty()) {
      seg.tokens.emplace_back(kSeparatorMarker);
      seg.origin.push_back({});
    }
    seg.sentence_ids.push_back(sentence_id);
    seg.offsets.push_back(seg.size());
    for (std::size_t k = 0; k < a.subwords.size(); ++k) {
      seg.tokens.push_back(a.subwords[k]);
      seg.origin.push_back({sentence_id, static_cast<int>(k)});
    }
    seg.aligned.push_back(std::move(a));
  }
};

}  // namespace

SegmentPlan segment_document(const Document& doc, int max_tokens, const SubwordSplitter& splitter) {
  if (max_tokens < 2) throw std::invalid_argument("segment length limit must leave room for a start marker");
  SegmentPlan plan;
  SegmentBuilder current;
  auto flush = [&] {
    if (!current.empty()) plan.segments.push_back(std::move(current.seg));
    current = SegmentBuilder();
  };

  for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
    const int id = static_cast<int>(k);
    AlignedSentence aligned = split_words(doc.sentences[k].words, splitter);
    if (current.seg.size() + current.cost(aligned) <= max_tokens) {
      current.append(id, std::move(aligned));
      continue;
    }
    flush();
    const int needed = 1 + static_cast<int>(aligned.subwords.size());
    current.append(id, std::move(aligned));
    if (needed > max_tokens) {
      current.seg.over_length = true;
      plan.warnings.push_back({id, needed, max_tokens,
                               "sentence " + std::to_string(id) + " of document '" + doc.id + "' needs " +
                                   std::to_string(needed) + " tokens, over the limit of " +
                                   std::to_string(max_tokens)});
      flush();
    }
  }
  flush();
  return plan;
}

Segment single_sentence_segment(const Sentence& sentence, const SubwordSplitter& splitter, int sentence_id) {
  SegmentBuilder b;
  b.append(sentence_id, split_words(sentence.words, splitter));
  return std::move(b.seg);
}

Matrix Encoder::encode(std::span<const std::string> tokens) const {
  Graph g;
  return g.value(encode(g, tokens));
}

void Encoder::check_length(std::size_t n) const {
  if (n == 0) throw EncoderError("cannot encode an empty token sequence");
  if (static_cast<int>(n) > max_positions()) {
    throw EncoderError("input of " + std::to_string(n) + " tokens exceeds the encoder limit of " +
                       std::to_string(max_positions()));
  }
}

ToyEncoder::ToyEncoder(const EncoderConfig& config, Vocabulary vocab, ParamStore& store)
    : config_(config), vocab_(std::move(vocab)), splitter_(make_splitter(config.splitter, config.splitter_options)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const int d = config_.d_model;
  const int ff = config_.ff_width();
  auto enc = [&](std::string name, Matrix init, bool decay = true) {
    return &store.add("encoder." + std::move(name), std::move(init), ParamGroup::kEncoder, decay);
  };

  token_embeddings_ = enc("token_embeddings", random_normal(vocab_.size(), d, 1.0, rng));
  if (config_.position_embeddings) {
    position_embeddings_ = enc("position_embeddings", random_normal(config_.max_positions, d, 0.1, rng));
  }
  ln_emb_gain_ = enc("embedding_norm.gain", Matrix::Ones(1, d), false);
  ln_emb_bias_ = enc("embedding_norm.bias", Matrix::Zero(1, d), false);

  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer layer{};
    layer.wq = enc(p + "attention.W_q", xavier_uniform(d, d, rng));
    layer.bq = enc(p + "attention.b_q", Matrix::Zero(1, d), false);
    layer.wk = enc(p + "attention.W_k", xavier_uniform(d, d, rng));
    layer.bk = enc(p + "attention.b_k", Matrix::Zero(1, d), false);
    layer.wv = enc(p + "attention.W_v", xavier_uniform(d, d, rng));
    layer.bv = enc(p + "attention.b_v", Matrix::Zero(1, d), false);
    layer.wo = enc(p + "attention.W_o", xavier_uniform(d, d, rng));
    layer.bo = enc(p + "attention.b_o", Matrix::Zero(1, d), false);
    layer.ln1_gain = enc(p + "attention_norm.gain", Matrix::Ones(1, d), false);
    layer.ln1_bias = enc(p + "attention_norm.bias", Matrix::Zero(1, d), false);
    layer.w1 = enc(p + "ffn.W_in", xavier_uniform(ff, d, rng));
    layer.b1 = enc(p + "ffn.b_in", Matrix::Zero(1, ff), false);
    layer.w2 = enc(p + "ffn.W_out", xavier_uniform(d, ff, rng));
    layer.b2 = enc(p + "ffn.b_out", Matrix::Zero(1, d), false);
    layer.ln2_gain = enc(p + "ffn_norm.gain", Matrix::Ones(1, d), false);
    layer.ln2_bias = enc(p + "ffn_norm.bias", Matrix::Zero(1, d), false);
    layers_.push_back(layer);
  }
}

Var ToyEncoder::encode(Graph& g, std::span<const std::string> tokens) const {
  using namespace ops;
  check_length(tokens.size());
  const int n = static_cast<int>(tokens.size());
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab_.id(t));

  Var x = gather_rows(g, g.param(*token_embeddings_), ids);
  if (position_embeddings_) {
    std::vector<int> positions(n);
    for (int i = 0; i < n; ++i) positions[i] = i;
    x = add(g, x, gather_rows(g, g.param(*position_embeddings_), positions));
  }
  x = layer_norm(g, x, g.param(*ln_emb_gain_), g.param(*ln_emb_bias_));

  const int d = config_.d_model;
  const int heads = config_.num_heads;
  const int dh = d / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  auto linear = [&](Var in, Param* w, Param* b) { return add_row(g, matmul_nt(g, in, g.param(*w)), g.param(*b)); };

  for (const Layer& L : layers_) {
    Var q = linear(x, L.wq, L.bq);
    Var k = linear(x, L.wk, L.bk);
    Var v = linear(x, L.wv, L.bv);
    std::vector<Var> per_head;
    for (int h = 0; h < heads; ++h) {
      Var qh = slice_cols(g, q, h * dh, dh);
      Var kh = slice_cols(g, k, h * dh, dh);
      Var vh = slice_cols(g, v, h * dh, dh);
      Var attn = softmax_rows(g, scale(g, matmul_nt(g, qh, kh), inv_sqrt_dh));
      per_head.push_back(matmul(g, attn, vh));
    }
    Var mixed = heads == 1 ? per_head.front() : concat_cols(g, per_head);
    x = layer_norm(g, add(g, x, linear(mixed, L.wo, L.bo)), g.param(*L.ln1_gain), g.param(*L.ln1_bias));
    Var hidden = gelu(g, linear(x, L.w1, L.b1));
    x = layer_norm(g, add(g, x, linear(hidden, L.w2, L.b2)), g.param(*L.ln2_gain), g.param(*L.ln2_bias));
  }
  return x;
}

namespace {

struct ProviderRegistry {
  std::mutex mu;
  std::map<std::string, EmbeddingProviderFactory> factories;
};

ProviderRegistry& providers() {
  static ProviderRegistry r;
  return r;
}

}  // namespace

void register_embedding_provider(const std::string& name, EmbeddingProviderFactory factory) {
  auto& r = providers();
  std::lock_guard lock(r.mu);
  r.factories[name] = std::move(factory);
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const std::string& name, const nlohmann::json& options) {
  EmbeddingProviderFactory factory;
  {
    auto& r = providers();
    std::lock_guard lock(r.mu);
    auto it = r.factories.find(name);
    if (it == r.factories.end()) throw std::invalid_argument("no embedding provider registered as '" + name + "'");
    factory = it->second;
  }
  return factory(options);
}

ExternalEncoder::ExternalEncoder(std::unique_ptr<EmbeddingProvider> provider)
    : provider_(std::move(provider)), splitter_(provider_->make_splitter()) {
  if (!splitter_) throw std::invalid_argument("embedding provider returned no splitter");
}

Var ExternalEncoder::encode(Graph& g, std::span<const std::string> tokens) const {
  check_length(tokens.size());
  Matrix m = provider_->embed(tokens);
  if (m.rows() != static_cast<Eigen::Index>(tokens.size()) || m.cols() != provider_->dim()) {
    throw EncoderError("embedding provider returned a matrix of the wrong shape");
  }
  return g.constant(std::move(m));
}

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, const Vocabulary& vocab, ParamStore& store) {
  config.validate();
  if (config.kind == "toy") return std::make_unique<ToyEncoder>(config, vocab, store);
  return std::make_unique<ExternalEncoder>(make_embedding_provider(config.adapter, config.adapter_options));
}

}  // namespace tablefill
