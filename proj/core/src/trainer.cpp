#include "tablefill/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace tablefill {

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (!(lr_encoder > 0.0) || !(lr_heads > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw std::invalid_argument("warmup_fraction must lie in [0, 1]");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("grad_clip must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"lr_encoder", lr_encoder},
          {"lr_heads", lr_heads},
          {"dropout", dropout},
          {"warmup_fraction", warmup_fraction},
          {"weight_decay", weight_decay},
          {"grad_clip", grad_clip},
          {"seed", seed},
          {"loss_reduction", to_string(loss_reduction)},
          {"dev_criterion", to_string(dev_criterion)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_encoder = j.value("lr_encoder", c.lr_encoder);
  c.lr_heads = j.value("lr_heads", c.lr_heads);
  c.dropout = j.value("dropout", c.dropout);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  c.loss_reduction = loss_reduction_from_string(j.value("loss_reduction", std::string("sum")));
  c.dev_criterion = criterion_from_string(j.value("dev_criterion", std::string("ace_strict")));
  c.validate();
  return c;
}

double lr_at(long step, long total_steps, double base_lr, double warmup_fraction) {
  if (total_steps < 0 || step < 0 || step > total_steps) {
    throw std::out_of_range("lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  if (total_steps == 0) return 0.0;
  const double warmup = warmup_fraction * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s < warmup) return base_lr * s / warmup;
  const double rest = static_cast<double>(total_steps) - warmup;
  if (rest <= 0.0) return base_lr;
  const double t = (s - warmup) / rest;
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void AdamW::step(ParamStore& store, double lr_encoder, double lr_heads, double weight_decay) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Param* p : store.all()) {
    if (p->grad.size() == 0) continue;
    if (p->moment1.size() == 0) {
      p->moment1 = Matrix::Zero(p->value.rows(), p->value.cols());
      p->moment2 = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    const double lr = p->group == ParamGroup::kEncoder ? lr_encoder : lr_heads;
    p->moment1 = beta1_ * p->moment1 + (1.0 - beta1_) * p->grad;
    p->moment2 = beta2_ * p->moment2 + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    if (lr == 0.0) continue;
    if (p->decay && weight_decay != 0.0) p->value *= 1.0 - lr * weight_decay;
    p->value.array() -= lr * (p->moment1.array() / c1) / ((p->moment2.array() / c2).sqrt() + eps_);
  }
}

double clip_grad_norm(ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (const Param* p : std::as_const(store).all()) {
    if (p->grad.size() != 0) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / (norm + 1e-12);
    for (Param* p : store.all()) {
      if (p->grad.size() != 0) p->grad *= f;
    }
  }
  return norm;
}

namespace {

void add_sentence_terms(Graph& g, const Model& model, const WordEncoding& enc, const Sentence& s,
                        LossReduction reduction, const Dropout& dropout, std::vector<Var>& terms) {
  SentenceLoss l = model.sentence_loss(g, enc, s, reduction, dropout, dropout);
  terms.push_back(l.ner);
  if (l.re.valid()) terms.push_back(l.re);
}

}  // namespace

Var total_loss(Graph& g, const Model& model, std::span<const Sentence> batch, LossReduction reduction,
               const Dropout& dropout) {
  std::vector<Var> terms;
  for (const Sentence& s : batch) add_sentence_terms(g, model, model.encode_sentence(g, s), s, reduction, dropout, terms);
  if (terms.empty()) return g.constant(Matrix::Zero(1, 1));
  return ops::sum(g, terms);
}

double total_loss(const Model& model, std::span<const Sentence> batch, LossReduction reduction) {
  Graph g;
  return g.scalar(total_loss(g, model, batch, reduction));
}

Var document_loss(Graph& g, const Model& model, const Document& doc, LossReduction reduction,
                  const Dropout& dropout) {
  std::vector<Var> terms;
  auto encodings = model.encode_document(g, doc);
  for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
    add_sentence_terms(g, model, encodings[k], doc.sentences[k], reduction, dropout, terms);
  }
  if (terms.empty()) return g.constant(Matrix::Zero(1, 1));
  return ops::sum(g, terms);
}

nlohmann::json EpochLog::to_json() const {
  nlohmann::json j = {{"epoch", epoch}, {"train_loss", train_loss}, {"lr_encoder", lr_encoder}, {"lr_heads", lr_heads}};
  if (has_dev) {
    j["dev_entity"] = dev_entity.to_json();
    j["dev_relation"] = dev_relation.to_json();
  }
  return j;
}

FitResult fit(Model& model, const Corpus& train, const Corpus* dev, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  // Training units: whole documents when sentences share segments, single sentences otherwise.
  std::vector<Document> units;
  for (const Document& doc : train) {
    if (model.config().multi_sentence) {
      units.push_back(doc);
    } else {
      for (const Sentence& s : doc.sentences) units.push_back(Document{doc.id, {s}});
    }
  }

  std::mt19937_64 rng(config.seed);
  const Dropout dropout(config.dropout, &rng);
  AdamW optimizer;
  FitResult result;
  const long batches_per_epoch = units.empty() ? 0 : (static_cast<long>(units.size()) + config.batch_size - 1) / config.batch_size;
  const long total_steps = batches_per_epoch * config.epochs;
  std::vector<std::size_t> order(units.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_score = -1.0;
  std::vector<Matrix> best_params;
  const Criterion dev_criteria[] = {config.dev_criterion};

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch + 1;
    for (long b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * config.batch_size;
      const std::size_t hi = std::min(order.size(), lo + config.batch_size);
      model.params().zero_grad();
      Graph g;
      std::vector<Var> terms;
      for (std::size_t u = lo; u < hi; ++u) terms.push_back(document_loss(g, model, units[order[u]], config.loss_reduction, dropout));
      Var batch = ops::scale(g, ops::sum(g, terms), 1.0 / static_cast<double>(hi - lo));
      const double value = g.scalar(batch);
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss " << value << " at epoch " << epoch + 1 << ", step " << result.steps;
        throw DivergenceError(msg.str());
      }
      g.backward(batch);
      if (config.grad_clip > 0.0) clip_grad_norm(model.params(), config.grad_clip);
      log.lr_encoder = lr_at(result.steps, total_steps, config.lr_encoder, config.warmup_fraction);
      log.lr_heads = lr_at(result.steps, total_steps, config.lr_heads, config.warmup_fraction);
      optimizer.step(model.params(), log.lr_encoder, log.lr_heads, config.weight_decay);
      ++result.steps;
      log.train_loss += value * static_cast<double>(hi - lo);
    }
    if (!units.empty()) log.train_loss /= static_cast<double>(units.size());

    if (dev) {
      EvaluationReport r = evaluate_model(model, *dev, dev_criteria);
      log.has_dev = true;
      log.dev_entity = r.entity;
      log.dev_relation = r.relation_for(config.dev_criterion);
      const double score = r.entity.f1 + log.dev_relation.f1;
      if (score > best_score) {
        best_score = score;
        best_params = model.params().snapshot();
        result.best_epoch = log.epoch;
      }
    }
    result.epochs.push_back(log);
    if (on_epoch && !on_epoch(log)) break;
  }
  if (!best_params.empty()) model.params().restore(best_params);
  model.params().zero_grad();
  return result;
}

nlohmann::json GradCheckReport::to_json() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const auto& b : blocks) {
    blocks_json.push_back({{"name", b.name},
                           {"entries", b.entries},
                           {"analytic_norm", b.analytic_norm},
                           {"numeric_norm", b.numeric_norm},
                           {"max_abs_error", b.max_abs_error},
                           {"rel_error", b.rel_error}});
  }
  return {{"blocks", blocks_json},
          {"max_rel_error", max_rel_error},
          {"worst_block", worst_block},
          {"tolerance", tolerance},
          {"passed", passed}};
}

GradCheckReport grad_check(Model& model, std::span<const Sentence> sample, const GradCheckOptions& options) {
  auto loss_value = [&] { return total_loss(model, sample, options.reduction); };

  model.params().zero_grad();
  {
    Graph g;
    g.backward(total_loss(g, model, sample, options.reduction));
  }

  GradCheckReport report;
  report.tolerance = options.tolerance;
  std::mt19937_64 rng(options.seed);
  for (Param* p : model.params().all()) {
    Matrix analytic = p->grad.size() == 0 ? Matrix::Zero(p->value.rows(), p->value.cols()) : p->grad;
    if (options.corrupt) options.corrupt(p->name, analytic);

    std::vector<Eigen::Index> entries(static_cast<std::size_t>(p->value.size()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) entries[static_cast<std::size_t>(i)] = i;
    if (options.max_entries_per_block > 0 && static_cast<long>(entries.size()) > options.max_entries_per_block) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(static_cast<std::size_t>(options.max_entries_per_block));
    }

    GradBlockReport b;
    b.name = p->name;
    b.entries = static_cast<long>(entries.size());
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (Eigen::Index idx : entries) {
      double& x = p->value.data()[idx];
      const double saved = x;
      x = saved + options.step;
      const double up = loss_value();
      x = saved - options.step;
      const double down = loss_value();
      x = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic.data()[idx];
      diff_sq += (a - numeric) * (a - numeric);
      a_sq += a * a;
      n_sq += numeric * numeric;
      b.max_abs_error = std::max(b.max_abs_error, std::abs(a - numeric));
    }
    b.analytic_norm = std::sqrt(a_sq);
    b.numeric_norm = std::sqrt(n_sq);
    b.rel_error = std::sqrt(diff_sq) / std::max(b.analytic_norm + b.numeric_norm, options.norm_floor);
    if (report.worst_block.empty() || b.rel_error > report.max_rel_error) {
      report.max_rel_error = b.rel_error;
      report.worst_block = b.name;
    }
    report.blocks.push_back(std::move(b));
  }
  model.params().zero_grad();
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace tablefill
