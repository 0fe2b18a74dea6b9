#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablefill/evaluator.hpp"
#include "tablefill/model.hpp"

namespace tablefill {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double lr_encoder = 5e-5;
  double lr_heads = 1e-3;
  double dropout = 0.3;
  double warmup_fraction = 0.2;
  double weight_decay = 0.01;
  double grad_clip = 0.0;  // global norm, 0 disables
  std::uint64_t seed = 42;
  LossReduction loss_reduction = LossReduction::kSum;
  Criterion dev_criterion = Criterion::kAceStrict;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Linear warmup from 0 to base_lr, then cosine decay to 0 at total_steps.
double lr_at(long step, long total_steps, double base_lr, double warmup_fraction);

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store, double lr_encoder, double lr_heads, double weight_decay);
  long steps_taken() const { return t_; }

 private:
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

// Rescales all gradients so their joint norm is at most max_norm; returns the norm before clipping.
double clip_grad_norm(ParamStore& store, double max_norm);

// Teacher-forced L = L_ent + L_rel summed over the batch, one encoder pass per sentence.
Var total_loss(Graph& g, const Model& model, std::span<const Sentence> batch, LossReduction reduction,
               const Dropout& dropout = {});
double total_loss(const Model& model, std::span<const Sentence> batch, LossReduction reduction);
// Same sum over a document, encoded through segments when the model packs sentences.
Var document_loss(Graph& g, const Model& model, const Document& doc, LossReduction reduction,
                  const Dropout& dropout = {});

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double lr_encoder = 0.0;
  double lr_heads = 0.0;
  bool has_dev = false;
  Metrics dev_entity;
  Metrics dev_relation;

  nlohmann::json to_json() const;
};

struct FitResult {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;  // -1 without a dev corpus
  long steps = 0;
};

// Returning false stops training after the current epoch.
using EpochCallback = std::function<bool(const EpochLog&)>;

FitResult fit(Model& model, const Corpus& train, const Corpus* dev, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

struct GradBlockReport {
  std::string name;
  long entries = 0;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  double max_abs_error = 0.0;
  double rel_error = 0.0;  // |a - n| / max(|a| + |n|, norm_floor) over the block
};

struct GradCheckReport {
  std::vector<GradBlockReport> blocks;
  double max_rel_error = 0.0;
  std::string worst_block;
  double tolerance = 0.0;
  bool passed = false;

  nlohmann::json to_json() const;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Keeps blocks whose true gradient is zero (e.g. attention key biases) from
  // dividing finite-difference noise by noise.
  double norm_floor = 1e-3;
  long max_entries_per_block = 0;  // 0 checks every entry
  std::uint64_t seed = 1;
  LossReduction reduction = LossReduction::kSum;
  // Applied to analytic gradients before comparison.
  std::function<void(const std::string& name, Matrix& grad)> corrupt;
};

GradCheckReport grad_check(Model& model, std::span<const Sentence> sample, const GradCheckOptions& options = {});

}  // namespace tablefill
