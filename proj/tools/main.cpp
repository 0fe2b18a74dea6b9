#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tablefill/commands.hpp"

using namespace tablefill;

namespace {

struct Shared {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool multi_sentence = false;
  std::string pooling;
  std::string rel_aggregation;
  std::vector<std::string> criteria;
  std::optional<int> runs;
  bool toy = false;
};

void add_decode_flags(CLI::App* cmd, Shared& s) {
  cmd->add_flag("--multi-sentence", s.multi_sentence, "Encode packed multi-sentence segments");
  cmd->add_option("--pooling", s.pooling, "Subword pooling")->check(CLI::IsMember({"first", "mean", "max"}));
  cmd->add_option("--rel-aggregation", s.rel_aggregation, "Cell-to-triple aggregation")
      ->check(CLI::IsMember({"last", "vote"}));
}

DecodeOverrides overrides_from(const Shared& s) {
  DecodeOverrides o;
  if (s.multi_sentence) o.multi_sentence = true;
  if (!s.pooling.empty()) o.pooling = pooling_mode_from_string(s.pooling);
  if (!s.rel_aggregation.empty()) o.rel_aggregation = rel_aggregation_from_string(s.rel_aggregation);
  return o;
}

std::vector<Criterion> criteria_from(const std::vector<std::string>& names) {
  std::vector<Criterion> out;
  for (const auto& n : names) out.push_back(criterion_from_string(n));
  return out;
}

RunConfig run_config_from(const Shared& s) {
  RunConfig c = s.config.empty() ? RunConfig{} : RunConfig::load(s.config);
  if (s.toy) {
    // Toy sizes; switches and decode choices stay as configured.
    ModelConfig toy = ModelConfig::toy();
    toy.ner_flags = c.model.ner_flags;
    toy.history.enabled = c.model.history.enabled;
    toy.pooling = c.model.pooling;
    toy.decode = c.model.decode;
    toy.multi_sentence = c.model.multi_sentence;
    c.model = toy;
  }
  if (s.seed) {
    c.train.seed = *s.seed;
    c.model.seed = *s.seed;
    c.model.encoder.seed = *s.seed;
  }
  DecodeOverrides o = overrides_from(s);
  o.apply(c.model);
  if (!s.criteria.empty()) c.criteria = criteria_from(s.criteria);
  if (s.runs) c.runs = *s.runs;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint entity and relation extraction by table filling"};
  app.require_subcommand(1);
  Shared shared;

  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string train_path, dev_path, test_path, out_dir, ckpt_path;
  std::optional<int> epochs;
  train->add_option("--config", shared.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  train->add_option("--train", train_path, "Training corpus (JSON lines)");
  train->add_option("--dev", dev_path, "Development corpus");
  train->add_option("--test", test_path, "Test corpus");
  train->add_option("--output-dir", out_dir, "Directory for checkpoint, logs and metrics");
  train->add_option("--checkpoint", ckpt_path, "Checkpoint path");
  train->add_option("--seed", shared.seed, "Seed for initialization, shuffling and dropout");
  train->add_option("--epochs", epochs, "Number of epochs");
  train->add_option("--criterion", shared.criteria, "Relation criterion (repeatable)")
      ->check(CLI::IsMember({"conll_exact", "ace_boundary", "ace_strict"}));
  train->add_option("--runs", shared.runs, "Independent runs; reports mean and SD")->check(CLI::PositiveNumber);
  train->add_flag("--toy", shared.toy, "Use the small toy encoder configuration");
  add_decode_flags(train, shared);

  auto* predict = app.add_subcommand("predict", "Predict entities and relations");
  PredictOptions popt;
  std::string p_ckpt, p_in, p_out;
  predict->add_option("--checkpoint", p_ckpt, "Trained checkpoint")->required();
  predict->add_option("--input", p_in, "Corpus to annotate")->required();
  predict->add_option("--output", p_out, "Predictions (JSON lines)")->required();
  predict->add_flag("--cell-probs", popt.cell_probs, "Include per-cell relation probabilities");
  add_decode_flags(predict, shared);

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a gold corpus");
  std::string e_gold, e_pred, e_report;
  evaluate->add_option("--gold", e_gold, "Gold corpus")->required();
  evaluate->add_option("--pred", e_pred, "Predictions or predicted corpus")->required();
  evaluate->add_option("--report", e_report, "Write the JSON report here");
  evaluate->add_option("--criterion", shared.criteria, "Relation criterion (repeatable)")
      ->check(CLI::IsMember({"conll_exact", "ace_boundary", "ace_strict"}));

  auto* gradcheck = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  GradCheckCommandOptions gopt;
  std::string g_in;
  gradcheck->add_option("--config", shared.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  gradcheck->add_option("--input", g_in, "Corpus to sample sentences from");
  gradcheck->add_option("--sentences", gopt.sentences, "Number of sentences in the sample");
  gradcheck->add_option("--tolerance", gopt.tolerance, "Maximum relative error");
  gradcheck->add_option("--max-entries", gopt.max_entries_per_block, "Entries checked per block (0 = all)");
  gradcheck->add_option("--seed", shared.seed, "Seed");
  add_decode_flags(gradcheck, shared);

  auto* dump = app.add_subcommand("dump-table", "Print label tables");
  DumpTableOptions dopt;
  std::string d_in, d_ckpt;
  dump->add_option("--input", d_in, "Corpus")->required();
  dump->add_option("--checkpoint", d_ckpt, "Also print tables predicted by this checkpoint");
  dump->add_option("--doc", dopt.document, "Only this document id");
  add_decode_flags(dump, shared);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      RunConfig c = run_config_from(shared);
      if (!train_path.empty()) c.paths.train = train_path;
      if (!dev_path.empty()) c.paths.dev = dev_path;
      if (!test_path.empty()) c.paths.test = test_path;
      if (!out_dir.empty()) c.paths.output_dir = out_dir;
      if (!ckpt_path.empty()) c.paths.checkpoint = ckpt_path;
      if (epochs) c.train.epochs = *epochs;
      return cmd_train(c, std::cout, std::cerr);
    }
    if (*predict) {
      popt.checkpoint = p_ckpt;
      popt.input = p_in;
      popt.output = p_out;
      popt.overrides = overrides_from(shared);
      return cmd_predict(popt, std::cout, std::cerr);
    }
    if (*evaluate) {
      EvaluateOptions eopt;
      eopt.gold = e_gold;
      eopt.predictions = e_pred;
      eopt.report = e_report;
      if (!shared.criteria.empty()) eopt.criteria = criteria_from(shared.criteria);
      return cmd_evaluate(eopt, std::cout, std::cerr);
    }
    if (*gradcheck) {
      if (shared.config.empty()) shared.toy = true;
      gopt.config = run_config_from(shared);
      gopt.input = g_in;
      return cmd_grad_check(gopt, std::cout, std::cerr);
    }
    if (*dump) {
      dopt.input = d_in;
      dopt.checkpoint = d_ckpt;
      dopt.overrides = overrides_from(shared);
      return cmd_dump_table(dopt, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}
