#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tablefill/run_config.hpp"

namespace tablefill {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // command ran but the check failed
inline constexpr int kExitError = 2;    // bad input, config or paths

// Decode-time settings that may differ from what a checkpoint was trained with.
struct DecodeOverrides {
  std::optional<bool> multi_sentence;
  std::optional<int> max_segment_tokens;
  std::optional<PoolingMode> pooling;
  std::optional<RelAggregation> rel_aggregation;

  void apply(ModelConfig& config) const;
};

// Writes <output_dir>/checkpoint.json (or paths.checkpoint), train_log.jsonl and metrics.json.
// With runs > 1 each run goes to <output_dir>/run<k>/ and summary.json holds mean and SD.
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path input;
  std::filesystem::path output;
  bool cell_probs = false;
  DecodeOverrides overrides;
};

int cmd_predict(const PredictOptions& options, std::ostream& out, std::ostream& err);

struct EvaluateOptions {
  std::filesystem::path gold;
  std::filesystem::path predictions;
  std::filesystem::path report;  // optional JSON output
  std::vector<Criterion> criteria = all_criteria();
};

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err);

struct GradCheckCommandOptions {
  RunConfig config;
  std::filesystem::path input;  // empty uses a built-in sample
  int sentences = 2;
  double tolerance = 1e-4;
  long max_entries_per_block = 0;
};

int cmd_grad_check(const GradCheckCommandOptions& options, std::ostream& out, std::ostream& err);

struct DumpTableOptions {
  std::filesystem::path input;
  std::filesystem::path checkpoint;  // optional; adds predicted tables
  std::string document;              // empty dumps every document
  DecodeOverrides overrides;
};

int cmd_dump_table(const DumpTableOptions& options, std::ostream& out, std::ostream& err);

// One JSON-lines record per sentence.
nlohmann::json prediction_record(const std::string& doc_id, int sentence, const Sentence& annotated,
                                 const SentencePrediction& prediction, const LabelSchema& schema,
                                 RelAggregation aggregation, bool cell_probs);
// Accepts per-sentence prediction records or corpus documents, in file order.
Corpus read_predictions(const std::filesystem::path& path);

// Small corpus with a Person-LiveIn-Location pattern, used by grad-check and tests.
Corpus sample_corpus();

}  // namespace tablefill
