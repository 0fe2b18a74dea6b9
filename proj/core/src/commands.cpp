#include "tablefill/commands.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace tablefill {

namespace {

class PathError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) throw PathError(what + " path is required");
  if (!std::filesystem::is_regular_file(p)) throw PathError(what + " not found: " + p.string());
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw PathError("cannot write " + path.string());
  f << text;
}

LabelSchema union_schema(const Corpus& a, const Corpus& b) {
  std::set<std::string> ents, rels;
  for (const Corpus* c : {&a, &b}) {
    for (const Document& d : *c) {
      for (const Sentence& s : d.sentences) {
        for (const auto& e : s.entities) ents.insert(e.etype);
        for (const auto& r : s.relations) rels.insert(r.rtype);
      }
    }
  }
  return LabelSchema({ents.begin(), ents.end()}, {rels.begin(), rels.end()});
}

}  // namespace

void DecodeOverrides::apply(ModelConfig& config) const {
  if (multi_sentence) config.multi_sentence = *multi_sentence;
  if (max_segment_tokens) config.max_segment_tokens = *max_segment_tokens;
  if (pooling) config.pooling = *pooling;
  if (rel_aggregation) config.decode.rel_aggregation = *rel_aggregation;
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    config.validate();
    require_file(config.paths.train, "train corpus");
    if (!config.paths.dev.empty()) require_file(config.paths.dev, "dev corpus");
    if (!config.paths.test.empty()) require_file(config.paths.test, "test corpus");
    std::filesystem::path out_dir = config.paths.output_dir;
    if (out_dir.empty()) out_dir = config.paths.checkpoint.parent_path();
    if (out_dir.empty() && config.paths.checkpoint.empty()) throw PathError("paths.output_dir or paths.checkpoint is required");
    if (out_dir.empty()) out_dir = ".";

    const Corpus train = load_corpus(config.paths.train);
    const LabelSchema schema = schema_from_corpus(train);
    std::optional<Corpus> dev, test;
    if (!config.paths.dev.empty()) dev = load_corpus(config.paths.dev, schema);
    if (!config.paths.test.empty()) test = load_corpus(config.paths.test, schema);
    const Corpus& final_eval = test ? *test : dev ? *dev : train;
    const std::string final_name = test ? "test" : dev ? "dev" : "train";

    std::filesystem::create_directories(out_dir);
    std::vector<Metrics> entity_runs;
    std::vector<std::vector<Metrics>> relation_runs(config.criteria.size());
    for (int r = 0; r < config.runs; ++r) {
      RunConfig rc = config;
      rc.train.seed += static_cast<std::uint64_t>(r);
      rc.model.seed += static_cast<std::uint64_t>(r);
      rc.model.encoder.seed += static_cast<std::uint64_t>(r);
      const std::filesystem::path dir = config.runs == 1 ? out_dir : out_dir / ("run" + std::to_string(r + 1));
      std::filesystem::create_directories(dir);

      Model model = Model::from_corpus(rc.model, train);
      std::ostringstream log;
      FitResult fr = fit(model, train, dev ? &*dev : nullptr, rc.train, [&](const EpochLog& e) {
        log << e.to_json().dump() << '\n';
        out << "run " << r + 1 << " epoch " << e.epoch << " loss " << e.train_loss;
        if (e.has_dev) out << " dev entity F1 " << e.dev_entity.f1 << " relation F1 " << e.dev_relation.f1;
        out << '\n';
        return true;
      });
      write_text(dir / "train_log.jsonl", log.str());
      const std::filesystem::path ckpt =
          config.runs == 1 && !config.paths.checkpoint.empty() ? config.paths.checkpoint : dir / "checkpoint.json";
      model.save(ckpt, {{"train_config", rc.train.to_json()}, {"best_epoch", fr.best_epoch}});

      nlohmann::json metrics = {{"best_epoch", fr.best_epoch}, {"steps", fr.steps}};
      if (dev) metrics["dev"] = evaluate_model(model, *dev, config.criteria).to_json();
      EvaluationReport fin = evaluate_model(model, final_eval, config.criteria);
      metrics[final_name] = fin.to_json();
      write_text(dir / "metrics.json", metrics.dump(2) + "\n");
      out << final_name << " metrics (run " << r + 1 << ")\n" << render_report(fin);
      entity_runs.push_back(fin.entity);
      for (std::size_t c = 0; c < config.criteria.size(); ++c) relation_runs[c].push_back(fin.relation[c].second);
    }

    if (config.runs > 1) {
      MetricsSummary ent = aggregate_runs(entity_runs);
      std::vector<std::pair<Criterion, MetricsSummary>> rel;
      nlohmann::json rel_json = nlohmann::json::object();
      for (std::size_t c = 0; c < config.criteria.size(); ++c) {
        rel.emplace_back(config.criteria[c], aggregate_runs(relation_runs[c]));
        rel_json[to_string(config.criteria[c])] = rel.back().second.to_json();
      }
      nlohmann::json summary = {{"corpus", final_name}, {"entity", ent.to_json()}, {"relation", rel_json}};
      write_text(out_dir / "summary.json", summary.dump(2) + "\n");
      out << final_name << " summary over " << config.runs << " runs\n" << render_summary(ent, rel);
    }
    return kExitOk;
  });
}

nlohmann::json prediction_record(const std::string& doc_id, int sentence, const Sentence& annotated,
                                 const SentencePrediction& prediction, const LabelSchema& schema,
                                 RelAggregation aggregation, bool cell_probs) {
  nlohmann::json d = document_to_json(Document{doc_id, {annotated}});
  nlohmann::json j = d.at("sentences").at(0);
  j["id"] = doc_id;
  j["sentence"] = sentence;
  j["rel_aggregation"] = to_string(aggregation);
  if (cell_probs) {
    nlohmann::json labels = nlohmann::json::array();
    for (int r = 0; r < schema.num_relation_labels(); ++r) labels.push_back(schema.relation_label_name(r));
    nlohmann::json cells = nlohmann::json::array();
    const RelScoreTable& s = prediction.scores;
    for (int i = 0; i < s.size(); ++i) {
      for (int k = i + 1; k < s.size(); ++k) {
        std::vector<double> p(s.num_labels());
        for (int r = 0; r < s.num_labels(); ++r) p[r] = s.prob(i, k, r);
        cells.push_back({{"i", i}, {"j", k}, {"p", p}});
      }
    }
    j["cell_probs"] = {{"labels", labels}, {"cells", cells}};
  }
  return j;
}

Corpus read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open predictions: " + path.string());
  Corpus corpus;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(CorpusError::Kind::kParse, line, std::string("invalid JSON: ") + e.what());
    }
    if (j.contains("sentences")) {
      corpus.push_back(document_from_json(j, nullptr, line));
      continue;
    }
    const std::string id = j.value("id", std::string());
    nlohmann::json doc = {{"id", id}, {"sentences", nlohmann::json::array({j})}};
    Document d = document_from_json(doc, nullptr, line);
    const int k = j.value("sentence", -1);
    if (!corpus.empty() && corpus.back().id == id && k != 0) {
      if (k >= 0 && k != static_cast<int>(corpus.back().sentences.size())) {
        throw AlignmentError("line " + std::to_string(line) + ": sentence " + std::to_string(k) + " out of order");
      }
      corpus.back().sentences.push_back(std::move(d.sentences.front()));
    } else {
      corpus.push_back(std::move(d));
    }
  }
  return corpus;
}

int cmd_predict(const PredictOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(options.checkpoint, "checkpoint");
    require_file(options.input, "input corpus");
    if (options.output.empty()) throw PathError("output path is required");
    Model model = Model::load(options.checkpoint);
    options.overrides.apply(model.mutable_config());
    const Corpus corpus = load_corpus(options.input, model.schema());
    const RelAggregation agg = model.config().decode.rel_aggregation;

    std::ostringstream buf;
    long sentences = 0;
    for (const Document& doc : corpus) {
      DocumentPrediction p = model.predict(doc);
      for (const SegmentWarning& w : p.warnings) err << "warning: document '" << doc.id << "': " << w.message << '\n';
      for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
        const SentencePrediction& sp = p.sentences[k];
        Sentence annotated = to_annotated_sentence(doc.sentences[k].words, sp.spans, sp.triples, model.schema());
        buf << prediction_record(doc.id, static_cast<int>(k), annotated, sp, model.schema(), agg, options.cell_probs).dump()
            << '\n';
        ++sentences;
      }
    }
    if (options.output.has_parent_path()) std::filesystem::create_directories(options.output.parent_path());
    write_text(options.output, buf.str());
    out << "wrote " << sentences << " sentence predictions to " << options.output.string() << '\n';
    return kExitOk;
  });
}

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(options.gold, "gold corpus");
    require_file(options.predictions, "predictions");
    if (options.criteria.empty()) throw std::invalid_argument("at least one criterion is required");
    const Corpus gold = load_corpus(options.gold);
    const Corpus pred = read_predictions(options.predictions);
    const LabelSchema schema = union_schema(gold, pred);
    EvaluationReport report = evaluate_corpus(gold, pred, schema, options.criteria);
    out << render_report(report);
    if (!options.report.empty()) write_text(options.report, report.to_json().dump(2) + "\n");
    return kExitOk;
  });
}

Corpus sample_corpus() {
  auto sent = [](std::vector<std::string> words, std::vector<EntityAnnotation> ents,
                 std::vector<RelationAnnotation> rels) { return Sentence{std::move(words), std::move(ents), std::move(rels)}; };
  Corpus c;
  c.push_back({"d1",
               {sent({"Johanson", "Smith", "lives", "in", "London"}, {{0, 2, "Person"}, {4, 5, "Location"}},
                     {{0, 1, "LiveIn"}}),
                sent({"Maria", "Garcia", "works", "for", "Acme", "Corp"}, {{0, 2, "Person"}, {4, 6, "Organization"}},
                     {{0, 1, "WorkFor"}}),
                sent({"Paris", "is", "home", "to", "Pierre"}, {{0, 1, "Location"}, {4, 5, "Person"}}, {{1, 0, "LiveIn"}})}});
  c.push_back({"d2",
               {sent({"Kenji", "Tanaka", "moved", "to", "Tokyo", "last", "year"}, {{0, 2, "Person"}, {4, 5, "Location"}},
                     {{0, 1, "LiveIn"}}),
                sent({"The", "engineer", "Anna", "Berg", "joined", "Nordic", "Systems", "in", "Oslo"},
                     {{2, 4, "Person"}, {5, 7, "Organization"}, {8, 9, "Location"}}, {{0, 1, "WorkFor"}, {0, 2, "LiveIn"}}),
                sent({"Omar", "lives", "near", "Cairo"}, {{0, 1, "Person"}, {3, 4, "Location"}}, {{0, 1, "LiveIn"}}),
                sent({"Globex", "hired", "David", "Chen"}, {{0, 1, "Organization"}, {2, 4, "Person"}}, {{1, 0, "WorkFor"}})}});
  c.push_back({"d3",
               {sent({"Yesterday", "it", "rained", "heavily"}, {}, {}),
                sent({"Lena", "Fischer", ",", "a", "Berlin", "resident", ",", "works", "at", "Siemens"},
                     {{0, 2, "Person"}, {4, 5, "Location"}, {9, 10, "Organization"}}, {{0, 1, "LiveIn"}, {0, 2, "WorkFor"}}),
                sent({"Rome"}, {{0, 1, "Location"}}, {})}});
  return c;
}

int cmd_grad_check(const GradCheckCommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!options.input.empty()) require_file(options.input, "input corpus");
    if (options.sentences < 1) throw std::invalid_argument("sentences must be at least 1");
    const Corpus corpus = options.input.empty() ? sample_corpus() : load_corpus(options.input);
    std::vector<Sentence> sample;
    for (const Document& d : corpus) {
      for (const Sentence& s : d.sentences) {
        if (static_cast<int>(sample.size()) < options.sentences) sample.push_back(s);
      }
    }
    if (sample.empty()) throw std::invalid_argument("grad-check needs at least one sentence");
    Model model = Model::from_corpus(options.config.model, corpus);
    GradCheckOptions gc;
    gc.tolerance = options.tolerance;
    gc.max_entries_per_block = options.max_entries_per_block;
    gc.seed = options.config.train.seed;
    gc.reduction = options.config.train.loss_reduction;
    GradCheckReport report = grad_check(model, sample, gc);
    for (const auto& b : report.blocks) {
      out << b.name << "  entries " << b.entries << "  rel_error " << b.rel_error << "  max_abs " << b.max_abs_error
          << '\n';
    }
    out << "max relative error " << report.max_rel_error << " (" << report.worst_block << "), tolerance "
        << report.tolerance << ": " << (report.passed ? "PASS" : "FAIL") << '\n';
    return report.passed ? kExitOk : kExitFailure;
  });
}

int cmd_dump_table(const DumpTableOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(options.input, "input corpus");
    if (!options.checkpoint.empty()) require_file(options.checkpoint, "checkpoint");
    std::optional<Model> model;
    if (!options.checkpoint.empty()) {
      model.emplace(Model::load(options.checkpoint));
      options.overrides.apply(model->mutable_config());
    }
    const Corpus corpus = model ? load_corpus(options.input, model->schema()) : load_corpus(options.input);
    if (corpus.empty()) return kExitOk;
    const LabelSchema schema = model ? model->schema() : schema_from_corpus(corpus);
    bool found = options.document.empty();
    for (const Document& doc : corpus) {
      if (!options.document.empty() && doc.id != options.document) continue;
      found = true;
      std::optional<DocumentPrediction> pred;
      if (model) pred = model->predict(doc);
      for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
        const Sentence& s = doc.sentences[k];
        out << "# " << doc.id << " sentence " << k << " gold\n";
        out << render_table(build_gold_table(s, schema), s.words, schema);
        if (pred) {
          const SentencePrediction& sp = pred->sentences[k];
          LabelTable t;
          t.n = static_cast<int>(s.size());
          t.diag = sp.entity_labels;
          for (int i = 0; i < t.n; ++i) {
            for (int j = i + 1; j < t.n; ++j) {
              if (sp.cells.at(i, j) != LabelSchema::kNoRelation) t.rel[{i, j}] = sp.cells.at(i, j);
            }
          }
          out << "# " << doc.id << " sentence " << k << " predicted\n";
          out << render_table(t, s.words, schema);
        }
      }
    }
    if (!found) throw std::invalid_argument("document not found: " + options.document);
    return kExitOk;
  });
}

}  // namespace tablefill
