#include "qemind/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "qemind/core.hpp"
#include "qemind/ensemble.hpp"
#include "qemind/eval.hpp"
#include "qemind/features.hpp"
#include "qemind/glassbox.hpp"
#include "qemind/head.hpp"
#include "qemind/io.hpp"
#include "qemind/similarity.hpp"

namespace qemind::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kFormats = R"(File formats:
  dataset TSV     header 'id<TAB>lang_pair<TAB>src<TAB>mt<TAB>label'; whitespace-tokenized
                  text; DA labels are decimals, CED labels are NOT/ERR
  corpus          train-toy-model: one 'src<TAB>tgt' pair per line
                  build-mlm: one sentence per line
  feature TSV     header 'id' + 21 feature names; values as %.17g
  feature config  JSON: n_mc, dropout_rate, n_noise, noise_rounds, p_insert,
                  p_delete, base_seed
  head config     JSON: learning_rate, epochs, l2_reg, embedding_dim
  embeddings TSV  'id<TAB>v1<TAB>...<TAB>vD' per line (optional 'id' header)
  predictions TSV header 'id<TAB>score'; CED scores are P(ERR))";

struct Options {
  // shared
  std::string task;
  std::string output;
  std::string data;
  std::string model;
  std::string features;
  std::string config;
  std::string embeddings;
  std::uint64_t seed = 0;
  bool seed_given = false;
  // train-toy-model / build-mlm
  std::string corpus;
  double alpha = 0.1;
  double lambda = 0.7;
  // extract
  std::string mlm;
  std::size_t workers = 1;
  // evaluate
  std::string preds;
  std::string gold;
  bool by_pair = false;
  std::string json_out;
  // ensemble
  std::vector<std::string> pred_files;
  std::string dev;
  std::size_t max_steps = 5;
  std::string report;
  // upsample / mix
  std::string input;
  std::vector<std::string> inputs;
  std::string strategy;
  // sim
  std::string ref;
  std::string hyp;
};

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

Task task_or_detect(const std::string& task, const std::string& path) {
  return task.empty() ? detect_task(path) : parse_task(task);
}

int cmd_train_toy_model(const Options& o, std::ostream& out) {
  const auto corpus = load_parallel_corpus(o.corpus);
  const auto model = train_toy_model(corpus, o.alpha, o.lambda);
  model.save(o.output);
  out << "train-toy-model: " << corpus.size() << " pairs, |src_vocab|=" << model.src_vocab().size()
      << " |tgt_vocab|=" << model.tgt_vocab().size() << " -> " << o.output << '\n';
  return 0;
}

int cmd_build_mlm(const Options& o, std::ostream& out) {
  const auto corpus = load_monolingual_corpus(o.corpus);
  const auto mlm = UnigramMlm::build(corpus);
  mlm.save(o.output);
  out << "build-mlm: " << mlm.vocab().size() << " types -> " << o.output << '\n';
  return 0;
}

int cmd_extract(const Options& o, std::ostream& out) {
  const auto ds = load_dataset(o.data, task_or_detect(o.task, o.data));
  const auto model = ToyLexicalModel::load(o.model);
  const auto mlm = UnigramMlm::load(o.mlm);
  auto cfg = o.config.empty() ? FeatureConfig{} : FeatureConfig::load(o.config);
  if (o.seed_given) cfg.base_seed = o.seed;
  const auto rows = extract_dataset(ds, model, mlm, cfg, o.workers);
  std::ostringstream buf;
  write_feature_tsv(rows, buf);
  io::write_file_atomic(o.output, buf.str());
  out << "extract: " << rows.size() << " rows, base_seed=" << cfg.base_seed << ", workers=" << o.workers << " -> "
      << o.output << '\n';
  return 0;
}

std::unique_ptr<Encoder> make_encoder(const std::string& embeddings, std::size_t dim) {
  if (!embeddings.empty()) return std::make_unique<TableEncoder>(TableEncoder::load_tsv(embeddings));
  return std::make_unique<ToyEncoder>(dim);
}

int cmd_train(const Options& o, std::ostream& out) {
  const Task task = parse_task(o.task);
  const auto ds = load_dataset(o.data, task);
  const auto feats = index_features(read_feature_tsv(o.features));
  HeadHyper hyper;
  std::size_t dim = kDefaultEmbeddingDim;
  if (!o.config.empty()) {
    const auto j = nlohmann::json::parse(io::read_file(o.config));
    hyper = HeadHyper::from_json(j);
    dim = j.value("embedding_dim", dim);
  }
  const auto encoder = make_encoder(o.embeddings, dim);
  std::vector<double> losses;
  const auto model = train_head(ds, feats, hyper, *encoder, &losses);
  model.save(o.output);
  out << "train: " << ds.samples.size() << " samples, " << hyper.epochs << " epochs";
  if (!losses.empty()) out << ", loss " << losses.front() << " -> " << losses.back();
  out << " -> " << o.output << '\n';
  return 0;
}

int cmd_predict(const Options& o, std::ostream& out) {
  const auto model = HeadModel::load(o.model);
  const auto ds = load_dataset(o.data, model.task);
  const auto feats = index_features(read_feature_tsv(o.features));
  if (model.encoder.type != "toy" && o.embeddings.empty()) {
    throw Error("model was trained on external embeddings; pass --embeddings");
  }
  const auto encoder = make_encoder(o.embeddings, model.encoder.dim);
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& s : ds.samples) {
    const auto it = feats.find(s.id);
    if (it == feats.end()) throw Error("no features for sample " + s.id);
    rows.emplace_back(s.id, predict(model, s, it->second, *encoder));
  }
  save_predictions(rows, o.output);
  out << "predict: " << rows.size() << " rows -> " << o.output << '\n';
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const auto gold = load_dataset(o.gold, parse_task(o.task));
  const auto report = evaluate(load_predictions(o.preds), gold);
  out << report.to_text(o.by_pair);
  if (!o.json_out.empty()) io::write_file_atomic(o.json_out, report.to_json().dump(2) + "\n");
  return 0;
}

int cmd_ensemble(const Options& o, std::ostream& out) {
  const auto dev = load_dataset(o.dev, parse_task(o.task));
  std::vector<PredictionSet> candidates;
  for (const auto& f : o.pred_files) candidates.push_back({stem_of(f), load_predictions(f)});
  const auto sel = greedy_select(candidates, dev, o.max_steps);

  std::vector<PredictionSet> chosen;
  for (const auto& id : sel.members) {
    chosen.push_back(*std::find_if(candidates.begin(), candidates.end(), [&](const auto& c) { return c.model_id == id; }));
  }
  const auto avg = average_predictions(chosen);
  std::vector<std::pair<std::string, double>> rows(avg.scores.begin(), avg.scores.end());
  std::sort(rows.begin(), rows.end());
  save_predictions(rows, o.output);
  const std::string report = o.report.empty() ? o.output + ".selection.json" : o.report;
  io::write_file_atomic(report, sel.to_json().dump(2) + "\n");

  out << "ensemble: " << sel.members.size() << " members:";
  for (std::size_t i = 0; i < sel.members.size(); ++i) out << ' ' << sel.members[i] << '=' << sel.trajectory[i];
  out << " -> " << o.output << '\n';
  return 0;
}

int cmd_upsample(const Options& o, std::ostream& out) {
  const auto ds = load_dataset(o.input, Task::CED);
  const auto up = upsample_minority(ds, o.seed);
  save_dataset(up, o.output);
  out << "upsample: seed=" << o.seed << ", " << ds.samples.size() << " -> " << up.samples.size() << " samples -> "
      << o.output << '\n';
  return 0;
}

int cmd_mix(const Options& o, std::ostream& out) {
  std::vector<Dataset> parts;
  for (const auto& f : o.inputs) parts.push_back(load_dataset(f, task_or_detect(o.task, f)));
  const auto mixed = mix_multilingual(parts, parse_mix_strategy(o.strategy));
  save_dataset(mixed, o.output);
  out << "mix: " << mixed.samples.size() << " samples (" << o.strategy << ") -> " << o.output << '\n';
  return 0;
}

int cmd_sim(const Options& o, std::ostream& out) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", sim(tokenize(o.ref), tokenize(o.hyp)));
  out << buf << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"qemind: uncertainty features and quality estimation for machine translation", "qemind"};
  app.footer(kFormats);
  app.require_subcommand(1);
  Options o;
  const auto existing = CLI::ExistingFile;

  auto* toy = app.add_subcommand("train-toy-model", "Train the toy lexical translation model from a parallel corpus");
  toy->add_option("--corpus", o.corpus, "Parallel corpus (src<TAB>tgt per line)")->required()->check(existing);
  toy->add_option("--alpha", o.alpha, "Add-alpha smoothing constant (> 0)")->capture_default_str();
  toy->add_option("--lambda", o.lambda, "Translation vs. bigram interpolation weight in [0, 1]")->capture_default_str();
  toy->add_option("--output", o.output, "Model JSON to write")->required();

  auto* mlm = app.add_subcommand("build-mlm", "Build the unigram masked-LM stub from a corpus");
  mlm->add_option("--corpus", o.corpus, "Text corpus, one sentence per line")->required()->check(existing);
  mlm->add_option("--output", o.output, "MLM JSON to write")->required();

  auto* ext = app.add_subcommand("extract", "Extract the 21 uncertainty features for every sample");
  ext->add_option("--data", o.data, "Dataset TSV")->required()->check(existing);
  ext->add_option("--model", o.model, "Toy model JSON")->required()->check(existing);
  ext->add_option("--mlm", o.mlm, "MLM stub JSON")->required()->check(existing);
  ext->add_option("--config", o.config, "Feature config JSON (defaults when omitted)")->check(existing);
  ext->add_option("--output", o.output, "Feature TSV to write")->required();
  ext->add_option("--workers", o.workers, "Worker threads; output is identical for any count")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ext->add_option("--task", o.task, "da|ced (detected from labels when omitted)");
  ext->add_option("--seed", o.seed, "Override base_seed from the config")->each([&](const std::string&) {
    o.seed_given = true;
  });

  auto* train = app.add_subcommand("train", "Train the feature-fused linear head");
  train->add_option("--task", o.task, "da|ced")->required();
  train->add_option("--data", o.data, "Training dataset TSV")->required()->check(existing);
  train->add_option("--features", o.features, "Feature TSV aligned by id")->required()->check(existing);
  train->add_option("--embeddings", o.embeddings, "External embedding TSV replacing the toy encoder")->check(existing);
  train->add_option("--config", o.config, "Head config JSON (defaults when omitted)")->check(existing);
  train->add_option("--output", o.output, "Head model JSON to write")->required();

  auto* pred = app.add_subcommand("predict", "Score a dataset with a trained head");
  pred->add_option("--model", o.model, "Head model JSON")->required()->check(existing);
  pred->add_option("--data", o.data, "Dataset TSV")->required()->check(existing);
  pred->add_option("--features", o.features, "Feature TSV aligned by id")->required()->check(existing);
  pred->add_option("--embeddings", o.embeddings, "External embedding TSV (for externally-encoded models)")
      ->check(existing);
  pred->add_option("--output", o.output, "Prediction TSV to write")->required();

  auto* ev = app.add_subcommand("evaluate", "Pearson (DA) or MCC (CED) against gold labels");
  ev->add_option("--task", o.task, "da|ced")->required();
  ev->add_option("--preds", o.preds, "Prediction TSV")->required()->check(existing);
  ev->add_option("--gold", o.gold, "Gold dataset TSV")->required()->check(existing);
  ev->add_flag("--by-pair", o.by_pair, "Also print per-language-pair values");
  ev->add_option("--json", o.json_out, "Also write the report as JSON");

  auto* ens = app.add_subcommand("ensemble", "Greedy forward ensemble over prediction files");
  ens->add_option("--task", o.task, "da|ced")->required();
  ens->add_option("--preds", o.pred_files, "Candidate prediction TSVs (model id = file stem)")
      ->required()
      ->check(existing);
  ens->add_option("--dev", o.dev, "Development dataset TSV")->required()->check(existing);
  ens->add_option("--max-steps", o.max_steps, "Maximum ensemble size")->capture_default_str()->check(CLI::PositiveNumber);
  ens->add_option("--output", o.output, "Averaged prediction TSV to write")->required();
  ens->add_option("--report", o.report, "Selection report JSON (default: <output>.selection.json)");

  auto* up = app.add_subcommand("upsample", "Balance NOT/ERR per language pair by duplicating the minority class");
  up->add_option("--input", o.input, "CED dataset TSV")->required()->check(existing);
  up->add_option("--seed", o.seed, "Seed for the remainder draw")->required();
  up->add_option("--output", o.output, "Dataset TSV to write")->required();

  auto* mix = app.add_subcommand("mix", "Concatenate datasets for multilingual training");
  mix->add_option("--strategy", o.strategy, "as-is|english-first")
      ->required()
      ->check(CLI::IsMember({"as-is", "english-first"}));
  mix->add_option("--inputs", o.inputs, "Dataset TSVs")->required()->check(existing);
  mix->add_option("--task", o.task, "da|ced (detected from labels when omitted)");
  mix->add_option("--output", o.output, "Dataset TSV to write")->required();

  auto* sm = app.add_subcommand("sim", "Print the exact-match Meteor similarity of two token strings");
  sm->add_option("--ref", o.ref, "Reference tokens")->required();
  sm->add_option("--hyp", o.hyp, "Hypothesis tokens")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    CLI::App* target = &app;
    for (auto* sub : app.get_subcommands()) target = sub;
    err << target->help();
    return 2;
  }

  const auto* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    if (name == "train-toy-model") return cmd_train_toy_model(o, out);
    if (name == "build-mlm") return cmd_build_mlm(o, out);
    if (name == "extract") return cmd_extract(o, out);
    if (name == "train") return cmd_train(o, out);
    if (name == "predict") return cmd_predict(o, out);
    if (name == "evaluate") return cmd_evaluate(o, out);
    if (name == "ensemble") return cmd_ensemble(o, out);
    if (name == "upsample") return cmd_upsample(o, out);
    if (name == "mix") return cmd_mix(o, out);
    if (name == "sim") return cmd_sim(o, out);
  } catch (const Error& e) {
    err << name << ": " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << name << ": invalid JSON: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << name << ": " << e.what() << '\n';
    return 1;
  }
  err << "unknown subcommand " << name << '\n';
  return 2;
}

}  // namespace qemind::cli
