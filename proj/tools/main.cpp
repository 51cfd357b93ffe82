#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bullysense/corpus.hpp"
#include "bullysense/manifest.hpp"
#include "bullysense/metrics.hpp"
#include "bullysense/models.hpp"
#include "bullysense/sensor.hpp"
#include "bullysense/sha256.hpp"
#include "bullysense/textprep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bullysense;

namespace {

json counts_json(const corpus::LabelCounts& c) {
  return json{{"total", c.total}, {"insulting", c.insulting}, {"neutral", c.neutral}};
}

int cmd_ingest(const std::string& train_csv, const std::string& test_csv,
               const std::string& out_dir) {
  cli::RunManifest manifest = cli::RunManifest::begin("ingest");
  manifest.add_input(train_csv);
  manifest.add_input(test_csv);

  corpus::Corpus train = corpus::load_source_csv(train_csv, corpus::Origin::kTrainFile);
  corpus::Corpus test = corpus::load_source_csv(test_csv, corpus::Origin::kTestFile);
  corpus::Corpus merged = corpus::merge({train, test}, "train_merged");

  fs::create_directories(out_dir);
  std::string merged_path = (fs::path(out_dir) / "train_merged.csv").string();
  corpus::write_csv(merged, merged_path);

  json stats{{"merged", counts_json(merged.counts)},
             {"train_file", counts_json(train.counts)},
             {"test_file", counts_json(test.counts)},
             {"merged_csv", merged_path}};
  std::string stats_path = (fs::path(out_dir) / "stats.json").string();
  write_text_file(stats_path, stats.dump(2) + "\n");

  manifest.parameters = {{"train_csv", train_csv}, {"test_csv", test_csv}};
  manifest.outputs = {merged_path, stats_path};
  manifest.finish_and_write(out_dir);

  std::cout << stats.dump(2) << "\n";
  return 0;
}

int cmd_split(const std::string& corpus_csv, const std::vector<double>& ratios, uint64_t seed,
              bool stratified, const std::string& out_dir) {
  cli::RunManifest manifest = cli::RunManifest::begin("split");
  manifest.add_input(corpus_csv);

  corpus::Corpus merged = corpus::load_source_csv(corpus_csv, corpus::Origin::kTrainFile);
  corpus::SplitSpec spec;
  if (ratios.size() != 3) throw ArgumentError("--ratios needs exactly three values");
  spec.ratios = {ratios[0], ratios[1], ratios[2]};
  spec.seed = seed;
  spec.stratified = stratified;
  corpus::SplitBundle bundle = corpus::split(merged, spec);

  fs::create_directories(out_dir);
  std::string manifest_path = (fs::path(out_dir) / "split_manifest.json").string();
  corpus::write_split_manifest(bundle, corpus_csv, sha256_file_hex(corpus_csv), manifest_path);

  manifest.parameters = {{"ratios", spec.ratios}, {"seed", seed}, {"stratified", stratified}};
  manifest.outputs = {manifest_path};
  manifest.finish_and_write(out_dir);

  std::cout << "split sizes: train " << bundle.train.records.size() << ", val "
            << bundle.val.records.size() << ", test " << bundle.test.records.size() << "\n"
            << "manifest: " << manifest_path << "\n";
  return 0;
}

struct TrainJobConfig {
  models::ModelKind kind;
  models::TrainConfig train;
  models::BuildOptions options;
  std::string corpus_csv;
  std::string split_manifest;
  std::optional<corpus::SplitSpec> split_spec;
  std::string assets_path;
  std::string stopwords_path;
  std::string embedding_id;
  int min_freq = 2;
  uint64_t embedding_seed = 1;
  std::string out_dir = "runs/model";
};

TrainJobConfig parse_train_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  TrainJobConfig cfg;
  try {
    const json& kind = j.at("kind");
    cfg.kind.variant = models::variant_from_name(kind.at("variant").get<std::string>());
    cfg.kind.use_pretrained_embeddings = kind.value("use_pretrained_embeddings", false);
    cfg.kind.checkpoint_id = kind.value("checkpoint_id", "");
    cfg.train = models::TrainConfig::from_json(j.value("train", json::object()));
    cfg.options = models::BuildOptions::defaults_for(cfg.kind);

    const json& data = j.at("data");
    cfg.corpus_csv = data.at("corpus_csv").get<std::string>();
    cfg.split_manifest = data.value("split_manifest", "");
    if (cfg.split_manifest.empty()) {
      corpus::SplitSpec spec;
      if (data.contains("ratios")) {
        auto r = data.at("ratios");
        spec.ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
      }
      spec.seed = data.value("split_seed", cfg.train.seed);
      spec.stratified = data.value("stratified", true);
      cfg.split_spec = spec;
    }

    cfg.assets_path = j.value("assets", "");
    const json& prep = j.value("preprocess", json::object());
    if (prep.contains("remove_stopwords"))
      cfg.options.profile.remove_stopwords = prep.at("remove_stopwords").get<bool>();
    if (prep.contains("lowercase"))
      cfg.options.profile.clean.lowercase = prep.at("lowercase").get<bool>();
    if (prep.contains("strip_punctuation"))
      cfg.options.profile.clean.strip_punctuation = prep.at("strip_punctuation").get<bool>();
    cfg.stopwords_path = prep.value("stopwords", "data/stopwords_en.txt");

    const json& bl = j.value("bilstm", json::object());
    cfg.options.bilstm_hidden = bl.value("hidden", cfg.options.bilstm_hidden);
    cfg.options.bilstm_dropout = bl.value("dropout", cfg.options.bilstm_dropout);
    cfg.options.bilstm_embed_dim = bl.value("embed_dim", cfg.options.bilstm_embed_dim);
    cfg.min_freq = bl.value("min_freq", cfg.min_freq);
    cfg.embedding_id = bl.value("embedding_id", "");
    cfg.embedding_seed = bl.value("embedding_seed", cfg.embedding_seed);

    const json& tf = j.value("transformer", json::object());
    cfg.options.transformer_dropout = tf.value("dropout", cfg.options.transformer_dropout);

    cfg.out_dir = j.value("out_dir", cfg.out_dir);
  } catch (const json::exception& e) {
    throw ConfigError("train config " + path + ": " + e.what());
  }
  return cfg;
}

json log_to_json(const models::TrainingLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs)
    epochs.push_back(json{{"train_loss", e.train_loss},
                          {"val_accuracy", e.val_accuracy},
                          {"val_macro_f1", e.val_macro_f1}});
  return json{{"epochs", epochs}, {"best_epoch", log.best_epoch}};
}

int cmd_train(const std::string& config_path, const std::string& out_override,
              std::optional<uint64_t> seed_override) {
  TrainJobConfig cfg = parse_train_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_override) cfg.train.seed = *seed_override;

  cli::RunManifest manifest = cli::RunManifest::begin("train");
  manifest.add_input(config_path);
  manifest.add_input(cfg.corpus_csv);

  corpus::Corpus merged = corpus::load_source_csv(cfg.corpus_csv, corpus::Origin::kTrainFile);
  corpus::SplitBundle bundle;
  if (!cfg.split_manifest.empty()) {
    manifest.add_input(cfg.split_manifest);
    corpus::SplitManifest sm = corpus::read_split_manifest(cfg.split_manifest);
    if (!sm.corpus_sha256.empty()) {
      if (sha256_file_hex(cfg.corpus_csv) != sm.corpus_sha256)
        throw DataError("corpus file does not match the split manifest hash");
    }
    bundle = corpus::materialize_split(merged, sm);
  } else {
    bundle = corpus::split(merged, *cfg.split_spec);
  }

  models::AssetLocator assets = cfg.assets_path.empty()
                                    ? models::AssetLocator::empty()
                                    : models::AssetLocator::load(cfg.assets_path);

  models::BiLstmData data;
  data.stopwords = textprep::StopwordList::load(cfg.stopwords_path);
  if (cfg.kind.variant == models::ModelVariant::kBiLstm) {
    std::vector<std::vector<std::string>> token_lists;
    for (const auto& r : bundle.train.records) {
      auto tokens =
          textprep::word_tokenize(textprep::clean_text(r.text, cfg.options.profile.clean));
      if (cfg.options.profile.remove_stopwords)
        tokens = textprep::remove_stop_and_single(tokens, data.stopwords);
      token_lists.push_back(std::move(tokens));
    }
    data.vocab = textprep::Vocabulary::build(token_lists, cfg.min_freq);
    if (cfg.kind.use_pretrained_embeddings) {
      if (cfg.embedding_id.empty())
        throw ConfigError("bilstm.embedding_id is required when use_pretrained_embeddings=true");
      std::string vec_path = assets.resolve(cfg.embedding_id);
      data.embeddings = textprep::load_embedding_file(
          vec_path, data.vocab, cfg.options.bilstm_embed_dim, cfg.embedding_seed);
    }
  }

  models::ModelHandle handle =
      models::build_model(cfg.kind, cfg.train, assets, cfg.options, std::move(data));
  models::TrainResult result = models::train(std::move(handle), bundle);

  fs::create_directories(cfg.out_dir);
  std::string model_dir = (fs::path(cfg.out_dir) / "model").string();
  models::save_model(result.model, model_dir);
  std::string log_path = (fs::path(cfg.out_dir) / "training_log.json").string();
  write_text_file(log_path, log_to_json(result.log).dump(2) + "\n");
  std::string split_path = (fs::path(cfg.out_dir) / "split_manifest.json").string();
  corpus::write_split_manifest(bundle, cfg.corpus_csv, sha256_file_hex(cfg.corpus_csv),
                               split_path);

  manifest.parameters = {{"kind", cfg.kind.id()},
                         {"train", cfg.train.to_json()},
                         {"split",
                          {{"seed", bundle.spec.seed},
                           {"ratios", bundle.spec.ratios},
                           {"stratified", bundle.spec.stratified}}}};
  manifest.outputs = {model_dir, log_path, split_path};
  manifest.finish_and_write(cfg.out_dir);

  int best = result.log.best_epoch;
  std::cout << "trained " << cfg.kind.id() << ": " << result.log.epochs.size()
            << " epochs, best epoch " << best << " (val macro-F1 "
            << result.log.epochs[static_cast<size_t>(best)].val_macro_f1 << ")\n"
            << "model: " << model_dir << "\n";
  return 0;
}

int cmd_evaluate(const std::string& model_dir, const std::string& split_manifest_path,
                 const std::string& corpus_override, const std::string& out_dir) {
  cli::RunManifest manifest = cli::RunManifest::begin("evaluate");
  manifest.add_input(split_manifest_path);

  corpus::SplitManifest sm = corpus::read_split_manifest(split_manifest_path);
  std::string corpus_csv = corpus_override.empty() ? sm.corpus_path : corpus_override;
  if (corpus_csv.empty())
    throw ArgumentError("split manifest has no corpus path; pass --corpus");
  manifest.add_input(corpus_csv);
  if (corpus_override.empty() && !sm.corpus_sha256.empty()) {
    if (sha256_file_hex(corpus_csv) != sm.corpus_sha256)
      throw DataError("corpus file does not match the split manifest hash");
  }

  corpus::Corpus merged = corpus::load_source_csv(corpus_csv, corpus::Origin::kTrainFile);
  corpus::SplitBundle bundle = corpus::materialize_split(merged, sm);

  models::TrainedModel model = models::load_model(model_dir);
  std::vector<std::string> texts;
  std::vector<Label> gold;
  for (const auto& r : bundle.test.records) {
    texts.push_back(r.text);
    gold.push_back(r.label);
  }
  std::vector<Label> pred = model.predict_labels(texts, model.config.decision_threshold);
  eval::ClassificationReport report = eval::report(model.kind.id(), gold, pred);

  fs::create_directories(out_dir);
  std::string report_path = (fs::path(out_dir) / "report.json").string();
  write_text_file(report_path, eval::report_to_json(report).dump(2) + "\n");

  manifest.parameters = {{"model_dir", model_dir},
                         {"threshold", model.config.decision_threshold}};
  manifest.outputs = {report_path};
  manifest.finish_and_write(out_dir);

  std::cout << eval::report_to_json(report).dump(2) << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::string>& report_paths, const std::string& baseline_path,
                const std::string& out_dir) {
  cli::RunManifest manifest = cli::RunManifest::begin("compare");
  std::vector<eval::ClassificationReport> reports;
  for (const auto& p : report_paths) {
    manifest.add_input(p);
    reports.push_back(eval::report_from_json(json::parse(read_text_file(p))));
  }
  std::optional<eval::ComparisonRow> baseline;
  if (!baseline_path.empty()) {
    manifest.add_input(baseline_path);
    baseline = eval::baseline_row_from_json(json::parse(read_text_file(baseline_path)));
  }

  eval::ComparisonTable table = eval::compare(reports, baseline);
  std::vector<std::string> files = eval::render_charts(table, out_dir);

  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back(json{{"model_id", r.model_id},
                        {"accuracy", r.accuracy},
                        {"macro_f1", r.macro_f1},
                        {"baseline", r.is_baseline}});
  std::string table_path = (fs::path(out_dir) / "comparison_table.json").string();
  write_text_file(table_path, rows.dump(2) + "\n");
  files.push_back(table_path);

  manifest.outputs = files;
  manifest.finish_and_write(out_dir);

  std::cout << rows.dump(2) << "\n";
  return 0;
}

int cmd_predict(const std::string& model_dir, const std::string& text, const std::string& file,
                double threshold) {
  models::TrainedModel model = models::load_model(model_dir);
  auto scorer = std::make_shared<sentinel::ModelScorer>(std::move(model));
  sentinel::Sensor sensor(scorer, threshold, nullptr, 1 << 20);

  std::vector<std::string> texts;
  if (!text.empty()) texts.push_back(text);
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file);
    std::string line;
    while (std::getline(in, line)) texts.push_back(line);
  }
  if (texts.empty()) throw ArgumentError("predict needs --text or --file");

  for (const auto& t : texts) {
    sentinel::ScoreResult r = sensor.score(t);
    std::cout << sentinel::score_result_to_json(r).dump() << "\n";
  }
  return 0;
}

int cmd_serve(const std::string& config_path, const std::string& host, int port,
              const std::string& model_dir_override, double threshold_override) {
  sentinel::SentinelConfig cfg;
  if (!config_path.empty())
    cfg = sentinel::SentinelConfig::from_json(json::parse(read_text_file(config_path)));
  cfg.apply_env();
  if (!model_dir_override.empty()) cfg.model_dir = model_dir_override;
  if (threshold_override > 0.0) cfg.threshold = threshold_override;
  if (cfg.sink.target.empty()) cfg.sink = sentinel::SinkConfig::parse("jsonl:flags.jsonl");
  return sentinel::run_server(cfg, host, port);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"insult-comment classification pipeline and scoring sensor"};
  app.require_subcommand(1);

  std::string train_csv, test_csv, out_dir;
  auto* ingest = app.add_subcommand("ingest", "load the two source CSVs and merge them");
  ingest->add_option("--train", train_csv, "train.csv path")->required();
  ingest->add_option("--test", test_csv, "test_with_solutions.csv path")->required();
  ingest->add_option("--out", out_dir, "output directory")->required();

  std::string corpus_csv;
  std::vector<double> ratios{0.6, 0.2, 0.2};
  uint64_t seed = 42;
  bool no_stratify = false;
  auto* split = app.add_subcommand("split", "seeded train/val/test split");
  split->add_option("--corpus", corpus_csv, "merged corpus csv")->required();
  split->add_option("--ratios", ratios, "train val test fractions")->expected(3);
  split->add_option("--seed", seed, "shuffle seed");
  split->add_flag("--no-stratified", no_stratify, "disable stratification");
  split->add_option("--out", out_dir, "output directory")->required();

  std::string config_path, out_override;
  uint64_t seed_flag = 0;
  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "train config json")->required();
  train->add_option("--out", out_override, "override output directory");
  auto* seed_opt = train->add_option("--seed", seed_flag, "override training seed");

  std::string model_dir, split_manifest, corpus_flag;
  auto* evaluate = app.add_subcommand("evaluate", "score the test split and write a report");
  evaluate->add_option("--model", model_dir, "model artifact directory")->required();
  evaluate->add_option("--split", split_manifest, "split manifest json")->required();
  evaluate->add_option("--corpus", corpus_flag, "override corpus csv path");
  evaluate->add_option("--out", out_dir, "output directory")->required();

  std::vector<std::string> report_paths;
  std::string baseline_path;
  auto* compare = app.add_subcommand("compare", "comparison table and charts from reports");
  compare->add_option("--report", report_paths, "report json (repeatable)")->required();
  compare->add_option("--baseline", baseline_path, "baseline fixture json");
  compare->add_option("--out", out_dir, "output directory")->required();

  std::string text, file;
  double threshold = 0.5;
  auto* predict = app.add_subcommand("predict", "score ad-hoc text with a trained model");
  predict->add_option("--model", model_dir, "model artifact directory")->required();
  predict->add_option("--text", text, "single text to score");
  predict->add_option("--file", file, "file with one text per line");
  predict->add_option("--threshold", threshold, "decision threshold");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the scoring sensor service");
  serve->add_option("--config", config_path, "sentinel config json");
  serve->add_option("--host", host, "bind host");
  serve->add_option("--port", port, "bind port");
  serve->add_option("--model", model_dir, "model artifact directory");
  auto* serve_thr = serve->add_option("--threshold", threshold, "decision threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(ingest)) return cmd_ingest(train_csv, test_csv, out_dir);
    if (app.got_subcommand(split))
      return cmd_split(corpus_csv, ratios, seed, !no_stratify, out_dir);
    if (app.got_subcommand(train))
      return cmd_train(config_path, out_override,
                       seed_opt->count() > 0 ? std::optional<uint64_t>(seed_flag) : std::nullopt);
    if (app.got_subcommand(evaluate))
      return cmd_evaluate(model_dir, split_manifest, corpus_flag, out_dir);
    if (app.got_subcommand(compare)) return cmd_compare(report_paths, baseline_path, out_dir);
    if (app.got_subcommand(predict)) return cmd_predict(model_dir, text, file, threshold);
    if (app.got_subcommand(serve))
      return cmd_serve(config_path, host, port, model_dir,
                       serve_thr->count() > 0 ? threshold : 0.0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
