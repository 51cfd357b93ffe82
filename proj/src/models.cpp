#include "bullysense/models.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "bullysense/metrics.hpp"
#include "bullysense/nn/adamw.hpp"
#include "bullysense/nn/batch.hpp"
#include "bullysense/sha256.hpp"

namespace bullysense::models {

using nlohmann::json;
namespace fs = std::filesystem;
namespace tp = bullysense::textprep;

// --- names and validation --------------------------------------------------

std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::kBertBase: return "bert-base";
    case ModelVariant::kHateBert: return "hatebert";
    case ModelVariant::kRoberta: return "roberta";
    case ModelVariant::kBiLstm: return "bilstm";
  }
  throw ArgumentError("unknown model variant");
}

ModelVariant variant_from_name(const std::string& name) {
  if (name == "bert-base") return ModelVariant::kBertBase;
  if (name == "hatebert") return ModelVariant::kHateBert;
  if (name == "roberta") return ModelVariant::kRoberta;
  if (name == "bilstm") return ModelVariant::kBiLstm;
  throw ArgumentError("unknown model variant \"" + name + "\"");
}

std::string ModelKind::id() const {
  if (variant == ModelVariant::kBiLstm)
    return use_pretrained_embeddings ? "bilstm+fasttext" : "bilstm";
  return variant_name(variant);
}

void ModelKind::validate() const {
  if (use_pretrained_embeddings && variant != ModelVariant::kBiLstm)
    throw ConfigError("use_pretrained_embeddings is only valid for the bilstm variant");
  if (is_transformer() && checkpoint_id.empty())
    throw ConfigError("transformer variant \"" + variant_name(variant) +
                      "\" requires a checkpoint_id");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (max_len < 1) throw ConfigError("max_len must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (early_stop_metric != "val_macro_f1")
    throw ConfigError("unsupported early_stop_metric \"" + early_stop_metric + "\"");
  if (patience < 1) throw ConfigError("patience must be positive");
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0))
    throw ConfigError("decision_threshold must be in (0,1)");
}

json TrainConfig::to_json() const {
  return json{{"learning_rate", learning_rate},
              {"batch_size", batch_size},
              {"max_epochs", max_epochs},
              {"seed", seed},
              {"max_len", max_len},
              {"weight_decay", weight_decay},
              {"early_stop_metric", early_stop_metric},
              {"patience", patience},
              {"decision_threshold", decision_threshold}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.seed = j.value("seed", c.seed);
  c.max_len = j.value("max_len", c.max_len);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.early_stop_metric = j.value("early_stop_metric", c.early_stop_metric);
  c.patience = j.value("patience", c.patience);
  c.decision_threshold = j.value("decision_threshold", c.decision_threshold);
  return c;
}

// --- asset locator -----------------------------------------------------------

AssetLocator AssetLocator::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw AssetError("asset locator " + path + ": " + e.what());
  }
  AssetLocator loc;
  fs::path base = fs::path(path).parent_path();
  for (auto it = j.begin(); it != j.end(); ++it) {
    Entry e;
    std::string p = it.value().at("path").get<std::string>();
    fs::path resolved = fs::path(p).is_absolute() ? fs::path(p) : base / p;
    e.path = resolved.string();
    e.sha256 = it.value().value("sha256", "");
    loc.entries_[it.key()] = std::move(e);
  }
  return loc;
}

void AssetLocator::add(const std::string& id, const std::string& path, const std::string& sha256) {
  entries_[id] = Entry{path, sha256};
}

std::string AssetLocator::resolve(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw AssetError("unresolvable checkpoint_id \"" + id + "\"");
  const Entry& e = it->second;
  if (!fs::exists(e.path))
    throw AssetError("asset \"" + id + "\": path does not exist: " + e.path);
  if (!e.sha256.empty()) {
    std::string target = fs::is_directory(e.path) ? (fs::path(e.path) / "weights.bin").string()
                                                  : e.path;
    std::string actual = sha256_file_hex(target);
    if (actual != e.sha256)
      throw AssetError("asset \"" + id + "\": content hash mismatch (expected " + e.sha256 +
                       ", got " + actual + ")");
  }
  return e.path;
}

// --- input encoders ----------------------------------------------------------

namespace {

json profile_to_json(const tp::PreprocessProfile& p) {
  return json{{"lowercase", p.clean.lowercase},
              {"strip_urls", p.clean.strip_urls},
              {"strip_user_handles", p.clean.strip_user_handles},
              {"strip_punctuation", p.clean.strip_punctuation},
              {"collapse_whitespace", p.clean.collapse_whitespace},
              {"remove_stopwords", p.remove_stopwords}};
}

tp::PreprocessProfile profile_from_json(const json& j) {
  tp::PreprocessProfile p;
  p.clean.lowercase = j.at("lowercase").get<bool>();
  p.clean.strip_urls = j.at("strip_urls").get<bool>();
  p.clean.strip_user_handles = j.at("strip_user_handles").get<bool>();
  p.clean.strip_punctuation = j.at("strip_punctuation").get<bool>();
  p.clean.collapse_whitespace = j.at("collapse_whitespace").get<bool>();
  p.remove_stopwords = j.at("remove_stopwords").get<bool>();
  return p;
}

void write_stopwords(const tp::StopwordList& sw, const std::string& path) {
  std::vector<std::string> words(sw.words.begin(), sw.words.end());
  std::sort(words.begin(), words.end());
  std::string out;
  for (const auto& w : words) {
    out += w;
    out.push_back('\n');
  }
  write_text_file(path, out);
}

class WordVocabEncoder final : public InputEncoder {
 public:
  WordVocabEncoder(tp::PreprocessProfile profile, tp::StopwordList stopwords,
                   tp::Vocabulary vocab, int max_len)
      : profile_(profile), stopwords_(std::move(stopwords)), vocab_(std::move(vocab)),
        max_len_(max_len) {}

  tp::EncodedSequence encode(std::string_view raw) const override {
    std::string cleaned = tp::clean_text(raw, profile_.clean);
    std::vector<std::string> tokens = tp::word_tokenize(cleaned);
    if (profile_.remove_stopwords) tokens = tp::remove_stop_and_single(tokens, stopwords_);
    return tp::pad_truncate(tp::encode_words(tokens, vocab_), max_len_, tp::Vocabulary::kPadId);
  }

  int32_t pad_id() const override { return tp::Vocabulary::kPadId; }
  int32_t vocab_size() const override { return vocab_.size(); }

  void save(const std::string& dir) const override {
    fs::create_directories(dir);
    vocab_.save((fs::path(dir) / "vocab.txt").string());
    write_stopwords(stopwords_, (fs::path(dir) / "stopwords.txt").string());
    json j{{"type", "word_vocab"},
           {"max_len", max_len_},
           {"profile", profile_to_json(profile_)},
           {"stopword_source_id", stopwords_.source_id}};
    write_text_file((fs::path(dir) / "encoder.json").string(), j.dump(2) + "\n");
  }

  json describe() const override {
    return json{{"type", "word_vocab"},
                {"vocab_size", vocab_.size()},
                {"max_len", max_len_},
                {"stopword_source_id", stopwords_.source_id},
                {"profile", profile_to_json(profile_)}};
  }

  const tp::Vocabulary& vocab() const { return vocab_; }

 private:
  tp::PreprocessProfile profile_;
  tp::StopwordList stopwords_;
  tp::Vocabulary vocab_;
  int max_len_;
};

class SubwordInputEncoder final : public InputEncoder {
 public:
  SubwordInputEncoder(tp::PreprocessProfile profile,
                      std::shared_ptr<const tp::SubwordEncoder> subword, std::string asset_dir,
                      std::optional<tp::StopwordList> stopwords)
      : profile_(profile), subword_(std::move(subword)), asset_dir_(std::move(asset_dir)),
        stopwords_(std::move(stopwords)) {
    if (profile_.remove_stopwords && !stopwords_)
      throw ConfigError("profile removes stopwords but no stopword list was provided");
  }

  tp::EncodedSequence encode(std::string_view raw) const override {
    std::string cleaned = tp::clean_text(raw, profile_.clean);
    if (profile_.remove_stopwords) {
      std::vector<std::string> tokens =
          tp::remove_stop_and_single(tp::word_tokenize(cleaned), *stopwords_);
      cleaned.clear();
      for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) cleaned.push_back(' ');
        cleaned += tokens[i];
      }
    }
    return subword_->encode(cleaned);
  }

  int32_t pad_id() const override { return subword_->pad_id(); }
  int32_t vocab_size() const override { return subword_->vocab_size(); }

  void save(const std::string& dir) const override {
    tp::SubwordEncoder::copy_assets(asset_dir_, dir);
    json j{{"type", "subword"},
           {"max_len", subword_->max_length()},
           {"checkpoint_id", subword_->checkpoint_id()},
           {"profile", profile_to_json(profile_)}};
    if (stopwords_) {
      write_stopwords(*stopwords_, (fs::path(dir) / "stopwords.txt").string());
      j["stopword_source_id"] = stopwords_->source_id;
    }
    write_text_file((fs::path(dir) / "encoder.json").string(), j.dump(2) + "\n");
  }

  json describe() const override {
    json j{{"type", "subword"},
           {"checkpoint_id", subword_->checkpoint_id()},
           {"vocab_size", subword_->vocab_size()},
           {"max_len", subword_->max_length()},
           {"profile", profile_to_json(profile_)}};
    if (stopwords_) j["stopword_source_id"] = stopwords_->source_id;
    return j;
  }

 private:
  tp::PreprocessProfile profile_;
  std::shared_ptr<const tp::SubwordEncoder> subword_;
  std::string asset_dir_;
  std::optional<tp::StopwordList> stopwords_;
};

}  // namespace

std::unique_ptr<InputEncoder> load_input_encoder(const std::string& dir, const AssetLocator&) {
  fs::path root(dir);
  json j;
  try {
    j = json::parse(read_text_file((root / "encoder.json").string()));
  } catch (const json::exception& e) {
    throw ArtifactError("encoder.json in " + dir + ": " + e.what());
  }
  std::string type = j.at("type").get<std::string>();
  tp::PreprocessProfile profile = profile_from_json(j.at("profile"));
  if (type == "word_vocab") {
    tp::Vocabulary vocab = tp::Vocabulary::load((root / "vocab.txt").string());
    tp::StopwordList sw = tp::StopwordList::load((root / "stopwords.txt").string());
    return std::make_unique<WordVocabEncoder>(profile, std::move(sw), std::move(vocab),
                                              j.at("max_len").get<int>());
  }
  if (type == "subword") {
    std::string checkpoint_id = j.at("checkpoint_id").get<std::string>();
    auto sub = tp::SubwordEncoder::load(dir, checkpoint_id, j.at("max_len").get<int>());
    std::optional<tp::StopwordList> sw;
    if (profile.remove_stopwords)
      sw = tp::StopwordList::load((root / "stopwords.txt").string());
    return std::make_unique<SubwordInputEncoder>(profile, std::move(sub), dir, std::move(sw));
  }
  throw ArtifactError("encoder.json in " + dir + ": unknown type \"" + type + "\"");
}

// --- build -------------------------------------------------------------------

BuildOptions BuildOptions::defaults_for(const ModelKind& kind) {
  BuildOptions o;
  o.profile = kind.is_transformer() ? tp::PreprocessProfile::subword_default()
                                    : tp::PreprocessProfile::word_default();
  return o;
}

namespace {

nn::TransformerConfig<float> transformer_config_from_json(const json& j, int num_classes,
                                                          double dropout) {
  nn::TransformerConfig<float> c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.intermediate = j.at("intermediate").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.type_vocab_size = j.value("type_vocab_size", 0);
  c.pad_id = j.value("pad_id", 0);
  c.position_offset = j.value("position_offset", 0);
  c.ln_eps = j.value("ln_eps", 1e-12);
  c.num_classes = num_classes;
  c.dropout = dropout;
  return c;
}

json transformer_config_to_json(const nn::TransformerConfig<float>& c) {
  return json{{"vocab_size", c.vocab_size},   {"hidden", c.hidden},
              {"layers", c.layers},           {"heads", c.heads},
              {"intermediate", c.intermediate},{"max_positions", c.max_positions},
              {"type_vocab_size", c.type_vocab_size}, {"pad_id", c.pad_id},
              {"position_offset", c.position_offset}, {"ln_eps", c.ln_eps}};
}

std::string corpus_digest(const corpus::Corpus& c) {
  std::string buf;
  for (const auto& r : c.records) {
    buf += std::to_string(label_to_int(r.label));
    buf.push_back('\x1f');
    buf += r.text;
    buf.push_back('\x1e');
  }
  return sha256_hex(buf);
}

std::string serialize_net(const Net& net) {
  std::vector<std::pair<std::string, nn::MatF>> tensors;
  std::visit(
      [&](const auto& n) {
        for (const auto* t : n.params()) tensors.emplace_back(t->name, t->w);
      },
      net);
  std::ostringstream ss(std::ios::binary);
  nn::write_tensor_stream(ss, tensors);
  return ss.str();
}

std::string version_string(const ModelKind& kind, const std::string& weights_bytes) {
  return kind.id() + "-" + sha256_hex(weights_bytes).substr(0, 12);
}

}  // namespace

ModelHandle build_model(const ModelKind& kind, const TrainConfig& config,
                        const AssetLocator& assets, const BuildOptions& options,
                        BiLstmData bilstm_data) {
  kind.validate();
  config.validate();
  Rng rng(config.seed);
  ModelHandle handle;
  handle.kind = kind;
  handle.config = config;
  handle.options = options;

  if (kind.variant == ModelVariant::kBiLstm) {
    if (bilstm_data.vocab.size() < 2)
      throw ArgumentError("bilstm build requires a vocabulary (build it from the train split)");
    nn::BiLstmClassifier<float>::Config cfg;
    cfg.vocab_size = bilstm_data.vocab.size();
    cfg.embed_dim = options.bilstm_embed_dim;
    cfg.hidden = options.bilstm_hidden;
    cfg.dropout = options.bilstm_dropout;
    cfg.pad_id = tp::Vocabulary::kPadId;
    nn::BiLstmClassifier<float> net(cfg);
    net.init(rng);
    if (kind.use_pretrained_embeddings) {
      if (!bilstm_data.embeddings)
        throw ConfigError("use_pretrained_embeddings=true but no embedding table supplied");
      if (bilstm_data.embeddings->dim != options.bilstm_embed_dim)
        throw ConfigError("embedding table dim " + std::to_string(bilstm_data.embeddings->dim) +
                          " != model embed_dim " + std::to_string(options.bilstm_embed_dim));
      net.set_embedding_rows(bilstm_data.embeddings->rows);
      handle.build_info["embedding_coverage"] = bilstm_data.embeddings->coverage;
    }
    handle.build_info["vocab_size"] = cfg.vocab_size;
    handle.net = std::make_unique<Net>(std::move(net));
    handle.encoder = std::make_shared<WordVocabEncoder>(
        options.profile, std::move(bilstm_data.stopwords), std::move(bilstm_data.vocab),
        config.max_len);
    return handle;
  }

  // Transformer variants: pretrained checkpoint assets are required.
  std::string ckpt_dir = assets.resolve(kind.checkpoint_id);
  fs::path root(ckpt_dir);
  json arch;
  try {
    arch = json::parse(read_text_file((root / "config.json").string()));
  } catch (const Error&) {
    throw AssetError("checkpoint \"" + kind.checkpoint_id + "\": missing or unreadable config.json");
  } catch (const json::exception& e) {
    throw AssetError("checkpoint \"" + kind.checkpoint_id + "\": bad config.json: " + e.what());
  }
  nn::TransformerConfig<float> cfg =
      transformer_config_from_json(arch, 2, options.transformer_dropout);
  if (config.max_len + cfg.position_offset > cfg.max_positions)
    throw ConfigError("max_len " + std::to_string(config.max_len) +
                      " exceeds checkpoint position capacity");
  nn::TransformerClassifier<float> net(cfg);
  net.init(rng);
  auto archive = nn::read_tensor_file((root / "weights.bin").string());
  auto loaded = net.load_pretrained(archive);
  if (loaded.empty())
    throw AssetError("checkpoint \"" + kind.checkpoint_id + "\": no matching tensors in archive");
  handle.build_info["checkpoint_id"] = kind.checkpoint_id;
  handle.build_info["checkpoint_sha256"] = sha256_file_hex((root / "weights.bin").string());
  handle.build_info["pretrained_tensors"] = loaded.size();

  auto subword = tp::SubwordEncoder::load(ckpt_dir, kind.checkpoint_id, config.max_len);
  std::optional<tp::StopwordList> sw;
  if (options.profile.remove_stopwords) sw = std::move(bilstm_data.stopwords);
  handle.net = std::make_unique<Net>(std::move(net));
  handle.encoder = std::make_shared<SubwordInputEncoder>(options.profile, std::move(subword),
                                                         ckpt_dir, std::move(sw));
  return handle;
}

// --- train ---------------------------------------------------------------

namespace {

struct EncodedDataset {
  std::vector<tp::EncodedSequence> seqs;
  std::vector<int> labels;
};

EncodedDataset encode_corpus(const InputEncoder& enc, const corpus::Corpus& part) {
  EncodedDataset ds;
  ds.seqs.reserve(part.records.size());
  ds.labels.reserve(part.records.size());
  for (const auto& r : part.records) {
    ds.seqs.push_back(enc.encode(r.text));
    ds.labels.push_back(label_to_int(r.label));
  }
  return ds;
}

// Length-sorted batches keep padding low; the training loop shuffles the
// batch order each epoch.
std::vector<std::vector<size_t>> length_sorted_batches(const EncodedDataset& ds, int batch_size) {
  std::vector<size_t> order(ds.seqs.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return ds.seqs[a].mask_sum() < ds.seqs[b].mask_sum();
  });
  std::vector<std::vector<size_t>> batches;
  for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(batch_size)) {
    size_t end = std::min(order.size(), pos + static_cast<size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<int64_t>(pos),
                         order.begin() + static_cast<int64_t>(end));
  }
  return batches;
}

std::vector<Prediction> predict_encoded(const Net& net, const EncodedDataset& ds, int batch_size,
                                        int32_t pad_id) {
  std::vector<Prediction> out(ds.seqs.size());
  std::vector<size_t> idx(ds.seqs.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t pos = 0; pos < idx.size(); pos += static_cast<size_t>(batch_size)) {
    size_t end = std::min(idx.size(), pos + static_cast<size_t>(batch_size));
    std::vector<size_t> chunk(idx.begin() + static_cast<int64_t>(pos),
                              idx.begin() + static_cast<int64_t>(end));
    nn::EncodedBatch batch = nn::make_batch(ds.seqs, chunk, pad_id, nullptr);
    nn::Mat<float> logits = std::visit([&](const auto& n) { return n.logits(batch); }, net);
    for (size_t r = 0; r < chunk.size(); ++r) {
      double l0 = logits(static_cast<Eigen::Index>(r), 0);
      double l1 = logits(static_cast<Eigen::Index>(r), 1);
      double m = std::max(l0, l1);
      double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
      double z = e0 + e1;
      out[chunk[r]].probs = {e0 / z, e1 / z};
    }
  }
  return out;
}

std::vector<Label> threshold_labels(const std::vector<Prediction>& preds, double threshold) {
  std::vector<Label> labels;
  labels.reserve(preds.size());
  for (const auto& p : preds)
    labels.push_back(p.prob_insulting() >= threshold ? Label::kInsulting : Label::kNeutral);
  return labels;
}

std::vector<nn::MatF> snapshot_params(Net& net) {
  std::vector<nn::MatF> snap;
  std::visit(
      [&](auto& n) {
        for (auto* t : n.params()) snap.push_back(t->w);
      },
      net);
  return snap;
}

void restore_params(Net& net, const std::vector<nn::MatF>& snap) {
  std::visit(
      [&](auto& n) {
        auto params = n.params();
        for (size_t i = 0; i < params.size(); ++i) params[i]->w = snap[i];
      },
      net);
}

}  // namespace

TrainResult train(ModelHandle&& handle, const corpus::SplitBundle& data) {
  const TrainConfig& config = handle.config;
  config.validate();
  if (data.train.records.empty()) throw DataError("train split is empty");
  if (data.val.records.empty()) throw DataError("validation split is empty");
  if (!handle.net) throw ArgumentError("train: model handle has no network");

  EncodedDataset train_ds = encode_corpus(*handle.encoder, data.train);
  EncodedDataset val_ds = encode_corpus(*handle.encoder, data.val);
  const int32_t pad_id = handle.encoder->pad_id();

  auto batches = length_sorted_batches(train_ds, config.batch_size);
  std::vector<Label> val_gold;
  for (const auto& r : data.val.records) val_gold.push_back(r.label);

  nn::AdamW<float>::Config opt_cfg;
  opt_cfg.lr = config.learning_rate;
  opt_cfg.weight_decay = config.weight_decay;
  nn::AdamW<float> opt(opt_cfg);

  Rng train_rng(config.seed ^ 0x747261696e5f5full);  // distinct stream from init
  Net& net = *handle.net;
  std::vector<nn::Tensor<float>*> params =
      std::visit([](auto& n) { return n.params(); }, net);

  TrainingLog log;
  double best_metric = -1.0;
  std::vector<nn::MatF> best_snapshot;
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::vector<size_t> order = train_rng.permutation(batches.size());
    double loss_sum = 0.0;
    int64_t example_count = 0;
    for (size_t bi = 0; bi < order.size(); ++bi) {
      const auto& batch_idx = batches[order[bi]];
      nn::EncodedBatch batch = nn::make_batch(train_ds.seqs, batch_idx, pad_id, &train_ds.labels);
      float loss =
          std::visit([&](auto& n) { return n.train_step(batch, train_rng); }, net);
      if (!std::isfinite(loss))
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(bi));
      opt.step(params);
      loss_sum += static_cast<double>(loss) * static_cast<double>(batch_idx.size());
      example_count += static_cast<int64_t>(batch_idx.size());
    }

    std::vector<Prediction> val_preds =
        predict_encoded(net, val_ds, config.batch_size, pad_id);
    std::vector<Label> val_pred_labels = threshold_labels(val_preds, config.decision_threshold);
    eval::ClassificationReport rep = eval::report("val", val_gold, val_pred_labels);

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(example_count);
    stats.val_accuracy = rep.accuracy;
    stats.val_macro_f1 = rep.macro_f1;
    log.epochs.push_back(stats);

    if (stats.val_macro_f1 > best_metric) {
      best_metric = stats.val_macro_f1;
      log.best_epoch = epoch;
      best_snapshot = snapshot_params(net);
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.patience) break;
    }
  }

  restore_params(net, best_snapshot);

  TrainedModel model;
  model.kind = handle.kind;
  model.config = config;
  model.options = handle.options;
  model.encoder = handle.encoder;
  std::string weights_bytes = serialize_net(net);
  model.version = version_string(handle.kind, weights_bytes);
  model.net = std::shared_ptr<const Net>(std::move(handle.net));

  json manifest;
  manifest["kind"] = {{"variant", variant_name(handle.kind.variant)},
                      {"use_pretrained_embeddings", handle.kind.use_pretrained_embeddings},
                      {"checkpoint_id", handle.kind.checkpoint_id}};
  manifest["config"] = config.to_json();
  manifest["build"] = handle.build_info;
  manifest["encoder"] = handle.encoder->describe();
  manifest["data"] = {{"train_sha256", corpus_digest(data.train)},
                      {"val_sha256", corpus_digest(data.val)},
                      {"test_sha256", corpus_digest(data.test)},
                      {"train_size", data.train.records.size()},
                      {"val_size", data.val.records.size()},
                      {"test_size", data.test.records.size()}};
  manifest["split"] = {{"seed", data.spec.seed},
                       {"ratios", data.spec.ratios},
                       {"stratified", data.spec.stratified}};
  manifest["training"] = {{"epochs_run", log.epochs.size()},
                          {"best_epoch", log.best_epoch},
                          {"best_val_macro_f1", best_metric},
                          {"best_val_accuracy",
                           log.best_epoch >= 0
                               ? log.epochs[static_cast<size_t>(log.best_epoch)].val_accuracy
                               : 0.0}};
  model.manifest = std::move(manifest);
  return TrainResult{std::move(model), std::move(log)};
}

// --- predict ---------------------------------------------------------------

std::vector<Prediction> TrainedModel::predict_proba(const std::vector<std::string>& texts) const {
  EncodedDataset ds;
  ds.seqs.reserve(texts.size());
  for (const auto& t : texts) ds.seqs.push_back(encoder->encode(t));
  return predict_encoded(*net, ds, config.batch_size, encoder->pad_id());
}

std::vector<Label> TrainedModel::predict_labels(const std::vector<std::string>& texts,
                                                double threshold) const {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ArgumentError("decision threshold must be in (0,1)");
  return threshold_labels(predict_proba(texts), threshold);
}

// --- persistence -------------------------------------------------------------

const std::vector<std::string>& probe_texts() {
  static const std::vector<std::string> kProbe = {
      "you are an idiot",
      "thanks for the thoughtful reply",
      "nobody asked for your stupid opinion",
      "I think the article makes a fair point",
      "go crawl back under your rock, loser",
      "what a wonderful day to learn something new",
      "shut up you pathetic moron",
      "could you share the source for that claim?",
      "u r dumb lol",
      "the weather in Kolkata is lovely this week",
      "only a complete fool would believe this",
      "congratulations on the well-deserved win!",
      "",
      "GET OUT of here, trash human!!",
      "this is a longer comment that rambles on about nothing in particular, "
      "mentioning neither praise nor blame, just filling space with words",
      "@someone http://example.com check this out éè",
  };
  return kProbe;
}

namespace {

std::string double_bits_hex(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
  return buf;
}

json probe_outputs_json(const TrainedModel& model) {
  json arr = json::array();
  for (const auto& p : model.predict_proba(probe_texts()))
    arr.push_back(json{{"p0", double_bits_hex(p.probs[0])}, {"p1", double_bits_hex(p.probs[1])}});
  return arr;
}

json architecture_json(const Net& net) {
  if (std::holds_alternative<nn::BiLstmClassifier<float>>(net)) {
    const auto& cfg = std::get<nn::BiLstmClassifier<float>>(net).config();
    return json{{"type", "bilstm"},       {"vocab_size", cfg.vocab_size},
                {"embed_dim", cfg.embed_dim}, {"hidden", cfg.hidden},
                {"dropout", cfg.dropout}, {"pad_id", cfg.pad_id}};
  }
  const auto& cfg = std::get<nn::TransformerClassifier<float>>(net).config();
  json j = transformer_config_to_json(cfg);
  j["type"] = "transformer";
  j["dropout"] = cfg.dropout;
  return j;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& dir) {
  fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create model dir " + dir + ": " + ec.message());

  std::string weights_bytes = serialize_net(*model.net);
  write_text_file((root / "weights.bin").string(), weights_bytes);
  model.encoder->save((root / "encoder").string());

  json manifest = model.manifest;
  manifest["format_version"] = 1;
  manifest["tool_version"] = kToolVersion;
  manifest["created_utc"] = now_utc_iso8601();
  manifest["architecture"] = architecture_json(*model.net);
  manifest["model_version"] = version_string(model.kind, weights_bytes);
  manifest["probe"] = {{"outputs", probe_outputs_json(model)}};
  write_text_file((root / "manifest.json").string(), manifest.dump(2) + "\n");
}

TrainedModel load_model(const std::string& dir, const AssetLocator&, bool verify_probe) {
  fs::path root(dir);
  std::vector<std::string> missing;
  for (const char* piece : {"manifest.json", "weights.bin", "encoder"})
    if (!fs::exists(root / piece)) missing.push_back(piece);
  if (!missing.empty()) {
    std::string msg = "model artifact " + dir + " is missing:";
    for (const auto& m : missing) msg += " " + m;
    throw ArtifactError(msg);
  }

  json manifest;
  try {
    manifest = json::parse(read_text_file((root / "manifest.json").string()));
  } catch (const json::exception& e) {
    throw ArtifactError("model manifest in " + dir + ": " + std::string(e.what()));
  }

  TrainedModel model;
  try {
    const json& kind = manifest.at("kind");
    model.kind.variant = variant_from_name(kind.at("variant").get<std::string>());
    model.kind.use_pretrained_embeddings = kind.at("use_pretrained_embeddings").get<bool>();
    model.kind.checkpoint_id = kind.at("checkpoint_id").get<std::string>();
    model.config = TrainConfig::from_json(manifest.at("config"));
  } catch (const json::exception& e) {
    throw ArtifactError("model manifest in " + dir + ": " + std::string(e.what()));
  }

  model.encoder = load_input_encoder((root / "encoder").string(), AssetLocator::empty());
  model.options = BuildOptions::defaults_for(model.kind);

  const json& arch = manifest.at("architecture");
  std::unique_ptr<Net> net;
  if (arch.at("type") == "bilstm") {
    nn::BiLstmClassifier<float>::Config cfg;
    cfg.vocab_size = arch.at("vocab_size").get<int>();
    cfg.embed_dim = arch.at("embed_dim").get<int>();
    cfg.hidden = arch.at("hidden").get<int>();
    cfg.dropout = arch.at("dropout").get<double>();
    cfg.pad_id = arch.at("pad_id").get<int>();
    net = std::make_unique<Net>(nn::BiLstmClassifier<float>(cfg));
  } else {
    nn::TransformerConfig<float> cfg =
        transformer_config_from_json(arch, 2, arch.value("dropout", 0.1));
    net = std::make_unique<Net>(nn::TransformerClassifier<float>(cfg));
  }
  std::vector<nn::Tensor<float>*> params = std::visit([](auto& n) { return n.params(); }, *net);
  nn::load_params((root / "weights.bin").string(), params);
  model.version = manifest.value("model_version", "");
  model.net = std::shared_ptr<const Net>(std::move(net));
  model.manifest = manifest;

  if (verify_probe && manifest.contains("probe")) {
    json expected = manifest["probe"]["outputs"];
    json actual = probe_outputs_json(model);
    if (expected != actual)
      throw ArtifactError("model artifact " + dir +
                          ": probe outputs do not reproduce stored values");
  }
  return model;
}

}  // namespace bullysense::models
