#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bullysense/corpus.hpp"
#include "bullysense/nn/bilstm.hpp"
#include "bullysense/nn/transformer.hpp"
#include "bullysense/subword.hpp"
#include "bullysense/textprep.hpp"

namespace bullysense::models {

enum class ModelVariant { kBertBase, kHateBert, kRoberta, kBiLstm };

std::string variant_name(ModelVariant v);
ModelVariant variant_from_name(const std::string& name);

struct ModelKind {
  ModelVariant variant = ModelVariant::kBiLstm;
  bool use_pretrained_embeddings = false;  // BiLstm only
  std::string checkpoint_id;               // transformer variants only

  bool is_transformer() const { return variant != ModelVariant::kBiLstm; }
  // Human-readable id, e.g. "bilstm+fasttext" or "hatebert".
  std::string id() const;
  void validate() const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 20;
  uint64_t seed = 42;
  int max_len = 128;
  double weight_decay = 0.0;
  std::string early_stop_metric = "val_macro_f1";
  int patience = 3;
  double decision_threshold = 0.5;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Prediction {
  std::array<double, 2> probs{0.0, 0.0};  // [neutral, insulting]
  double prob_insulting() const { return probs[1]; }
};

struct EpochStats {
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
};

// Maps checkpoint/embedding ids to local paths, with optional content-hash
// pinning (sha256 of the asset's weights.bin, or of the file itself for
// plain files).
class AssetLocator {
 public:
  static AssetLocator load(const std::string& path);
  static AssetLocator empty() { return AssetLocator(); }

  void add(const std::string& id, const std::string& path, const std::string& sha256 = "");
  // Returns the asset path; throws AssetError when the id is unknown, the
  // path is missing, or the pinned hash does not match.
  std::string resolve(const std::string& id) const;
  bool has(const std::string& id) const { return entries_.count(id) > 0; }

 private:
  struct Entry {
    std::string path;
    std::string sha256;
  };
  std::map<std::string, Entry> entries_;
};

// Turns raw comment text into a fixed-length EncodedSequence; one
// implementation per model family.
class InputEncoder {
 public:
  virtual ~InputEncoder() = default;
  virtual textprep::EncodedSequence encode(std::string_view raw_text) const = 0;
  virtual int32_t pad_id() const = 0;
  virtual int32_t vocab_size() const = 0;
  virtual void save(const std::string& dir) const = 0;
  virtual nlohmann::json describe() const = 0;
};

std::unique_ptr<InputEncoder> load_input_encoder(const std::string& dir,
                                                 const AssetLocator& assets);

using Net = std::variant<nn::BiLstmClassifier<float>, nn::TransformerClassifier<float>>;

struct BuildOptions {
  textprep::PreprocessProfile profile;
  double transformer_dropout = 0.1;
  int bilstm_hidden = 128;
  double bilstm_dropout = 0.5;
  int bilstm_embed_dim = 300;

  static BuildOptions defaults_for(const ModelKind& kind);
};

// Word-pipeline inputs the BiLSTM needs before a network can exist; the
// vocabulary comes from the training split.
struct BiLstmData {
  textprep::Vocabulary vocab;
  std::optional<textprep::EmbeddingTable> embeddings;
  textprep::StopwordList stopwords;
};

struct ModelHandle {
  ModelKind kind;
  TrainConfig config;
  BuildOptions options;
  std::shared_ptr<InputEncoder> encoder;
  std::unique_ptr<Net> net;
  nlohmann::json build_info;
};

ModelHandle build_model(const ModelKind& kind, const TrainConfig& config,
                        const AssetLocator& assets, const BuildOptions& options,
                        BiLstmData bilstm_data = {});

struct TrainedModel {
  ModelKind kind;
  TrainConfig config;
  BuildOptions options;
  std::shared_ptr<InputEncoder> encoder;
  std::shared_ptr<const Net> net;
  nlohmann::json manifest;
  std::string version;

  std::vector<Prediction> predict_proba(const std::vector<std::string>& texts) const;
  std::vector<Label> predict_labels(const std::vector<std::string>& texts,
                                    double threshold) const;
};

struct TrainResult {
  TrainedModel model;
  TrainingLog log;
};

TrainResult train(ModelHandle&& handle, const corpus::SplitBundle& data);

// Artifact directory: manifest.json, weights.bin, encoder/. load_model
// re-runs the fixed probe set and rejects artifacts whose stored probe
// outputs no longer reproduce bit-for-bit.
void save_model(const TrainedModel& model, const std::string& dir);
TrainedModel load_model(const std::string& dir, const AssetLocator& assets = AssetLocator::empty(),
                        bool verify_probe = true);

// The fixed probe set used for round-trip verification.
const std::vector<std::string>& probe_texts();

}  // namespace bullysense::models
