#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "bullysense/models.hpp"

namespace bullysense::sentinel {

// Scoring backend; TrainedModel in production, stubs in tests.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<models::Prediction> predict_proba(
      const std::vector<std::string>& texts) const = 0;
  virtual std::string version() const = 0;
};

class ModelScorer final : public Scorer {
 public:
  explicit ModelScorer(models::TrainedModel model) : model_(std::move(model)) {}
  std::vector<models::Prediction> predict_proba(
      const std::vector<std::string>& texts) const override {
    return model_.predict_proba(texts);
  }
  std::string version() const override { return model_.version; }
  const models::TrainedModel& model() const { return model_; }

 private:
  models::TrainedModel model_;
};

struct SinkConfig {
  enum class Type { kJsonlFile, kWebhook };
  Type type = Type::kJsonlFile;
  std::string target;  // file path or URL

  // "jsonl:<path>" or "webhook:<url>"
  static SinkConfig parse(const std::string& spec);
};

struct SentinelConfig {
  std::string model_dir;
  double threshold = 0.5;
  SinkConfig sink;
  int max_batch = 64;

  void validate() const;
  static SentinelConfig from_json(const nlohmann::json& j);
  // Applies SENTINEL_MODEL_DIR / SENTINEL_THRESHOLD / SENTINEL_SINK.
  void apply_env();
};

struct ScoreResult {
  std::string request_id;
  double prob_insult = 0.0;
  Label label = Label::kNeutral;
  double threshold = 0.5;
  std::string model_version;
  double latency_ms = 0.0;
};

struct FlagEvent {
  std::string request_id;
  std::string text_digest;  // sha256 hex of the scored text; raw text never stored
  double prob_insult = 0.0;
  std::string timestamp;  // ISO-8601 UTC
  bool delivered = false;
  std::string failure_reason;
};

nlohmann::json score_result_to_json(const ScoreResult& r);
nlohmann::json flag_event_to_json(const FlagEvent& e);

// Delivery target for flag events. deliver() reports success/failure and
// must never throw: the sensor keeps scoring when the sink is down.
class FlagSink {
 public:
  virtual ~FlagSink() = default;
  virtual void deliver(FlagEvent& event) noexcept = 0;
};

class JsonlFileSink final : public FlagSink {
 public:
  explicit JsonlFileSink(std::string path) : path_(std::move(path)) {}
  void deliver(FlagEvent& event) noexcept override;

 private:
  std::string path_;
  std::mutex mu_;  // single writer
};

class WebhookSink final : public FlagSink {
 public:
  explicit WebhookSink(std::string url);
  void deliver(FlagEvent& event) noexcept override;

 private:
  std::string host_prefix_;  // scheme://host[:port]
  std::string path_;
};

std::unique_ptr<FlagSink> make_sink(const SinkConfig& cfg);

class Sensor {
 public:
  Sensor(std::shared_ptr<const Scorer> scorer, double threshold,
         std::shared_ptr<FlagSink> sink, int max_batch);

  ScoreResult score(const std::string& text, std::string request_id = "");
  std::vector<ScoreResult> score_batch(const std::vector<std::string>& texts);

  double threshold() const { return threshold_; }
  int max_batch() const { return max_batch_; }
  std::string model_version() const { return scorer_->version(); }
  int64_t flags_emitted() const { return flags_emitted_.load(); }

 private:
  ScoreResult finish(const std::string& text, std::string request_id, double prob,
                     double latency_ms);

  std::shared_ptr<const Scorer> scorer_;
  double threshold_;
  std::shared_ptr<FlagSink> sink_;
  int max_batch_;
  std::atomic<int64_t> flags_emitted_{0};
  std::atomic<int64_t> next_request_{0};
};

// HTTP front end:
//   GET  /healthz          -> {status, model_version}
//   POST /v1/score         -> ScoreResult JSON
//   POST /v1/score_batch   -> list of ScoreResult JSON
class SentinelService {
 public:
  SentinelService(std::shared_ptr<Sensor> sensor);
  ~SentinelService();

  // Binds and serves on a background thread. port 0 picks a free port.
  void start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

  // Blocking serve (used by the CLI); returns after stop() or a signal.
  void run(const std::string& host, int port);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::shared_ptr<Sensor> sensor_;
  int port_ = 0;
};

// Loads the model, builds the sensor and serves until SIGINT/SIGTERM.
int run_server(const SentinelConfig& config, const std::string& host, int port);

}  // namespace bullysense::sentinel
