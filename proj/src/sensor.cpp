#include "bullysense/sensor.hpp"

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "bullysense/sha256.hpp"

namespace bullysense::sentinel {

using nlohmann::json;

SinkConfig SinkConfig::parse(const std::string& spec) {
  SinkConfig cfg;
  if (spec.rfind("jsonl:", 0) == 0) {
    cfg.type = Type::kJsonlFile;
    cfg.target = spec.substr(6);
  } else if (spec.rfind("webhook:", 0) == 0) {
    cfg.type = Type::kWebhook;
    cfg.target = spec.substr(8);
  } else {
    throw ConfigError("sink spec must be jsonl:<path> or webhook:<url>, got \"" + spec + "\"");
  }
  if (cfg.target.empty()) throw ConfigError("sink spec has empty target");
  return cfg;
}

void SentinelConfig::validate() const {
  if (model_dir.empty()) throw ConfigError("sentinel config: model_dir is required");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("sentinel config: threshold must be in (0,1)");
  if (max_batch < 1) throw ConfigError("sentinel config: max_batch must be positive");
  if (sink.target.empty()) throw ConfigError("sentinel config: sink target is required");
}

SentinelConfig SentinelConfig::from_json(const json& j) {
  SentinelConfig cfg;
  cfg.model_dir = j.value("model_dir", "");
  cfg.threshold = j.value("threshold", 0.5);
  cfg.max_batch = j.value("max_batch", 64);
  if (j.contains("sink")) cfg.sink = SinkConfig::parse(j.at("sink").get<std::string>());
  return cfg;
}

void SentinelConfig::apply_env() {
  if (const char* v = std::getenv("SENTINEL_MODEL_DIR")) model_dir = v;
  if (const char* v = std::getenv("SENTINEL_THRESHOLD")) threshold = std::strtod(v, nullptr);
  if (const char* v = std::getenv("SENTINEL_SINK")) sink = SinkConfig::parse(v);
}

json score_result_to_json(const ScoreResult& r) {
  return json{{"request_id", r.request_id},   {"prob_insult", r.prob_insult},
              {"label", label_name(r.label)}, {"threshold", r.threshold},
              {"model_version", r.model_version}, {"latency_ms", r.latency_ms}};
}

json flag_event_to_json(const FlagEvent& e) {
  json j{{"request_id", e.request_id},
         {"text_digest", e.text_digest},
         {"prob_insult", e.prob_insult},
         {"timestamp", e.timestamp},
         {"delivery", e.delivered ? "delivered" : "failed"}};
  if (!e.delivered) j["failure_reason"] = e.failure_reason;
  return j;
}

void JsonlFileSink::deliver(FlagEvent& event) noexcept {
  try {
    std::lock_guard<std::mutex> lock(mu_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) {
      event.delivered = false;
      event.failure_reason = "cannot open " + path_;
      return;
    }
    event.delivered = true;  // recorded state inside the written line
    std::string line = flag_event_to_json(event).dump() + "\n";
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (!out) {
      event.delivered = false;
      event.failure_reason = "write failed: " + path_;
    }
  } catch (...) {
    event.delivered = false;
    event.failure_reason = "jsonl sink error";
  }
}

WebhookSink::WebhookSink(std::string url) {
  // split scheme://host[:port] from path
  size_t scheme = url.find("://");
  size_t slash = scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    host_prefix_ = url;
    path_ = "/";
  } else {
    host_prefix_ = url.substr(0, slash);
    path_ = url.substr(slash);
  }
}

void WebhookSink::deliver(FlagEvent& event) noexcept {
  try {
    event.delivered = true;  // serialized payload claims delivery; rolled back below
    std::string body = flag_event_to_json(event).dump();
    httplib::Client client(host_prefix_);
    client.set_connection_timeout(2, 0);
    client.set_read_timeout(5, 0);
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      event.delivered = false;
      event.failure_reason = "unreachable: " + httplib::to_string(res.error());
      return;
    }
    if (res->status < 200 || res->status >= 300) {
      event.delivered = false;
      event.failure_reason = "http " + std::to_string(res->status);
    }
  } catch (...) {
    event.delivered = false;
    event.failure_reason = "webhook sink error";
  }
}

std::unique_ptr<FlagSink> make_sink(const SinkConfig& cfg) {
  if (cfg.type == SinkConfig::Type::kJsonlFile) return std::make_unique<JsonlFileSink>(cfg.target);
  return std::make_unique<WebhookSink>(cfg.target);
}

Sensor::Sensor(std::shared_ptr<const Scorer> scorer, double threshold,
               std::shared_ptr<FlagSink> sink, int max_batch)
    : scorer_(std::move(scorer)), threshold_(threshold), sink_(std::move(sink)),
      max_batch_(max_batch) {
  if (!scorer_) throw ArgumentError("sensor requires a scorer");
  if (!(threshold_ > 0.0 && threshold_ < 1.0))
    throw ArgumentError("sensor threshold must be in (0,1)");
  if (max_batch_ < 1) throw ArgumentError("sensor max_batch must be positive");
}

ScoreResult Sensor::finish(const std::string& text, std::string request_id, double prob,
                           double latency_ms) {
  if (request_id.empty())
    request_id = "req-" + std::to_string(next_request_.fetch_add(1));
  ScoreResult r;
  r.request_id = std::move(request_id);
  r.prob_insult = prob;
  r.label = prob >= threshold_ ? Label::kInsulting : Label::kNeutral;
  r.threshold = threshold_;
  r.model_version = scorer_->version();
  r.latency_ms = latency_ms;

  if (r.label == Label::kInsulting) {
    FlagEvent event;
    event.request_id = r.request_id;
    event.text_digest = sha256_hex(text);
    event.prob_insult = prob;
    event.timestamp = now_utc_iso8601();
    if (sink_) sink_->deliver(event);
    flags_emitted_.fetch_add(1);
  }
  return r;
}

ScoreResult Sensor::score(const std::string& text, std::string request_id) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<models::Prediction> preds = scorer_->predict_proba({text});
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
  return finish(text, std::move(request_id), preds.at(0).prob_insulting(), ms);
}

std::vector<ScoreResult> Sensor::score_batch(const std::vector<std::string>& texts) {
  if (static_cast<int>(texts.size()) > max_batch_)
    throw ArgumentError("batch of " + std::to_string(texts.size()) +
                        " exceeds max_batch limit " + std::to_string(max_batch_));
  if (texts.empty()) return {};
  auto t0 = std::chrono::steady_clock::now();
  std::vector<models::Prediction> preds = scorer_->predict_proba(texts);
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
  double per_item = ms / static_cast<double>(texts.size());
  std::vector<ScoreResult> out;
  out.reserve(texts.size());
  for (size_t i = 0; i < texts.size(); ++i)
    out.push_back(finish(texts[i], "", preds[i].prob_insulting(), per_item));
  return out;
}

// --- HTTP service -----------------------------------------------------------

struct SentinelService::Impl {
  httplib::Server server;
  std::thread thread;
};

SentinelService::SentinelService(std::shared_ptr<Sensor> sensor)
    : impl_(std::make_unique<Impl>()), sensor_(std::move(sensor)) {
  httplib::Server& svr = impl_->server;

  svr.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"status", "ok"}, {"model_version", sensor_->model_version()}}.dump(),
                    "application/json");
  });

  svr.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      res.status = 400;
      res.set_content(json{{"error", "invalid JSON body"}}.dump(), "application/json");
      return;
    }
    if (!body.contains("text") || !body["text"].is_string()) {
      res.status = 400;
      res.set_content(json{{"error", "missing field \"text\""}}.dump(), "application/json");
      return;
    }
    ScoreResult r = sensor_->score(body["text"].get<std::string>(), body.value("request_id", ""));
    res.set_content(score_result_to_json(r).dump(), "application/json");
  });

  svr.Post("/v1/score_batch", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("texts") || !body["texts"].is_array()) {
      res.status = 400;
      res.set_content(json{{"error", "missing field \"texts\""}}.dump(), "application/json");
      return;
    }
    std::vector<std::string> texts;
    for (const auto& t : body["texts"]) {
      if (!t.is_string()) {
        res.status = 400;
        res.set_content(json{{"error", "\"texts\" must contain strings"}}.dump(),
                        "application/json");
        return;
      }
      texts.push_back(t.get<std::string>());
    }
    try {
      std::vector<ScoreResult> results = sensor_->score_batch(texts);
      json arr = json::array();
      for (const auto& r : results) arr.push_back(score_result_to_json(r));
      res.set_content(arr.dump(), "application/json");
    } catch (const ArgumentError& e) {
      res.status = 413;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  });
}

SentinelService::~SentinelService() { stop(); }

void SentinelService::start(const std::string& host, int port) {
  httplib::Server& svr = impl_->server;
  if (port == 0) {
    port_ = svr.bind_to_any_port(host);
    if (port_ <= 0) throw ServiceError("cannot bind to " + host);
  } else {
    if (!svr.bind_to_port(host, port))
      throw ServiceError("cannot bind to " + host + ":" + std::to_string(port));
    port_ = port;
  }
  impl_->thread = std::thread([&svr] { svr.listen_after_bind(); });
  svr.wait_until_ready();
}

void SentinelService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
  if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

void SentinelService::run(const std::string& host, int port) {
  start(host, port);
  if (impl_->thread.joinable()) impl_->thread.join();
}

namespace {
std::atomic<bool> g_shutdown{false};
void handle_shutdown(int) { g_shutdown.store(true); }
}  // namespace

int run_server(const SentinelConfig& config, const std::string& host, int port) {
  config.validate();
  models::TrainedModel model = models::load_model(config.model_dir);
  auto scorer = std::make_shared<ModelScorer>(std::move(model));
  auto sensor = std::make_shared<Sensor>(scorer, config.threshold, make_sink(config.sink),
                                         config.max_batch);
  SentinelService service(sensor);

  service.start(host, port);
  fprintf(stderr, "sentinel listening on %s:%d (model %s, threshold %.3f)\n", host.c_str(),
          service.port(), sensor->model_version().c_str(), config.threshold);

  g_shutdown.store(false);
  std::signal(SIGINT, handle_shutdown);
  std::signal(SIGTERM, handle_shutdown);
  while (!g_shutdown.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();  // drains in-flight requests
  return 0;
}

}  // namespace bullysense::sentinel
