#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "bullysense/sensor.hpp"
#include "bullysense/sha256.hpp"
#include "test_support.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace bullysense;
using namespace bullysense::sentinel;
namespace ts = bullysense::testsup;
using nlohmann::json;

namespace {

// Scores a text by parsing it as a number; non-numeric texts score 0.0.
class StubScorer final : public Scorer {
 public:
  std::vector<models::Prediction> predict_proba(
      const std::vector<std::string>& texts) const override {
    std::vector<models::Prediction> out;
    for (const auto& t : texts) {
      double p = 0.0;
      try {
        p = std::stod(t);
      } catch (...) {
      }
      models::Prediction pr;
      pr.probs = {1.0 - p, p};
      out.push_back(pr);
    }
    return out;
  }
  std::string version() const override { return "stub-1"; }
};

class CapturingSink final : public FlagSink {
 public:
  void deliver(FlagEvent& event) noexcept override {
    std::lock_guard<std::mutex> lock(mu_);
    event.delivered = true;
    events.push_back(event);
  }
  std::vector<FlagEvent> events;

 private:
  std::mutex mu_;
};

Sensor make_sensor(std::shared_ptr<CapturingSink>& sink_out, double threshold = 0.5) {
  auto sink = std::make_shared<CapturingSink>();
  sink_out = sink;
  return Sensor(std::make_shared<StubScorer>(), threshold, sink, 8);
}

}  // namespace

TEST_CASE("score thresholding and flag emission") {
  std::shared_ptr<CapturingSink> sink;
  Sensor sensor = make_sensor(sink);

  ScoreResult high = sensor.score("0.9", "r1");
  CHECK(high.label == Label::kInsulting);
  CHECK(high.prob_insult == doctest::Approx(0.9));
  CHECK(high.model_version == "stub-1");
  CHECK(high.request_id == "r1");
  CHECK(high.latency_ms >= 0.0);
  CHECK(sink->events.size() == 1);

  ScoreResult low = sensor.score("0.2");
  CHECK(low.label == Label::kNeutral);
  CHECK(sink->events.size() == 1);  // no new event
  CHECK_FALSE(low.request_id.empty());

  ScoreResult tie = sensor.score("0.5");
  CHECK(tie.label == Label::kInsulting);  // >= rule
  CHECK(sink->events.size() == 2);
}

TEST_CASE("score_batch is order-preserving and map-equivalent") {
  std::shared_ptr<CapturingSink> sink;
  Sensor sensor = make_sensor(sink);

  std::vector<ScoreResult> batch = sensor.score_batch({"0.9", "0.1", "0.6"});
  REQUIRE(batch.size() == 3);
  CHECK(batch[0].label == Label::kInsulting);
  CHECK(batch[1].label == Label::kNeutral);
  CHECK(batch[2].label == Label::kInsulting);

  CHECK(sensor.score_batch({}).empty());

  SUBCASE("equivalence with single calls on random stub probabilities") {
    Rng rng(4);
    std::vector<std::string> texts;
    for (int i = 0; i < 8; ++i) texts.push_back(std::to_string(rng.next_double()));
    std::shared_ptr<CapturingSink> s1, s2;
    Sensor a = make_sensor(s1), b = make_sensor(s2);
    std::vector<ScoreResult> via_batch = a.score_batch(texts);
    for (size_t i = 0; i < texts.size(); ++i) {
      ScoreResult single = b.score(texts[i]);
      CHECK(via_batch[i].label == single.label);
      CHECK(via_batch[i].prob_insult == single.prob_insult);
    }
    CHECK(s1->events.size() == s2->events.size());
  }

  SUBCASE("oversize batch states the limit") {
    std::vector<std::string> too_many(9, "0.1");
    CHECK_THROWS_WITH_AS(sensor.score_batch(too_many), doctest::Contains("8"), ArgumentError);
  }
}

TEST_CASE("threshold monotonicity") {
  std::vector<std::string> texts = {"0.05", "0.3", "0.5", "0.7", "0.95"};
  std::vector<double> thresholds = {0.1, 0.3, 0.6, 0.9};
  std::vector<Label> prev(texts.size(), Label::kInsulting);
  for (double thr : thresholds) {
    std::shared_ptr<CapturingSink> sink;
    Sensor sensor = make_sensor(sink, thr);
    for (size_t i = 0; i < texts.size(); ++i) {
      Label now = sensor.score(texts[i]).label;
      if (prev[i] == Label::kNeutral) CHECK(now == Label::kNeutral);
      prev[i] = now;
    }
  }
}

TEST_CASE("flag completeness over a request sequence") {
  std::shared_ptr<CapturingSink> sink;
  Sensor sensor = make_sensor(sink);
  Rng rng(11);
  int64_t insulting = 0;
  for (int i = 0; i < 200; ++i) {
    double p = rng.next_double();
    ScoreResult r = sensor.score(std::to_string(p));
    if (r.label == Label::kInsulting) ++insulting;
  }
  CHECK(sensor.flags_emitted() == insulting);
  CHECK(static_cast<int64_t>(sink->events.size()) == insulting);
}

TEST_CASE("jsonl sink writes one parseable line per flag, digest only") {
  ts::TempDir tmp("sink");
  std::string path = tmp.file("flags.jsonl");
  auto sink = std::make_shared<JsonlFileSink>(path);
  Sensor sensor(std::make_shared<StubScorer>(), 0.5, sink, 8);

  std::string insult_a = "0.9", insult_b = "0.81";
  sensor.score(insult_a, "ra");
  sensor.score("0.2", "rn");
  sensor.score(insult_b, "rb");

  std::string content = read_text_file(path);
  std::istringstream lines(content);
  std::string line;
  std::vector<json> events;
  while (std::getline(lines, line))
    if (!line.empty()) events.push_back(json::parse(line));
  REQUIRE(events.size() == 2);
  CHECK(events[0].at("request_id") == "ra");
  CHECK(events[0].at("text_digest") == sha256_hex(insult_a));
  CHECK(events[0].at("delivery") == "delivered");
  CHECK(events[1].at("request_id") == "rb");
  // privacy: the raw text never appears anywhere in the sink file
  CHECK(content.find("\"0.9\"") == std::string::npos);
  CHECK(content.find("raw") == std::string::npos);

  SUBCASE("no flags, no file") {
    ts::TempDir tmp2("sink2");
    auto sink2 = std::make_shared<JsonlFileSink>(tmp2.file("f.jsonl"));
    Sensor quiet(std::make_shared<StubScorer>(), 0.5, sink2, 8);
    quiet.score("0.1");
    CHECK_FALSE(std::filesystem::exists(tmp2.file("f.jsonl")));
  }
}

TEST_CASE("webhook sink records failures without breaking scoring") {
  httplib::Server upstream;
  std::atomic<int> hits{0};
  upstream.Post("/hook", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    json body = json::parse(req.body);
    CHECK(body.contains("text_digest"));
    res.status = 500;
  });
  int port = upstream.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { upstream.listen_after_bind(); });
  upstream.wait_until_ready();

  SUBCASE("http 500 becomes Failed, score still succeeds") {
    auto sink = std::make_shared<WebhookSink>("http://127.0.0.1:" + std::to_string(port) + "/hook");
    FlagEvent probe;
    probe.request_id = "x";
    probe.text_digest = "d";
    sink->deliver(probe);
    CHECK_FALSE(probe.delivered);
    CHECK(probe.failure_reason == "http 500");

    Sensor sensor(std::make_shared<StubScorer>(), 0.5,
                  std::make_shared<WebhookSink>("http://127.0.0.1:" + std::to_string(port) + "/hook"),
                  8);
    ScoreResult r = sensor.score("0.99");
    CHECK(r.label == Label::kInsulting);  // sink failure is not fatal
    CHECK(hits.load() >= 1);
  }

  SUBCASE("unreachable host becomes Failed") {
    auto sink = std::make_shared<WebhookSink>("http://127.0.0.1:1/hook");
    FlagEvent probe;
    sink->deliver(probe);
    CHECK_FALSE(probe.delivered);
    CHECK(probe.failure_reason.rfind("unreachable", 0) == 0);
  }

  upstream.stop();
  server_thread.join();
}

TEST_CASE("http service round-trip") {
  auto sink = std::make_shared<CapturingSink>();
  auto sensor = std::make_shared<Sensor>(std::make_shared<StubScorer>(), 0.5, sink, 4);
  SentinelService service(sensor);
  service.start("127.0.0.1", 0);
  REQUIRE(service.port() > 0);

  httplib::Client client("127.0.0.1", service.port());

  SUBCASE("healthz reports the model version") {
    auto res = client.Get("/healthz");
    REQUIRE(res);
    CHECK(res->status == 200);
    json body = json::parse(res->body);
    CHECK(body.at("status") == "ok");
    CHECK(body.at("model_version") == "stub-1");
  }

  SUBCASE("score endpoint") {
    auto res = client.Post("/v1/score", json{{"text", "0.8"}, {"request_id", "http-1"}}.dump(),
                           "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    json body = json::parse(res->body);
    CHECK(body.at("label") == "insulting");
    CHECK(body.at("request_id") == "http-1");
    CHECK(body.at("prob_insult").get<double>() == doctest::Approx(0.8));
    CHECK(body.at("threshold").get<double>() == 0.5);
  }

  SUBCASE("missing text field names the field") {
    auto res = client.Post("/v1/score", json{{"request_id", "x"}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body).at("error").get<std::string>().find("text") !=
          std::string::npos);
  }

  SUBCASE("batch endpoint with oversize rejection") {
    auto ok = client.Post("/v1/score_batch", json{{"texts", {"0.9", "0.2"}}}.dump(),
                          "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    json body = json::parse(ok->body);
    REQUIRE(body.size() == 2);
    CHECK(body[0].at("label") == "insulting");
    CHECK(body[1].at("label") == "neutral");

    json texts = json::array();
    for (int i = 0; i < 5; ++i) texts.push_back("0.1");
    auto too_big = client.Post("/v1/score_batch", json{{"texts", texts}}.dump(),
                               "application/json");
    REQUIRE(too_big);
    CHECK(too_big->status == 413);
    CHECK(json::parse(too_big->body).at("error").get<std::string>().find("4") !=
          std::string::npos);
  }

  service.stop();
}

TEST_CASE("sentinel config parsing and env overrides") {
  SinkConfig jsonl = SinkConfig::parse("jsonl:/tmp/x.jsonl");
  CHECK(jsonl.type == SinkConfig::Type::kJsonlFile);
  CHECK(jsonl.target == "/tmp/x.jsonl");
  SinkConfig hook = SinkConfig::parse("webhook:http://h/p");
  CHECK(hook.type == SinkConfig::Type::kWebhook);
  CHECK_THROWS_AS(SinkConfig::parse("ftp://nope"), ConfigError);

  SentinelConfig cfg = SentinelConfig::from_json(
      json{{"model_dir", "m"}, {"threshold", 0.7}, {"max_batch", 16}, {"sink", "jsonl:f.jsonl"}});
  CHECK(cfg.threshold == 0.7);
  CHECK_NOTHROW(cfg.validate());

  setenv("SENTINEL_THRESHOLD", "0.25", 1);
  setenv("SENTINEL_SINK", "webhook:http://w/h", 1);
  cfg.apply_env();
  CHECK(cfg.threshold == 0.25);
  CHECK(cfg.sink.type == SinkConfig::Type::kWebhook);
  unsetenv("SENTINEL_THRESHOLD");
  unsetenv("SENTINEL_SINK");

  SentinelConfig bad;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("service over a real trained bilstm") {
  models::TrainedModel model = ts::train_small_bilstm(19, 80, 3);
  auto scorer = std::make_shared<ModelScorer>(std::move(model));
  auto sink = std::make_shared<CapturingSink>();
  auto sensor = std::make_shared<Sensor>(scorer, 0.5, sink, 16);
  SentinelService service(sensor);
  service.start("127.0.0.1", 0);

  httplib::Client client("127.0.0.1", service.port());
  auto res = client.Post("/v1/score", json{{"text", "you pathetic idiot"}}.dump(),
                         "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  json body = json::parse(res->body);
  CHECK(body.at("model_version").get<std::string>().rfind("bilstm-", 0) == 0);
  double prob = body.at("prob_insult").get<double>();
  CHECK(prob >= 0.0);
  CHECK(prob <= 1.0);
  service.stop();
}
