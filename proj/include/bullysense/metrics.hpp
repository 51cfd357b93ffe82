#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bullysense/common.hpp"

namespace bullysense::eval {

// Positive class is Insulting.
struct ConfusionMatrix {
  int64_t tn = 0, fp = 0, fn = 0, tp = 0;

  int64_t total() const { return tn + fp + fn + tp; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t support = 0;
};

struct ClassificationReport {
  std::string model_id;
  ClassMetrics neutral;
  ClassMetrics insulting;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix cm;
};

ConfusionMatrix confusion(const std::vector<Label>& gold, const std::vector<Label>& pred);

// Zero-division convention: precision/recall with an empty denominator are
// 0.0, and f1 is 0.0 when precision+recall is 0.
ClassMetrics prf(const ConfusionMatrix& cm, Label positive);

double macro_f1(double f1_neutral, double f1_insult);
double accuracy(const ConfusionMatrix& cm);

ClassificationReport report(const std::string& model_id, const std::vector<Label>& gold,
                            const std::vector<Label>& pred);

struct ComparisonRow {
  std::string model_id;
  ClassMetrics neutral;
  ClassMetrics insulting;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  bool is_baseline = false;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;  // sorted by descending accuracy; baseline last
};

ComparisonTable compare(const std::vector<ClassificationReport>& reports,
                        const std::optional<ComparisonRow>& baseline);

// Emits three SVG charts plus a CSV next to each: per-class P/R/F1 bars,
// accuracy bars, and best-model-vs-baseline bars. Returns written paths.
std::vector<std::string> render_charts(const ComparisonTable& table, const std::string& out_dir);

// Report JSON schema: {model_id, classes:{neutral:{...}, insulting:{...}},
// macro_f1, accuracy, confusion:{tn,fp,fn,tp}}. Metrics rounded to 4 dp.
nlohmann::json report_to_json(const ClassificationReport& r);
ClassificationReport report_from_json(const nlohmann::json& j);

ComparisonRow row_from_report(const ClassificationReport& r);
ComparisonRow baseline_row_from_json(const nlohmann::json& j);

}  // namespace bullysense::eval
