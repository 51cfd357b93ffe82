#include "bullysense/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

namespace bullysense::eval {

using nlohmann::json;

namespace {

// Shortest representation that parses back to the same double.
std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

ConfusionMatrix confusion(const std::vector<Label>& gold, const std::vector<Label>& pred) {
  if (gold.size() != pred.size())
    throw ArgumentError("confusion: gold has " + std::to_string(gold.size()) + " labels, pred has " +
                        std::to_string(pred.size()));
  ConfusionMatrix cm;
  for (size_t i = 0; i < gold.size(); ++i) {
    bool g = gold[i] == Label::kInsulting;
    bool p = pred[i] == Label::kInsulting;
    if (g && p)
      ++cm.tp;
    else if (g && !p)
      ++cm.fn;
    else if (!g && p)
      ++cm.fp;
    else
      ++cm.tn;
  }
  return cm;
}

ClassMetrics prf(const ConfusionMatrix& cm, Label positive) {
  int64_t tp, fp, fn;
  if (positive == Label::kInsulting) {
    tp = cm.tp;
    fp = cm.fp;
    fn = cm.fn;
  } else {
    tp = cm.tn;
    fp = cm.fn;
    fn = cm.fp;
  }
  ClassMetrics m;
  m.support = tp + fn;
  m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                        : 0.0;
  return m;
}

double macro_f1(double f1_neutral, double f1_insult) { return (f1_neutral + f1_insult) / 2.0; }

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ArgumentError("accuracy: empty confusion matrix");
  return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

ClassificationReport report(const std::string& model_id, const std::vector<Label>& gold,
                            const std::vector<Label>& pred) {
  ClassificationReport r;
  r.model_id = model_id;
  r.cm = confusion(gold, pred);
  r.neutral = prf(r.cm, Label::kNeutral);
  r.insulting = prf(r.cm, Label::kInsulting);
  r.macro_f1 = macro_f1(r.neutral.f1, r.insulting.f1);
  r.accuracy = accuracy(r.cm);
  return r;
}

ComparisonRow row_from_report(const ClassificationReport& r) {
  ComparisonRow row;
  row.model_id = r.model_id;
  row.neutral = r.neutral;
  row.insulting = r.insulting;
  row.macro_f1 = r.macro_f1;
  row.accuracy = r.accuracy;
  row.is_baseline = false;
  return row;
}

ComparisonTable compare(const std::vector<ClassificationReport>& reports,
                        const std::optional<ComparisonRow>& baseline) {
  if (reports.empty()) throw ArgumentError("compare: no reports");
  std::set<std::string> ids;
  for (const auto& r : reports)
    if (!ids.insert(r.model_id).second)
      throw ArgumentError("compare: duplicate model_id \"" + r.model_id + "\"");

  ComparisonTable table;
  for (const auto& r : reports) table.rows.push_back(row_from_report(r));
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) {
                     return a.accuracy > b.accuracy;
                   });
  if (baseline) {
    ComparisonRow row = *baseline;
    row.is_baseline = true;
    table.rows.push_back(row);
  }
  return table;
}

namespace {

struct Bar {
  double value;
  std::string color;
};

struct Group {
  std::string label;
  std::vector<Bar> bars;
};

// Fixed-size bar chart; values are expected in [0, 1].
std::string svg_bar_chart(const std::string& title, const std::vector<Group>& groups,
                          const std::vector<std::pair<std::string, std::string>>& legend) {
  const double width = 960, height = 480;
  const double left = 70, right = width - 30, top = 60, bottom = height - 70;
  std::string s;
  char buf[512];
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"480\" "
       "font-family=\"sans-serif\">\n";
  s += "<rect width=\"960\" height=\"480\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.0f\" y=\"30\" font-size=\"18\" text-anchor=\"middle\">%s</text>\n",
                width / 2, title.c_str());
  s += buf;
  // y axis with ticks every 0.2
  for (int i = 0; i <= 5; ++i) {
    double v = i * 0.2;
    double y = bottom - v * (bottom - top);
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", left,
                  y, right, y);
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" text-anchor=\"end\">%.1f</text>\n",
                  left - 8, y + 4, v);
    s += buf;
  }
  size_t ngroups = groups.size();
  double group_w = (right - left) / static_cast<double>(std::max<size_t>(ngroups, 1));
  for (size_t g = 0; g < ngroups; ++g) {
    const auto& grp = groups[g];
    double gx = left + static_cast<double>(g) * group_w;
    size_t nbars = grp.bars.size();
    double pad = group_w * 0.15;
    double bar_w = (group_w - 2 * pad) / static_cast<double>(std::max<size_t>(nbars, 1));
    for (size_t b = 0; b < nbars; ++b) {
      double v = std::clamp(grp.bars[b].value, 0.0, 1.0);
      double x = gx + pad + static_cast<double>(b) * bar_w;
      double h = v * (bottom - top);
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n", x,
                    bottom - h, bar_w * 0.9, h, grp.bars[b].color.c_str());
      s += buf;
      std::snprintf(
          buf, sizeof(buf),
          "<text x=\"%.2f\" y=\"%.2f\" font-size=\"10\" text-anchor=\"middle\">%.2f</text>\n",
          x + bar_w * 0.45, bottom - h - 4, grp.bars[b].value);
      s += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">%s</text>\n",
                  gx + group_w / 2, bottom + 18, grp.label.c_str());
    s += buf;
  }
  double lx = left, ly = height - 28;
  for (const auto& [name, color] : legend) {
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"12\" fill=\"%s\"/>\n", lx,
                  ly - 10, color.c_str());
    s += buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\">%s</text>\n",
                  lx + 16, ly, name.c_str());
    s += buf;
    lx += 16.0 + 8.0 * static_cast<double>(name.size()) + 24.0;
  }
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", left,
                bottom, right, bottom);
  s += buf;
  s += "</svg>\n";
  return s;
}

constexpr const char* kColors[6] = {"#4c78a8", "#9ecae9", "#f58518",
                                    "#ffbf79", "#54a24b", "#88d27a"};

}  // namespace

std::vector<std::string> render_charts(const ComparisonTable& table, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    std::string path = (fs::path(out_dir) / name).string();
    write_text_file(path, content);
    written.push_back(path);
  };

  // (a) per-class precision/recall/f1, grouped by model
  {
    std::vector<Group> groups;
    std::string csv = "model_id,class,precision,recall,f1\n";
    for (const auto& row : table.rows) {
      Group g{row.model_id,
              {{row.neutral.precision, kColors[0]},
               {row.neutral.recall, kColors[1]},
               {row.neutral.f1, kColors[2]},
               {row.insulting.precision, kColors[3]},
               {row.insulting.recall, kColors[4]},
               {row.insulting.f1, kColors[5]}}};
      groups.push_back(std::move(g));
      csv += row.model_id + ",neutral," + fmt_double(row.neutral.precision) + "," +
             fmt_double(row.neutral.recall) + "," + fmt_double(row.neutral.f1) + "\n";
      csv += row.model_id + ",insulting," + fmt_double(row.insulting.precision) + "," +
             fmt_double(row.insulting.recall) + "," + fmt_double(row.insulting.f1) + "\n";
    }
    emit("classification_report.svg",
         svg_bar_chart("Per-class precision / recall / F1", groups,
                       {{"neutral P", kColors[0]},
                        {"neutral R", kColors[1]},
                        {"neutral F1", kColors[2]},
                        {"insulting P", kColors[3]},
                        {"insulting R", kColors[4]},
                        {"insulting F1", kColors[5]}}));
    emit("classification_report.csv", csv);
  }

  // (b) accuracy per model
  {
    std::vector<Group> groups;
    std::string csv = "model_id,accuracy\n";
    for (const auto& row : table.rows) {
      groups.push_back(Group{row.model_id, {{row.accuracy, kColors[0]}}});
      csv += row.model_id + "," + fmt_double(row.accuracy) + "\n";
    }
    emit("accuracy.svg", svg_bar_chart("Classifier accuracy", groups, {{"accuracy", kColors[0]}}));
    emit("accuracy.csv", csv);
  }

  // (c) best model vs baseline
  {
    const ComparisonRow* best = nullptr;
    const ComparisonRow* base = nullptr;
    for (const auto& row : table.rows) {
      if (row.is_baseline) {
        if (!base) base = &row;
      } else if (!best) {
        best = &row;  // rows are accuracy-sorted
      }
    }
    std::vector<Group> groups;
    std::string csv = "model_id,accuracy,macro_f1\n";
    for (const ComparisonRow* row : {best, base}) {
      if (!row) continue;
      groups.push_back(
          Group{row->model_id, {{row->accuracy, kColors[0]}, {row->macro_f1, kColors[2]}}});
      csv += row->model_id + "," + fmt_double(row->accuracy) + "," + fmt_double(row->macro_f1) +
             "\n";
    }
    emit("baseline_comparison.svg",
         svg_bar_chart("Best model vs baseline", groups,
                       {{"accuracy", kColors[0]}, {"macro F1", kColors[2]}}));
    emit("baseline_comparison.csv", csv);
  }
  return written;
}

json report_to_json(const ClassificationReport& r) {
  auto cls = [](const ClassMetrics& m) {
    return json{{"precision", round4(m.precision)},
                {"recall", round4(m.recall)},
                {"f1", round4(m.f1)},
                {"support", m.support}};
  };
  return json{{"model_id", r.model_id},
              {"classes", {{"neutral", cls(r.neutral)}, {"insulting", cls(r.insulting)}}},
              {"macro_f1", round4(r.macro_f1)},
              {"accuracy", round4(r.accuracy)},
              {"confusion", {{"tn", r.cm.tn}, {"fp", r.cm.fp}, {"fn", r.cm.fn}, {"tp", r.cm.tp}}}};
}

ClassificationReport report_from_json(const json& j) {
  try {
    ClassificationReport r;
    r.model_id = j.at("model_id").get<std::string>();
    auto cls = [&](const char* name) {
      const auto& c = j.at("classes").at(name);
      ClassMetrics m;
      m.precision = c.at("precision").get<double>();
      m.recall = c.at("recall").get<double>();
      m.f1 = c.at("f1").get<double>();
      m.support = c.value("support", static_cast<int64_t>(0));
      return m;
    };
    r.neutral = cls("neutral");
    r.insulting = cls("insulting");
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    const auto& cm = j.at("confusion");
    r.cm = ConfusionMatrix{cm.at("tn").get<int64_t>(), cm.at("fp").get<int64_t>(),
                           cm.at("fn").get<int64_t>(), cm.at("tp").get<int64_t>()};
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report json: ") + e.what());
  }
}

ComparisonRow baseline_row_from_json(const json& j) {
  try {
    ComparisonRow row;
    row.model_id = j.value("model_id", "baseline");
    auto cls = [&](const char* name) {
      const auto& c = j.at("classes").at(name);
      ClassMetrics m;
      m.precision = c.at("precision").get<double>();
      m.recall = c.at("recall").get<double>();
      m.f1 = c.at("f1").get<double>();
      m.support = c.value("support", static_cast<int64_t>(0));
      return m;
    };
    row.neutral = cls("neutral");
    row.insulting = cls("insulting");
    row.macro_f1 = j.at("macro_f1").get<double>();
    row.accuracy = j.at("accuracy").get<double>();
    row.is_baseline = true;
    return row;
  } catch (const json::exception& e) {
    throw FormatError(std::string("baseline fixture json: ") + e.what());
  }
}

}  // namespace bullysense::eval
