#include "bullysense/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <utility>

#include <json.hpp>

#include "bullysense/csv.hpp"

namespace bullysense::corpus {

using nlohmann::json;

namespace {

int hex_val(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

LabelCounts recount(const std::vector<LabeledComment>& records) {
  LabelCounts c;
  c.total = static_cast<int64_t>(records.size());
  for (const auto& r : records) {
    if (r.label == Label::kInsulting)
      ++c.insulting;
    else
      ++c.neutral;
  }
  return c;
}

}  // namespace

std::string unescape_comment(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  size_t i = 0;
  while (i < raw.size()) {
    char c = raw[i];
    if (c != '\\' || i + 1 >= raw.size()) {
      out.push_back(c);
      ++i;
      continue;
    }
    char e = raw[i + 1];
    switch (e) {
      case 'n': out.push_back('\n'); i += 2; break;
      case 't': out.push_back('\t'); i += 2; break;
      case '"': out.push_back('"'); i += 2; break;
      case '\\': out.push_back('\\'); i += 2; break;
      case 'x': {
        if (i + 3 < raw.size() && hex_val(raw[i + 2]) >= 0 && hex_val(raw[i + 3]) >= 0) {
          uint32_t cp = static_cast<uint32_t>(hex_val(raw[i + 2]) * 16 + hex_val(raw[i + 3]));
          utf8_append(out, cp);
          i += 4;
        } else {
          out.push_back(c);
          ++i;
        }
        break;
      }
      case 'u': {
        if (i + 5 < raw.size() && hex_val(raw[i + 2]) >= 0 && hex_val(raw[i + 3]) >= 0 &&
            hex_val(raw[i + 4]) >= 0 && hex_val(raw[i + 5]) >= 0) {
          uint32_t cp = 0;
          for (size_t k = 2; k <= 5; ++k) cp = cp * 16 + static_cast<uint32_t>(hex_val(raw[i + k]));
          utf8_append(out, cp);
          i += 6;
        } else {
          out.push_back(c);
          ++i;
        }
        break;
      }
      default:
        // Unknown escape: keep both characters.
        out.push_back(c);
        out.push_back(e);
        i += 2;
        break;
    }
  }
  return out;
}

std::string escape_comment(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\x%02x", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  return out;
}

Corpus load_source_csv(const std::string& path, Origin origin) {
  std::string content = read_text_file(path);
  csv::Reader reader(std::move(content));
  csv::Record rec;
  if (!reader.next(rec)) throw SchemaError("empty file: " + path);

  const std::vector<std::string> required = {"Insult", "Date", "Comment"};
  std::map<std::string, size_t> col;
  for (size_t i = 0; i < rec.fields.size(); ++i) col[rec.fields[i]] = i;
  for (const auto& name : required)
    if (!col.count(name)) throw SchemaError("missing required column \"" + name + "\" in " + path);
  for (const auto& [name, idx] : col)
    if (std::find(required.begin(), required.end(), name) == required.end() && name != "Usage")
      throw SchemaError("unexpected column \"" + name + "\" in " + path);
  size_t insult_idx = col["Insult"], date_idx = col["Date"], comment_idx = col["Comment"];
  size_t ncols = rec.fields.size();

  Corpus out;
  out.name = path;
  int64_t next_id = 0;
  while (reader.next(rec)) {
    if (rec.fields.size() != ncols)
      throw RowError("row at line " + std::to_string(rec.line_number) + ": expected " +
                     std::to_string(ncols) + " fields, got " + std::to_string(rec.fields.size()));
    LabeledComment r;
    r.id = next_id++;
    r.origin = origin;

    const std::string& lab = rec.fields[insult_idx];
    if (lab == "0")
      r.label = Label::kNeutral;
    else if (lab == "1")
      r.label = Label::kInsulting;
    else
      throw RowError("row at line " + std::to_string(rec.line_number) +
                     ": label outside {0,1}: \"" + lab + "\"");

    const std::string& date = rec.fields[date_idx];
    if (!date.empty()) {
      r.date = parse_compact_utc(date);
      if (!r.date)
        std::cerr << "warning: " << path << " line " << rec.line_number
                  << ": unparseable date \"" << date << "\", treated as absent\n";
    }

    std::string comment = rec.fields[comment_idx];
    // The source files wrap comment values in an extra quote pair.
    if (comment.size() >= 2 && comment.front() == '"' && comment.back() == '"')
      comment = comment.substr(1, comment.size() - 2);
    r.text = unescape_comment(comment);
    if (r.text.empty())
      throw RowError("row at line " + std::to_string(rec.line_number) + ": empty comment text");
    out.records.push_back(std::move(r));
  }
  out.counts = recount(out.records);
  return out;
}

LabelCounts stats(const Corpus& c) { return recount(c.records); }

Corpus merge(const std::vector<Corpus>& parts, const std::string& name) {
  if (parts.empty()) throw ArgumentError("merge: empty parts list");
  Corpus out;
  out.name = name;
  int64_t next_id = 0;
  for (const auto& p : parts) {
    for (const auto& r : p.records) {
      LabeledComment copy = r;
      copy.id = next_id++;
      out.records.push_back(std::move(copy));
    }
  }
  out.counts = recount(out.records);
  return out;
}

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw ArgumentError("split ratios must each be > 0");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("split ratios must sum to 1.0");
}

namespace {

Corpus make_part(const Corpus& source, const std::string& part_name,
                 const std::vector<int64_t>& ids) {
  Corpus out;
  out.name = source.name + "/" + part_name;
  out.records.reserve(ids.size());
  int64_t next_id = 0;
  for (int64_t src_id : ids) {
    if (src_id < 0 || src_id >= static_cast<int64_t>(source.records.size()))
      throw ArgumentError("split id out of range: " + std::to_string(src_id));
    LabeledComment copy = source.records[static_cast<size_t>(src_id)];
    copy.id = next_id++;
    out.records.push_back(std::move(copy));
  }
  out.counts = recount(out.records);
  return out;
}

}  // namespace

SplitBundle split(const Corpus& c, const SplitSpec& spec) {
  spec.validate();
  const int64_t n = static_cast<int64_t>(c.records.size());
  if (n < 5) throw ArgumentError("split requires at least 5 records, got " + std::to_string(n));

  // Rounding rule: train and val round to nearest, test takes the rest.
  const int64_t n_train = std::llround(spec.ratios[0] * static_cast<double>(n));
  const int64_t n_val = std::llround(spec.ratios[1] * static_cast<double>(n));
  const int64_t n_test = n - n_train - n_val;
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ArgumentError("split sizes round below zero");
  const std::array<int64_t, 3> targets = {n_train, n_val, n_test};

  Rng rng(spec.seed);
  std::array<std::vector<int64_t>, 3> part_ids;

  if (!spec.stratified) {
    std::vector<int64_t> ids(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = i;
    rng.shuffle(ids);
    size_t pos = 0;
    for (size_t p = 0; p < 3; ++p) {
      part_ids[p].assign(ids.begin() + static_cast<int64_t>(pos),
                         ids.begin() + static_cast<int64_t>(pos) + targets[p]);
      pos += static_cast<size_t>(targets[p]);
    }
  } else {
    // Per-class id pools, shuffled; label order is fixed so the RNG stream
    // is reproducible.
    std::array<std::vector<int64_t>, 2> pools;
    for (const auto& r : c.records) pools[static_cast<size_t>(label_to_int(r.label))].push_back(r.id);
    for (auto& pool : pools) {
      if (!pool.empty() && pool.size() < 3)
        throw StratificationError("stratified split: class with " + std::to_string(pool.size()) +
                                  " records cannot cover 3 parts");
      rng.shuffle(pool);
    }

    // Floor allocation plus largest-remainder fill, constrained so each
    // part hits its global target exactly. Keeps every class count within
    // one record of its ideal share.
    int64_t alloc[2][3];
    double frac[2][3];
    int64_t leftover[2] = {0, 0};
    std::array<int64_t, 3> deficit = targets;
    for (size_t cls = 0; cls < 2; ++cls) {
      int64_t pool_n = static_cast<int64_t>(pools[cls].size());
      int64_t assigned = 0;
      for (size_t p = 0; p < 3; ++p) {
        double quota =
            static_cast<double>(pool_n) * static_cast<double>(targets[p]) / static_cast<double>(n);
        alloc[cls][p] = static_cast<int64_t>(std::floor(quota));
        frac[cls][p] = quota - std::floor(quota);
        assigned += alloc[cls][p];
        deficit[p] -= alloc[cls][p];
      }
      leftover[cls] = pool_n - assigned;
    }
    struct Cand {
      double frac;
      size_t cls, part;
    };
    std::vector<Cand> cands;
    for (size_t cls = 0; cls < 2; ++cls)
      for (size_t p = 0; p < 3; ++p) cands.push_back({frac[cls][p], cls, p});
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.frac != b.frac) return a.frac > b.frac;
      if (a.part != b.part) return a.part < b.part;
      return a.cls < b.cls;
    });
    for (const auto& cd : cands) {
      if (leftover[cd.cls] > 0 && deficit[cd.part] > 0) {
        ++alloc[cd.cls][cd.part];
        --leftover[cd.cls];
        --deficit[cd.part];
      }
    }

    // Consume each class pool in part order, then shuffle within parts so
    // classes are interleaved.
    std::array<size_t, 2> cursor = {0, 0};
    for (size_t p = 0; p < 3; ++p) {
      for (size_t cls = 0; cls < 2; ++cls) {
        for (int64_t k = 0; k < alloc[cls][p]; ++k)
          part_ids[p].push_back(pools[cls][cursor[cls]++]);
      }
      rng.shuffle(part_ids[p]);
    }
  }

  SplitBundle bundle;
  bundle.spec = spec;
  bundle.source_ids = part_ids;
  bundle.train = make_part(c, "train", part_ids[0]);
  bundle.val = make_part(c, "val", part_ids[1]);
  bundle.test = make_part(c, "test", part_ids[2]);
  return bundle;
}

void write_csv(const Corpus& c, const std::string& path) {
  std::string out = "Insult,Date,Comment\n";
  for (const auto& r : c.records) {
    out += std::to_string(label_to_int(r.label));
    out.push_back(',');
    if (r.date) out += format_compact_utc(*r.date);
    out.push_back(',');
    out.push_back('"');
    out += escape_comment(r.text);
    out.push_back('"');
    out.push_back('\n');
  }
  write_text_file(path, out);
}

void write_split_manifest(const SplitBundle& bundle, const std::string& corpus_path,
                          const std::string& corpus_sha256, const std::string& out_path) {
  json j;
  j["seed"] = bundle.spec.seed;
  j["ratios"] = bundle.spec.ratios;
  j["stratified"] = bundle.spec.stratified;
  j["ids"] = {{"train", bundle.source_ids[0]},
              {"val", bundle.source_ids[1]},
              {"test", bundle.source_ids[2]}};
  j["corpus_path"] = corpus_path;
  j["corpus_sha256"] = corpus_sha256;
  write_text_file(out_path, j.dump(2) + "\n");
}

SplitManifest read_split_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError("split manifest " + path + ": " + e.what());
  }
  try {
    SplitManifest m;
    m.spec.seed = j.at("seed").get<uint64_t>();
    auto ratios = j.at("ratios");
    for (size_t i = 0; i < 3; ++i) m.spec.ratios[i] = ratios.at(i).get<double>();
    m.spec.stratified = j.at("stratified").get<bool>();
    m.ids[0] = j.at("ids").at("train").get<std::vector<int64_t>>();
    m.ids[1] = j.at("ids").at("val").get<std::vector<int64_t>>();
    m.ids[2] = j.at("ids").at("test").get<std::vector<int64_t>>();
    m.corpus_path = j.value("corpus_path", "");
    m.corpus_sha256 = j.value("corpus_sha256", "");
    return m;
  } catch (const json::exception& e) {
    throw FormatError("split manifest " + path + ": " + e.what());
  }
}

SplitBundle materialize_split(const Corpus& source, const SplitManifest& manifest) {
  SplitBundle bundle;
  bundle.spec = manifest.spec;
  bundle.source_ids = manifest.ids;
  bundle.train = make_part(source, "train", manifest.ids[0]);
  bundle.val = make_part(source, "val", manifest.ids[1]);
  bundle.test = make_part(source, "test", manifest.ids[2]);
  return bundle;
}

}  // namespace bullysense::corpus
