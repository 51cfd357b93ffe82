#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bullysense/common.hpp"

namespace bullysense::corpus {

enum class Origin { kTrainFile, kTestFile };

struct LabeledComment {
  int64_t id = 0;
  std::optional<int64_t> date;  // unix seconds, UTC
  std::string text;             // unescaped, non-empty
  Label label = Label::kNeutral;
  Origin origin = Origin::kTrainFile;
};

struct LabelCounts {
  int64_t total = 0;
  int64_t neutral = 0;
  int64_t insulting = 0;

  bool operator==(const LabelCounts&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<LabeledComment> records;
  LabelCounts counts;
};

struct SplitSpec {
  std::array<double, 3> ratios{0.6, 0.2, 0.2};  // train, val, test
  uint64_t seed = 0;
  bool stratified = true;

  void validate() const;
};

struct SplitBundle {
  Corpus train;
  Corpus val;
  Corpus test;
  SplitSpec spec;
  // Original (source-corpus) ids per part, in part order.
  std::array<std::vector<int64_t>, 3> source_ids;
};

// Recount from scratch; Corpus::counts must always equal this.
LabelCounts stats(const Corpus& c);

Corpus load_source_csv(const std::string& path, Origin origin);
Corpus merge(const std::vector<Corpus>& parts, const std::string& name = "merged");
SplitBundle split(const Corpus& c, const SplitSpec& spec);

// Persists with header Insult,Date,Comment; comments re-escaped so that
// load(write(c)) round-trips exactly.
void write_csv(const Corpus& c, const std::string& path);

// Split manifest JSON: {seed, ratios, stratified, ids per part} plus the
// source corpus path/hash so downstream stages can re-materialize parts.
void write_split_manifest(const SplitBundle& bundle, const std::string& corpus_path,
                          const std::string& corpus_sha256, const std::string& out_path);

struct SplitManifest {
  SplitSpec spec;
  std::array<std::vector<int64_t>, 3> ids;
  std::string corpus_path;
  std::string corpus_sha256;
};

SplitManifest read_split_manifest(const std::string& path);

// Rebuilds the three parts of a previously recorded split from the source
// corpus (ids refer to positions in the merged corpus).
SplitBundle materialize_split(const Corpus& source, const SplitManifest& manifest);

// Resolves the corpus's backslash escapes (\n \t \" \\ \xHH \uHHHH) once;
// unknown escapes are kept literal.
std::string unescape_comment(std::string_view raw);
std::string escape_comment(std::string_view text);

}  // namespace bullysense::corpus
