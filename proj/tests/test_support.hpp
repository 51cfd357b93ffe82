#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bullysense/common.hpp"
#include "bullysense/corpus.hpp"
#include "bullysense/metrics.hpp"
#include "bullysense/models.hpp"
#include "bullysense/textprep.hpp"

namespace bullysense::testsup {

// Unique scratch directory under the build tree; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const;

 private:
  std::string path_;
};

std::string fixture_path(const std::string& name);
std::string data_path(const std::string& name);

// Random labeled corpus whose text tokens correlate with the label, so
// models can actually learn it. Both classes have at least `min_per_class`
// records when total size allows.
corpus::Corpus synthetic_corpus(size_t size, uint64_t seed, int min_per_class = 3);

// The 10-record memorization corpus for overfit checks.
corpus::Corpus memorization_corpus();

// Brute-force metric oracle: every number recomputed from first
// principles, no shared code with eval::report.
struct OracleReport {
  double precision_neutral, recall_neutral, f1_neutral;
  double precision_insult, recall_insult, f1_insult;
  double macro_f1, accuracy;
  int64_t tn, fp, fn, tp;
};
OracleReport oracle_report(const std::vector<Label>& gold, const std::vector<Label>& pred);

// Writes a tiny BERT-shaped checkpoint (config.json, weights.bin,
// tokenizer.json, vocab.txt) whose wordpiece vocab covers the given texts.
void write_tiny_bert_checkpoint(const std::string& dir, uint64_t seed,
                                const std::vector<std::string>& vocab_texts,
                                int hidden = 32, int layers = 2, int heads = 2);

// Same idea with a byte-BPE tokenizer (vocab.json + merges.txt).
void write_tiny_roberta_checkpoint(const std::string& dir, uint64_t seed, int hidden = 32,
                                   int layers = 2, int heads = 2);

textprep::StopwordList tiny_stopwords();

// Bitwise matrix equality (Eigen's operator== is coefficient-wise).
template <typename A, typename B>
bool mat_eq(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (a(r, c) != b(r, c)) return false;
  return true;
}

// Builds and trains a small real BiLSTM on a synthetic corpus; used by
// sentinel/CLI tests that need a genuine artifact.
models::TrainedModel train_small_bilstm(uint64_t seed, size_t corpus_size = 120,
                                        int max_epochs = 6);

}  // namespace bullysense::testsup
