#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "bullysense/common.hpp"

namespace bullysense::textprep {

struct CleanOptions {
  bool lowercase = true;
  bool strip_urls = true;
  bool strip_user_handles = true;
  bool strip_punctuation = true;
  bool collapse_whitespace = true;
};

// Applies the enabled transforms in fixed order:
// URL strip -> handle strip -> lowercase -> punctuation strip ->
// whitespace collapse + trim. Idempotent.
std::string clean_text(std::string_view text, const CleanOptions& options);

struct StopwordList {
  std::unordered_set<std::string> words;
  std::string source_id;

  // One lowercase token per line, UTF-8. source_id is derived from the
  // file content so the snapshot is self-identifying.
  static StopwordList load(const std::string& path);
  static StopwordList from_words(std::vector<std::string> words, std::string source_id);
};

std::vector<std::string> word_tokenize(std::string_view clean);

// Drops stopwords and single-character tokens, preserving order.
std::vector<std::string> remove_stop_and_single(const std::vector<std::string>& tokens,
                                                const StopwordList& stopwords);

class Vocabulary {
 public:
  static constexpr int32_t kPadId = 0;
  static constexpr int32_t kUnkId = 1;

  // Tokens with corpus frequency >= min_freq, ordered by descending
  // frequency then lexicographically, ids starting at 2.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpora_tokens,
                          int min_freq);

  int32_t id_of(std::string_view token) const;
  const std::string& token_of(int32_t id) const;
  bool contains(std::string_view token) const;
  int32_t size() const { return static_cast<int32_t>(id_to_token_.size()); }
  int min_freq() const { return min_freq_; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;  // [0]="<pad>", [1]="<unk>"
  int min_freq_ = 1;
};

std::vector<int32_t> encode_words(const std::vector<std::string>& tokens, const Vocabulary& vocab);

struct EncodedSequence {
  std::vector<int32_t> ids;    // length == max_len
  std::vector<uint8_t> mask;   // 1 for real tokens, prefix-run
  bool truncated = false;
  int64_t original_length = 0;

  int64_t mask_sum() const;
  bool operator==(const EncodedSequence&) const = default;
};

EncodedSequence pad_truncate(const std::vector<int32_t>& ids, int max_len, int32_t pad_id);

struct EmbeddingTable {
  int dim = 0;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows;  // vocab size x dim
  double coverage = 0.0;  // fraction of non-reserved vocab tokens found in the file
};

// Plain-text word-vector format: optional "count dim" header line, then
// "token v1 ... v_dim" per line. Vocab tokens absent from the file get a
// seeded uniform [-0.25, 0.25] row; the PAD row is all zeros.
EmbeddingTable load_embedding_file(const std::string& path, const Vocabulary& vocab,
                                   int expected_dim, uint64_t seed);

// Preprocessing profile: how raw comment text is prepared before encoding.
// The word profile feeds the BiLSTM path (full chain); the subword profile
// keeps case/punctuation for pretrained tokenizers.
struct PreprocessProfile {
  CleanOptions clean;
  bool remove_stopwords = true;

  static PreprocessProfile word_default();
  static PreprocessProfile subword_default();
};

}  // namespace bullysense::textprep
