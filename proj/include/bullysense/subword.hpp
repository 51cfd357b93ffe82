#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "bullysense/textprep.hpp"

namespace bullysense::textprep {

// Tokenizer contract for pretrained checkpoints. Implementations are
// immutable after construction and safe to share across threads.
class SubwordEncoder {
 public:
  virtual ~SubwordEncoder() = default;

  virtual EncodedSequence encode(std::string_view text) const = 0;
  virtual int32_t vocab_size() const = 0;
  virtual int32_t pad_id() const = 0;

  const std::string& checkpoint_id() const { return checkpoint_id_; }
  int max_length() const { return max_length_; }

  // Reads tokenizer.json from a checkpoint/asset directory. Supported
  // types: "wordpiece" (vocab.txt) and "byte_bpe" (vocab.json + merges.txt).
  static std::unique_ptr<SubwordEncoder> load(const std::string& dir,
                                              const std::string& checkpoint_id, int max_length);

  // Copies tokenizer.json and the files it references into dst_dir.
  static void copy_assets(const std::string& src_dir, const std::string& dst_dir);

 protected:
  SubwordEncoder(std::string checkpoint_id, int max_length)
      : checkpoint_id_(std::move(checkpoint_id)), max_length_(max_length) {
    if (max_length < 3) throw ArgumentError("subword encoder max_length must be >= 3");
  }

  std::string checkpoint_id_;
  int max_length_;
};

}  // namespace bullysense::textprep
