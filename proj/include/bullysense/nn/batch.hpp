#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bullysense/nn/tensor.hpp"
#include "bullysense/textprep.hpp"

namespace bullysense::nn {

using IdsMat = Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One minibatch of encoded sequences, trimmed to the longest real length
// in the batch (at least 1 column so empty sequences stay representable).
struct EncodedBatch {
  IdsMat ids;                   // B x L
  std::vector<int> lengths;     // real token count per row
  std::vector<int> labels;      // empty for inference batches
  int32_t pad_id = 0;

  int rows() const { return static_cast<int>(ids.rows()); }
  int cols() const { return static_cast<int>(ids.cols()); }
};

inline EncodedBatch make_batch(const std::vector<textprep::EncodedSequence>& seqs,
                               const std::vector<size_t>& indices, int32_t pad_id,
                               const std::vector<int>* all_labels) {
  EncodedBatch b;
  b.pad_id = pad_id;
  int max_len = 1;
  for (size_t idx : indices)
    max_len = std::max(max_len, static_cast<int>(seqs[idx].mask_sum()));
  b.ids.setConstant(static_cast<Eigen::Index>(indices.size()), max_len, pad_id);
  b.lengths.resize(indices.size());
  for (size_t r = 0; r < indices.size(); ++r) {
    const auto& seq = seqs[indices[r]];
    int len = static_cast<int>(seq.mask_sum());
    b.lengths[r] = len;
    for (int t = 0; t < len; ++t) b.ids(static_cast<Eigen::Index>(r), t) = seq.ids[static_cast<size_t>(t)];
    if (all_labels) b.labels.push_back((*all_labels)[indices[r]]);
  }
  return b;
}

// Row-wise softmax with max subtraction.
template <typename S>
Mat<S> softmax_rows(const Mat<S>& logits) {
  Mat<S> p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    S mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

// Mean cross-entropy over the batch; fills dlogits = (p - onehot) / B.
template <typename S>
S softmax_cross_entropy(const Mat<S>& logits, const std::vector<int>& labels, Mat<S>& dlogits) {
  Mat<S> p = softmax_rows(logits);
  const Eigen::Index b = logits.rows();
  S loss = S(0);
  dlogits = p;
  for (Eigen::Index r = 0; r < b; ++r) {
    int y = labels[static_cast<size_t>(r)];
    // log(0) = -inf on purpose: a zero probability for the true class is
    // divergence and must surface as a non-finite loss.
    loss -= std::log(p(r, y));
    dlogits(r, y) -= S(1);
  }
  loss /= static_cast<S>(b);
  dlogits /= static_cast<S>(b);
  return loss;
}

// Inverted dropout mask: entries are 1/keep with probability keep, else 0.
template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double dropout, Rng& rng) {
  Mat<S> m(rows, cols);
  if (dropout <= 0.0) {
    m.setOnes();
    return m;
  }
  const double keep = 1.0 - dropout;
  const S scale = static_cast<S>(1.0 / keep);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = rng.next_double() < keep ? scale : S(0);
  return m;
}

}  // namespace bullysense::nn
