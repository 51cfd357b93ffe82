#pragma once

#include <vector>

#include "bullysense/nn/adamw.hpp"
#include "bullysense/nn/batch.hpp"
#include "bullysense/nn/tensor.hpp"

namespace bullysense::nn {

// Embedding -> single bidirectional LSTM -> concatenated final states ->
// dropout -> 2-class linear head. Gate layout in the fused matrices is
// [input, forget, cell, output].
template <typename S>
class BiLstmClassifier {
 public:
  struct Config {
    int vocab_size = 0;
    int embed_dim = 300;
    int hidden = 128;
    int num_classes = 2;
    double dropout = 0.5;
    int32_t pad_id = 0;
  };

  explicit BiLstmClassifier(const Config& cfg) : cfg_(cfg) {
    const int e = cfg.embed_dim, h = cfg.hidden;
    embed_ = {"embedding.weight", Mat<S>(cfg.vocab_size, e), {}, true};
    fwd_.wx = {"lstm.fwd.wx", Mat<S>(e, 4 * h), {}, true};
    fwd_.wh = {"lstm.fwd.wh", Mat<S>(h, 4 * h), {}, true};
    fwd_.b = {"lstm.fwd.b", Mat<S>(1, 4 * h), {}, false};
    bwd_.wx = {"lstm.bwd.wx", Mat<S>(e, 4 * h), {}, true};
    bwd_.wh = {"lstm.bwd.wh", Mat<S>(h, 4 * h), {}, true};
    bwd_.b = {"lstm.bwd.b", Mat<S>(1, 4 * h), {}, false};
    head_w_ = {"head.weight", Mat<S>(2 * h, cfg.num_classes), {}, true};
    head_b_ = {"head.bias", Mat<S>(1, cfg.num_classes), {}, false};
  }

  void init(Rng& rng) {
    init_uniform(embed_.w, rng, -0.25, 0.25);
    embed_.w.row(cfg_.pad_id).setZero();
    for (Direction* d : {&fwd_, &bwd_}) {
      init_xavier(d->wx.w, rng);
      init_xavier(d->wh.w, rng);
      d->b.w.setZero();
      // forget-gate bias starts at 1
      d->b.w.block(0, cfg_.hidden, 1, cfg_.hidden).setOnes();
    }
    init_xavier(head_w_.w, rng);
    head_b_.w.setZero();
  }

  void set_embedding_rows(const MatF& rows) {
    if (rows.rows() != embed_.w.rows() || rows.cols() != embed_.w.cols())
      throw ConfigError("embedding table is " + std::to_string(rows.rows()) + "x" +
                        std::to_string(rows.cols()) + ", model expects " +
                        std::to_string(embed_.w.rows()) + "x" + std::to_string(embed_.w.cols()));
    embed_.w = rows.template cast<S>();
  }

  std::vector<Tensor<S>*> params() {
    return {&embed_, &fwd_.wx, &fwd_.wh, &fwd_.b, &bwd_.wx, &bwd_.wh, &bwd_.b, &head_w_, &head_b_};
  }
  std::vector<const Tensor<S>*> params() const {
    return {&embed_, &fwd_.wx, &fwd_.wh, &fwd_.b, &bwd_.wx, &bwd_.wh, &bwd_.b, &head_w_, &head_b_};
  }

  const Config& config() const { return cfg_; }

  // Forward + backward over one batch; grads are zeroed first. Returns
  // mean cross-entropy loss.
  S train_step(const EncodedBatch& batch, Rng& dropout_rng) {
    for (Tensor<S>* p : params()) p->zero_grad();
    const int b = batch.rows(), h = cfg_.hidden;

    DirCache fc, bc;
    IdsMat rev = reversed_ids(batch);
    run_direction(batch.ids, batch.lengths, fwd_, fc, true);
    run_direction(rev, batch.lengths, bwd_, bc, true);

    Mat<S> concat(b, 2 * h);
    concat.block(0, 0, b, h) = fc.final_h;
    concat.block(0, h, b, h) = bc.final_h;

    Mat<S> drop = dropout_mask<S>(b, 2 * h, cfg_.dropout, dropout_rng);
    Mat<S> dropped = concat.cwiseProduct(drop);
    Mat<S> logits = (dropped * head_w_.w).rowwise() + head_b_.w.row(0);

    Mat<S> dlogits;
    S loss = softmax_cross_entropy(logits, batch.labels, dlogits);

    head_w_.g = dropped.transpose() * dlogits;
    head_b_.g = dlogits.colwise().sum();
    Mat<S> dconcat = (dlogits * head_w_.w.transpose()).cwiseProduct(drop);

    backward_direction(batch.ids, batch.lengths, fwd_, fc, dconcat.block(0, 0, b, h));
    backward_direction(rev, batch.lengths, bwd_, bc, dconcat.block(0, h, b, h));
    return loss;
  }

  // Inference-mode logits (no dropout).
  Mat<S> logits(const EncodedBatch& batch) const {
    const int b = batch.rows(), h = cfg_.hidden;
    DirCache fc, bc;
    IdsMat rev = reversed_ids(batch);
    run_direction(batch.ids, batch.lengths, fwd_, fc, false);
    run_direction(rev, batch.lengths, bwd_, bc, false);
    Mat<S> concat(b, 2 * h);
    concat.block(0, 0, b, h) = fc.final_h;
    concat.block(0, h, b, h) = bc.final_h;
    return (concat * head_w_.w).rowwise() + head_b_.w.row(0);
  }

 private:
  struct Direction {
    Tensor<S> wx, wh, b;
  };

  struct DirCache {
    // Per step: post-activation gates and states, all B x H.
    std::vector<Mat<S>> gi, gf, gg, go, c, h, tanh_c;
    Mat<S> x;        // (B*L) x E gathered embeddings
    Mat<S> final_h;  // B x H, state at each row's last real token
  };

  IdsMat reversed_ids(const EncodedBatch& batch) const {
    IdsMat rev = batch.ids;
    for (int r = 0; r < batch.rows(); ++r) {
      int len = batch.lengths[static_cast<size_t>(r)];
      for (int t = 0; t < len; ++t) rev(r, t) = batch.ids(r, len - 1 - t);
    }
    return rev;
  }

  void run_direction(const IdsMat& ids, const std::vector<int>& lengths, const Direction& dir,
                     DirCache& cache, bool keep_cache) const {
    const int b = static_cast<int>(ids.rows()), l = static_cast<int>(ids.cols());
    const int e = cfg_.embed_dim, h = cfg_.hidden;

    cache.x.resize(static_cast<Eigen::Index>(b) * l, e);
    for (int r = 0; r < b; ++r)
      for (int t = 0; t < l; ++t) cache.x.row(static_cast<Eigen::Index>(t) * b + r) = embed_.w.row(ids(r, t));

    // One big input GEMM; the recurrent term stays in the step loop.
    Mat<S> xw = cache.x * dir.wx.w;
    xw.rowwise() += dir.b.w.row(0);

    if (keep_cache) {
      cache.gi.resize(static_cast<size_t>(l));
      cache.gf.resize(static_cast<size_t>(l));
      cache.gg.resize(static_cast<size_t>(l));
      cache.go.resize(static_cast<size_t>(l));
      cache.c.resize(static_cast<size_t>(l));
      cache.h.resize(static_cast<size_t>(l));
      cache.tanh_c.resize(static_cast<size_t>(l));
    }

    Mat<S> h_prev = Mat<S>::Zero(b, h), c_prev = Mat<S>::Zero(b, h);
    cache.final_h = Mat<S>::Zero(b, h);
    for (int t = 0; t < l; ++t) {
      Mat<S> z = xw.block(static_cast<Eigen::Index>(t) * b, 0, b, 4 * h) + h_prev * dir.wh.w;
      Mat<S> i_g = sigmoid(z.block(0, 0, b, h));
      Mat<S> f_g = sigmoid(z.block(0, h, b, h));
      Mat<S> g_g = z.block(0, 2 * h, b, h).array().tanh().matrix();
      Mat<S> o_g = sigmoid(z.block(0, 3 * h, b, h));
      Mat<S> c_t = f_g.cwiseProduct(c_prev) + i_g.cwiseProduct(g_g);
      Mat<S> tc = c_t.array().tanh().matrix();
      Mat<S> h_t = o_g.cwiseProduct(tc);

      for (int r = 0; r < b; ++r)
        if (lengths[static_cast<size_t>(r)] - 1 == t) cache.final_h.row(r) = h_t.row(r);

      if (keep_cache) {
        cache.gi[static_cast<size_t>(t)] = std::move(i_g);
        cache.gf[static_cast<size_t>(t)] = std::move(f_g);
        cache.gg[static_cast<size_t>(t)] = std::move(g_g);
        cache.go[static_cast<size_t>(t)] = std::move(o_g);
        cache.c[static_cast<size_t>(t)] = c_t;
        cache.tanh_c[static_cast<size_t>(t)] = std::move(tc);
        cache.h[static_cast<size_t>(t)] = h_t;
      }
      h_prev = std::move(h_t);
      c_prev = std::move(c_t);
    }
  }

  void backward_direction(const IdsMat& ids, const std::vector<int>& lengths, Direction& dir,
                          const DirCache& cache, const Mat<S>& dfinal) {
    const int b = static_cast<int>(ids.rows()), l = static_cast<int>(ids.cols());
    const int h = cfg_.hidden;

    Mat<S> dh = Mat<S>::Zero(b, h), dc = Mat<S>::Zero(b, h);
    Mat<S> dxw(static_cast<Eigen::Index>(b) * l, 4 * h);
    for (int t = l - 1; t >= 0; --t) {
      for (int r = 0; r < b; ++r)
        if (lengths[static_cast<size_t>(r)] - 1 == t) dh.row(r) += dfinal.row(r);

      const Mat<S>& i_g = cache.gi[static_cast<size_t>(t)];
      const Mat<S>& f_g = cache.gf[static_cast<size_t>(t)];
      const Mat<S>& g_g = cache.gg[static_cast<size_t>(t)];
      const Mat<S>& o_g = cache.go[static_cast<size_t>(t)];
      const Mat<S>& tc = cache.tanh_c[static_cast<size_t>(t)];
      Mat<S> c_prev =
          t > 0 ? cache.c[static_cast<size_t>(t) - 1] : Mat<S>::Zero(b, h);

      dc += dh.cwiseProduct(o_g).cwiseProduct(
          (Mat<S>::Ones(b, h) - tc.cwiseProduct(tc)));
      Mat<S> dz(b, 4 * h);
      // input gate
      dz.block(0, 0, b, h) = dc.cwiseProduct(g_g).cwiseProduct(i_g).cwiseProduct(
          Mat<S>::Ones(b, h) - i_g);
      // forget gate
      dz.block(0, h, b, h) = dc.cwiseProduct(c_prev).cwiseProduct(f_g).cwiseProduct(
          Mat<S>::Ones(b, h) - f_g);
      // cell candidate
      dz.block(0, 2 * h, b, h) =
          dc.cwiseProduct(i_g).cwiseProduct(Mat<S>::Ones(b, h) - g_g.cwiseProduct(g_g));
      // output gate
      dz.block(0, 3 * h, b, h) =
          dh.cwiseProduct(tc).cwiseProduct(o_g).cwiseProduct(Mat<S>::Ones(b, h) - o_g);

      dxw.block(static_cast<Eigen::Index>(t) * b, 0, b, 4 * h) = dz;
      if (t > 0) dir.wh.g += cache.h[static_cast<size_t>(t) - 1].transpose() * dz;
      dh = dz * dir.wh.w.transpose();
      dc = dc.cwiseProduct(f_g);
    }

    dir.wx.g += cache.x.transpose() * dxw;
    dir.b.g += dxw.colwise().sum();
    Mat<S> dx = dxw * dir.wx.w.transpose();
    for (int r = 0; r < b; ++r) {
      int len = lengths[static_cast<size_t>(r)];
      // dx rows past len are exactly zero; skip the scatter.
      for (int t = 0; t < len; ++t)
        embed_.g.row(ids(r, t)) += dx.row(static_cast<Eigen::Index>(t) * b + r);
    }
  }

  static Mat<S> sigmoid(const Mat<S>& z) {
    return (S(1) / (S(1) + (-z.array()).exp())).matrix();
  }

  Config cfg_;
  Tensor<S> embed_;
  Direction fwd_, bwd_;
  Tensor<S> head_w_, head_b_;
};

}  // namespace bullysense::nn
