#pragma once

#include <map>
#include <vector>

#include "bullysense/nn/batch.hpp"
#include "bullysense/nn/tensor.hpp"

namespace bullysense::nn {

// BERT-family encoder with a fresh 2-class head over the first-token
// representation. Post-layer-norm blocks, exact-erf GELU, learned absolute
// positions. Pretrained weights load leniently by tensor name so archives
// without the head still apply.
template <typename S>
struct TransformerConfig {
  int vocab_size = 0;
  int hidden = 128;
  int layers = 2;
  int heads = 2;
  int intermediate = 256;
  int max_positions = 512;
  int type_vocab_size = 2;  // 0 disables segment embeddings
  int num_classes = 2;
  int32_t pad_id = 0;
  int position_offset = 0;  // RoBERTa-style archives use pad_id + 1
  double dropout = 0.1;
  double ln_eps = 1e-12;
};

template <typename S>
class TransformerClassifier {
 public:
  using Config = TransformerConfig<S>;

  explicit TransformerClassifier(const Config& cfg) : cfg_(cfg) {
    const int h = cfg.hidden, i = cfg.intermediate;
    word_emb_ = {"embeddings.word", Mat<S>(cfg.vocab_size, h), {}, true};
    pos_emb_ = {"embeddings.position", Mat<S>(cfg.max_positions, h), {}, true};
    if (cfg.type_vocab_size > 0)
      type_emb_ = {"embeddings.token_type", Mat<S>(cfg.type_vocab_size, h), {}, true};
    emb_ln_ = {{"embeddings.ln.gamma", Mat<S>(1, h), {}, false},
               {"embeddings.ln.beta", Mat<S>(1, h), {}, false}};
    layers_.resize(static_cast<size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
      std::string p = "encoder." + std::to_string(l) + ".";
      Layer& L = layers_[static_cast<size_t>(l)];
      L.q_w = {p + "attn.q.w", Mat<S>(h, h), {}, true};
      L.q_b = {p + "attn.q.b", Mat<S>(1, h), {}, false};
      L.k_w = {p + "attn.k.w", Mat<S>(h, h), {}, true};
      L.k_b = {p + "attn.k.b", Mat<S>(1, h), {}, false};
      L.v_w = {p + "attn.v.w", Mat<S>(h, h), {}, true};
      L.v_b = {p + "attn.v.b", Mat<S>(1, h), {}, false};
      L.o_w = {p + "attn.out.w", Mat<S>(h, h), {}, true};
      L.o_b = {p + "attn.out.b", Mat<S>(1, h), {}, false};
      L.attn_ln = {{p + "attn.ln.gamma", Mat<S>(1, h), {}, false},
                   {p + "attn.ln.beta", Mat<S>(1, h), {}, false}};
      L.f1_w = {p + "ffn.fc1.w", Mat<S>(h, i), {}, true};
      L.f1_b = {p + "ffn.fc1.b", Mat<S>(1, i), {}, false};
      L.f2_w = {p + "ffn.fc2.w", Mat<S>(i, h), {}, true};
      L.f2_b = {p + "ffn.fc2.b", Mat<S>(1, h), {}, false};
      L.ffn_ln = {{p + "ffn.ln.gamma", Mat<S>(1, h), {}, false},
                  {p + "ffn.ln.beta", Mat<S>(1, h), {}, false}};
    }
    head_w_ = {"head.weight", Mat<S>(h, cfg.num_classes), {}, true};
    head_b_ = {"head.bias", Mat<S>(1, cfg.num_classes), {}, false};
  }

  void init(Rng& rng) {
    for (Tensor<S>* t : params()) {
      if (t->name.find("ln.gamma") != std::string::npos)
        t->w.setOnes();
      else if (t->name.find(".b") != std::string::npos ||
               t->name.find("bias") != std::string::npos ||
               t->name.find("ln.beta") != std::string::npos)
        t->w.setZero();
      else
        init_normal(t->w, rng, 0.02);
    }
    word_emb_.w.row(cfg_.pad_id).setZero();
  }

  // Applies matching tensors from a pretrained archive; returns the names
  // that loaded. The classifier head stays freshly initialized.
  std::vector<std::string> load_pretrained(const std::map<std::string, MatF>& archive) {
    return load_params_lenient(archive, params());
  }

  std::vector<Tensor<S>*> params() {
    std::vector<Tensor<S>*> out = {&word_emb_, &pos_emb_};
    if (cfg_.type_vocab_size > 0) out.push_back(&type_emb_);
    out.push_back(&emb_ln_.gamma);
    out.push_back(&emb_ln_.beta);
    for (Layer& L : layers_) {
      for (Tensor<S>* t : {&L.q_w, &L.q_b, &L.k_w, &L.k_b, &L.v_w, &L.v_b, &L.o_w, &L.o_b,
                           &L.attn_ln.gamma, &L.attn_ln.beta, &L.f1_w, &L.f1_b, &L.f2_w, &L.f2_b,
                           &L.ffn_ln.gamma, &L.ffn_ln.beta})
        out.push_back(t);
    }
    out.push_back(&head_w_);
    out.push_back(&head_b_);
    return out;
  }

  std::vector<const Tensor<S>*> params() const {
    auto mut = const_cast<TransformerClassifier*>(this)->params();
    return std::vector<const Tensor<S>*>(mut.begin(), mut.end());
  }

  const Config& config() const { return cfg_; }

  S train_step(const EncodedBatch& batch, Rng& dropout_rng) {
    for (Tensor<S>* p : params()) p->zero_grad();
    Caches caches;
    Mat<S> logits = forward(batch, &caches, &dropout_rng);
    Mat<S> dlogits;
    S loss = softmax_cross_entropy(logits, batch.labels, dlogits);
    backward(batch, caches, dlogits);
    return loss;
  }

  Mat<S> logits(const EncodedBatch& batch) const {
    Caches caches;
    return forward(batch, &caches, nullptr);
  }

 private:
  struct LnParams {
    Tensor<S> gamma, beta;
  };
  struct LnCache {
    Mat<S> xhat;
    Vec<S> inv_sigma;
  };
  struct Layer {
    Tensor<S> q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
    LnParams attn_ln;
    Tensor<S> f1_w, f1_b, f2_w, f2_b;
    LnParams ffn_ln;
  };
  struct LayerCache {
    Mat<S> input;              // (B*L) x H, block input
    Mat<S> q, k, v;            // (B*L) x H
    std::vector<Mat<S>> probs; // per (batch row * head): L x L, post-dropout
    std::vector<Mat<S>> probs_raw;  // pre-dropout softmax
    std::vector<Mat<S>> attn_masks; // dropout masks, only filled in training
    Mat<S> ctx;                // (B*L) x H
    Mat<S> attn_out_in;        // ctx (post-dropout input to residual)
    LnCache ln1;
    Mat<S> h1;                 // (B*L) x H post first LN
    Mat<S> f1;                 // (B*L) x I pre-gelu
    Mat<S> gelu;               // (B*L) x I
    Mat<S> ffn_drop;           // dropout mask on fc2 output
    Mat<S> attn_drop;          // dropout mask on attn out
    LnCache ln2;
    Mat<S> h2;                 // (B*L) x H
  };
  struct Caches {
    Mat<S> emb_sum;   // pre-LN embedding sum
    LnCache ln0;
    Mat<S> h0;        // post LN (+dropout) embeddings
    Mat<S> emb_drop;  // dropout mask on embeddings
    std::vector<LayerCache> layers;
    Mat<S> cls;       // B x H
    Mat<S> cls_drop;  // dropout mask on cls
    Mat<S> cls_dropped;
  };

  // Row-wise layer norm.
  Mat<S> ln_forward(const Mat<S>& x, const LnParams& p, LnCache& cache) const {
    Vec<S> mean = x.rowwise().mean();
    Mat<S> centered = x.colwise() - mean;
    Vec<S> var = centered.cwiseProduct(centered).rowwise().mean();
    cache.inv_sigma = (var.array() + static_cast<S>(cfg_.ln_eps)).rsqrt().matrix();
    cache.xhat = cache.inv_sigma.asDiagonal() * centered;
    Mat<S> y = cache.xhat * p.gamma.w.row(0).asDiagonal();
    y.rowwise() += p.beta.w.row(0);
    return y;
  }

  Mat<S> ln_backward(const Mat<S>& dy, LnParams& p, const LnCache& cache) {
    const S n = static_cast<S>(dy.cols());
    p.gamma.g += dy.cwiseProduct(cache.xhat).colwise().sum();
    p.beta.g += dy.colwise().sum();
    Mat<S> dxhat = dy * p.gamma.w.row(0).asDiagonal();
    Vec<S> mean_dxhat = dxhat.rowwise().sum() / n;
    Vec<S> mean_dxhat_xhat = dxhat.cwiseProduct(cache.xhat).rowwise().sum() / n;
    Mat<S> dx = dxhat;
    dx.colwise() -= mean_dxhat;
    dx -= mean_dxhat_xhat.asDiagonal() * cache.xhat;
    return cache.inv_sigma.asDiagonal() * dx;
  }

  static Mat<S> gelu(const Mat<S>& x) {
    return x.unaryExpr([](S v) {
      double vd = static_cast<double>(v);
      return static_cast<S>(0.5 * vd * (1.0 + std::erf(vd * M_SQRT1_2)));
    });
  }

  static Mat<S> gelu_grad(const Mat<S>& x) {
    return x.unaryExpr([](S v) {
      double vd = static_cast<double>(v);
      double cdf = 0.5 * (1.0 + std::erf(vd * M_SQRT1_2));
      double pdf = std::exp(-0.5 * vd * vd) / std::sqrt(2.0 * M_PI);
      return static_cast<S>(cdf + vd * pdf);
    });
  }

  Mat<S> forward(const EncodedBatch& batch, Caches* caches, Rng* dropout_rng) const {
    const int b = batch.rows(), l = batch.cols(), h = cfg_.hidden;
    const int heads = cfg_.heads, dh = h / heads;
    const bool training = dropout_rng != nullptr;
    const Eigen::Index rows = static_cast<Eigen::Index>(b) * l;
    if (heads * dh != h) throw ConfigError("hidden size not divisible by head count");
    if (l + cfg_.position_offset > cfg_.max_positions)
      throw ConfigError("sequence length " + std::to_string(l) + " exceeds max positions");

    Mat<S>& x = caches->emb_sum;
    x.resize(rows, h);
    for (int r = 0; r < b; ++r)
      for (int t = 0; t < l; ++t) {
        Eigen::Index row = static_cast<Eigen::Index>(r) * l + t;
        x.row(row) = word_emb_.w.row(batch.ids(r, t)) +
                     pos_emb_.w.row(cfg_.position_offset + t);
        if (cfg_.type_vocab_size > 0) x.row(row) += type_emb_.w.row(0);
      }

    Mat<S> cur = ln_forward(x, emb_ln_, caches->ln0);
    if (training) {
      caches->emb_drop = dropout_mask<S>(rows, h, cfg_.dropout, *dropout_rng);
      cur = cur.cwiseProduct(caches->emb_drop);
    }
    caches->h0 = cur;

    caches->layers.resize(static_cast<size_t>(cfg_.layers));
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (int li = 0; li < cfg_.layers; ++li) {
      const Layer& L = layers_[static_cast<size_t>(li)];
      LayerCache& C = caches->layers[static_cast<size_t>(li)];
      C.input = cur;
      C.q = (cur * L.q_w.w).rowwise() + L.q_b.w.row(0);
      C.k = (cur * L.k_w.w).rowwise() + L.k_b.w.row(0);
      C.v = (cur * L.v_w.w).rowwise() + L.v_b.w.row(0);

      C.ctx.setZero(rows, h);
      C.probs.resize(static_cast<size_t>(b) * heads);
      C.probs_raw.resize(static_cast<size_t>(b) * heads);
      const bool attn_dropout = training && cfg_.dropout > 0.0;
      if (attn_dropout) C.attn_masks.resize(static_cast<size_t>(b) * heads);
      for (int r = 0; r < b; ++r) {
        int len = batch.lengths[static_cast<size_t>(r)];
        for (int a = 0; a < heads; ++a) {
          auto qb = C.q.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh);
          auto kb = C.k.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh);
          auto vb = C.v.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh);
          Mat<S> scores = qb * kb.transpose() * scale;
          for (int j = len; j < l; ++j) scores.col(j).setConstant(S(-1e9));
          Mat<S> p = softmax_rows(scores);
          Mat<S>& slot_raw = C.probs_raw[static_cast<size_t>(r) * heads + a];
          Mat<S>& slot = C.probs[static_cast<size_t>(r) * heads + a];
          slot_raw = std::move(p);
          if (attn_dropout) {
            Mat<S>& dmask = C.attn_masks[static_cast<size_t>(r) * heads + a];
            dmask = dropout_mask<S>(l, l, cfg_.dropout, *dropout_rng);
            slot = slot_raw.cwiseProduct(dmask);
          } else {
            slot = slot_raw;
          }
          C.ctx.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh) = slot * vb;
        }
      }

      Mat<S> attn_out = (C.ctx * L.o_w.w).rowwise() + L.o_b.w.row(0);
      if (training) {
        C.attn_drop = dropout_mask<S>(rows, h, cfg_.dropout, *dropout_rng);
        attn_out = attn_out.cwiseProduct(C.attn_drop);
      }
      C.attn_out_in = attn_out;
      Mat<S> res1 = C.input + attn_out;
      C.h1 = ln_forward(res1, L.attn_ln, C.ln1);

      C.f1 = (C.h1 * L.f1_w.w).rowwise() + L.f1_b.w.row(0);
      C.gelu = gelu(C.f1);
      Mat<S> f2 = (C.gelu * L.f2_w.w).rowwise() + L.f2_b.w.row(0);
      if (training) {
        C.ffn_drop = dropout_mask<S>(rows, h, cfg_.dropout, *dropout_rng);
        f2 = f2.cwiseProduct(C.ffn_drop);
      }
      Mat<S> res2 = C.h1 + f2;
      C.h2 = ln_forward(res2, L.ffn_ln, C.ln2);
      cur = C.h2;
    }

    caches->cls.resize(b, h);
    for (int r = 0; r < b; ++r) caches->cls.row(r) = cur.row(static_cast<Eigen::Index>(r) * l);
    if (training) {
      caches->cls_drop = dropout_mask<S>(b, h, cfg_.dropout, *dropout_rng);
      caches->cls_dropped = caches->cls.cwiseProduct(caches->cls_drop);
    } else {
      caches->cls_dropped = caches->cls;
    }
    return (caches->cls_dropped * head_w_.w).rowwise() + head_b_.w.row(0);
  }

  void backward(const EncodedBatch& batch, Caches& caches, const Mat<S>& dlogits) {
    const int b = batch.rows(), l = batch.cols(), h = cfg_.hidden;
    const int heads = cfg_.heads, dh = h / heads;
    const Eigen::Index rows = static_cast<Eigen::Index>(b) * l;
    const bool training = caches.cls_drop.size() > 0;

    head_w_.g = caches.cls_dropped.transpose() * dlogits;
    head_b_.g = dlogits.colwise().sum();
    Mat<S> dcls = dlogits * head_w_.w.transpose();
    if (training) dcls = dcls.cwiseProduct(caches.cls_drop);

    Mat<S> dcur = Mat<S>::Zero(rows, h);
    for (int r = 0; r < b; ++r) dcur.row(static_cast<Eigen::Index>(r) * l) = dcls.row(r);

    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
    for (int li = cfg_.layers - 1; li >= 0; --li) {
      Layer& L = layers_[static_cast<size_t>(li)];
      LayerCache& C = caches.layers[static_cast<size_t>(li)];

      // second LN + FFN residual
      Mat<S> dres2 = ln_backward(dcur, L.ffn_ln, C.ln2);
      Mat<S> df2 = dres2;
      if (training) df2 = df2.cwiseProduct(C.ffn_drop);
      L.f2_w.g += C.gelu.transpose() * df2;
      L.f2_b.g += df2.colwise().sum();
      Mat<S> dgelu = df2 * L.f2_w.w.transpose();
      Mat<S> df1 = dgelu.cwiseProduct(gelu_grad(C.f1));
      L.f1_w.g += C.h1.transpose() * df1;
      L.f1_b.g += df1.colwise().sum();
      Mat<S> dh1 = df1 * L.f1_w.w.transpose() + dres2;

      // first LN + attention residual
      Mat<S> dres1 = ln_backward(dh1, L.attn_ln, C.ln1);
      Mat<S> dattn_out = dres1;
      if (training) dattn_out = dattn_out.cwiseProduct(C.attn_drop);
      L.o_w.g += C.ctx.transpose() * dattn_out;
      L.o_b.g += dattn_out.colwise().sum();
      Mat<S> dctx = dattn_out * L.o_w.w.transpose();

      Mat<S> dq = Mat<S>::Zero(rows, h), dk = Mat<S>::Zero(rows, h), dv = Mat<S>::Zero(rows, h);
      for (int r = 0; r < b; ++r) {
        for (int a = 0; a < heads; ++a) {
          auto qb = C.q.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh);
          auto kb = C.k.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh);
          auto vb = C.v.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh);
          const Mat<S>& p = C.probs[static_cast<size_t>(r) * heads + a];
          const Mat<S>& praw = C.probs_raw[static_cast<size_t>(r) * heads + a];
          auto dctx_b = dctx.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh);

          Mat<S> dp = dctx_b * vb.transpose();
          dv.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh) = p.transpose() * dctx_b;
          if (!C.attn_masks.empty())
            dp = dp.cwiseProduct(C.attn_masks[static_cast<size_t>(r) * heads + a]);
          // softmax backward
          Vec<S> rowdot = dp.cwiseProduct(praw).rowwise().sum();
          Mat<S> dscores = praw.cwiseProduct(dp.colwise() - rowdot);
          dscores *= scale;
          dq.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh) = dscores * kb;
          dk.block(static_cast<Eigen::Index>(r) * l, a * dh, l, dh) = dscores.transpose() * qb;
        }
      }

      L.q_w.g += C.input.transpose() * dq;
      L.q_b.g += dq.colwise().sum();
      L.k_w.g += C.input.transpose() * dk;
      L.k_b.g += dk.colwise().sum();
      L.v_w.g += C.input.transpose() * dv;
      L.v_b.g += dv.colwise().sum();

      dcur = dres1 + dq * L.q_w.w.transpose() + dk * L.k_w.w.transpose() +
             dv * L.v_w.w.transpose();
    }

    if (training) dcur = dcur.cwiseProduct(caches.emb_drop);
    Mat<S> demb = ln_backward(dcur, emb_ln_, caches.ln0);
    for (int r = 0; r < b; ++r)
      for (int t = 0; t < l; ++t) {
        Eigen::Index row = static_cast<Eigen::Index>(r) * l + t;
        word_emb_.g.row(batch.ids(r, t)) += demb.row(row);
        pos_emb_.g.row(cfg_.position_offset + t) += demb.row(row);
        if (cfg_.type_vocab_size > 0) type_emb_.g.row(0) += demb.row(row);
      }
  }

  Config cfg_;
  Tensor<S> word_emb_, pos_emb_, type_emb_;
  LnParams emb_ln_;
  std::vector<Layer> layers_;
  Tensor<S> head_w_, head_b_;
};

}  // namespace bullysense::nn
