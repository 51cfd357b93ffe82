#pragma once

#include <cmath>
#include <vector>

#include "bullysense/nn/tensor.hpp"

namespace bullysense::nn {

// Adam with decoupled weight decay. Decay is skipped for tensors flagged
// decay=false (biases, layer norms).
template <typename S>
class AdamW {
 public:
  struct Config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  explicit AdamW(Config cfg) : cfg_(cfg) {}

  void step(const std::vector<Tensor<S>*>& params) {
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        m_[i].setZero(params[i]->w.rows(), params[i]->w.cols());
        v_[i].setZero(params[i]->w.rows(), params[i]->w.cols());
      }
    }
    ++t_;
    const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
    const S bc1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const S bc2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    const S lr = static_cast<S>(cfg_.lr), eps = static_cast<S>(cfg_.eps);
    const S wd = static_cast<S>(cfg_.weight_decay);
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor<S>& p = *params[i];
      m_[i] = b1 * m_[i] + (S(1) - b1) * p.g;
      v_[i] = b2 * v_[i] + (S(1) - b2) * p.g.cwiseProduct(p.g);
      Mat<S> update =
          ((m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + eps)).matrix();
      if (p.decay && wd != S(0)) update += wd * p.w;
      p.w -= lr * update;
    }
  }

  void reset() {
    t_ = 0;
    m_.clear();
    v_.clear();
  }

 private:
  Config cfg_;
  int64_t t_ = 0;
  std::vector<Mat<S>> m_, v_;
};

}  // namespace bullysense::nn
