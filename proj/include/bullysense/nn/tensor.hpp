#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bullysense/common.hpp"

namespace bullysense::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = Mat<float>;

// Named parameter with its gradient buffer.
template <typename S>
struct Tensor {
  std::string name;
  Mat<S> w;
  Mat<S> g;
  bool decay = true;  // participates in weight decay

  void zero_grad() { g.setZero(w.rows(), w.cols()); }
};

// --- tensor archive -------------------------------------------------------
// Binary container used for checkpoints and trained weights:
//   magic "BSTENSR1", u32 tensor count, then per tensor
//   u32 name_len, name, u32 dtype (0 = f32), u32 rows, u32 cols,
//   rows*cols little-endian f32 (row-major).

inline void write_tensor_stream(std::ostream& out,
                                const std::vector<std::pair<std::string, MatF>>& tensors) {
  auto put_u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  out.write("BSTENSR1", 8);
  put_u32(static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_u32(static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(0);
    put_u32(static_cast<uint32_t>(m.rows()));
    put_u32(static_cast<uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(m.size())));
  }
}

inline void write_tensor_file(const std::string& path,
                              const std::vector<std::pair<std::string, MatF>>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_tensor_stream(out, tensors);
  if (!out) throw IoError("write failed: " + path);
}

inline std::map<std::string, MatF> read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open weights file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "BSTENSR1", 8) != 0)
    throw ArtifactError("bad magic in weights file: " + path);
  auto get_u32 = [&]() {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw ArtifactError("truncated weights file: " + path);
    return v;
  };
  uint32_t count = get_u32();
  std::map<std::string, MatF> out;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = get_u32();
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t dtype = get_u32();
    if (dtype != 0) throw ArtifactError(path + ": unsupported dtype for tensor " + name);
    uint32_t rows = get_u32(), cols = get_u32();
    MatF m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(m.size())));
    if (!in) throw ArtifactError("truncated weights file: " + path);
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

template <typename S>
void save_params(const std::string& path, const std::vector<Tensor<S>*>& params) {
  std::vector<std::pair<std::string, MatF>> tensors;
  tensors.reserve(params.size());
  for (const Tensor<S>* t : params) tensors.emplace_back(t->name, t->w.template cast<float>());
  write_tensor_file(path, tensors);
}

// Strict: every parameter must be present with matching shape.
template <typename S>
void load_params(const std::string& path, const std::vector<Tensor<S>*>& params) {
  auto file = read_tensor_file(path);
  std::vector<std::string> missing;
  for (Tensor<S>* t : params) {
    auto it = file.find(t->name);
    if (it == file.end()) {
      missing.push_back(t->name);
      continue;
    }
    if (it->second.rows() != t->w.rows() || it->second.cols() != t->w.cols())
      throw ArtifactError(path + ": shape mismatch for " + t->name);
    t->w = it->second.template cast<S>();
  }
  if (!missing.empty()) {
    std::string msg = path + ": missing tensors:";
    for (const auto& n : missing) msg += " " + n;
    throw ArtifactError(msg);
  }
}

// Lenient: loads what matches (used for pretrained encoders whose archives
// carry no classifier head). Returns names actually loaded.
template <typename S>
std::vector<std::string> load_params_lenient(const std::map<std::string, MatF>& file,
                                             const std::vector<Tensor<S>*>& params) {
  std::vector<std::string> loaded;
  for (Tensor<S>* t : params) {
    auto it = file.find(t->name);
    if (it == file.end()) continue;
    if (it->second.rows() != t->w.rows() || it->second.cols() != t->w.cols())
      throw ArtifactError("checkpoint shape mismatch for " + t->name);
    t->w = it->second.template cast<S>();
    loaded.push_back(t->name);
  }
  return loaded;
}

// Xavier-uniform init over one matrix; draws are sequential so layouts are
// reproducible for a fixed seed.
template <typename S>
void init_xavier(Mat<S>& m, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = static_cast<S>(rng.uniform(-limit, limit));
}

template <typename S>
void init_normal(Mat<S>& m, Rng& rng, double stddev) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<S>(rng.normal(0.0, stddev));
}

template <typename S>
void init_uniform(Mat<S>& m, Rng& rng, double lo, double hi) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<S>(rng.uniform(lo, hi));
}

}  // namespace bullysense::nn
