// Copyright 2026 The latconf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal numeric core for the bi-directional graph recurrences.
//
// All trainable weights live in one contiguous buffer (ModelParams::flat()).
// Named tensors are row-major views into that buffer, which is what lets the
// optimizer, the checkpoint writer and Hogwild workers treat the model as a
// single vector of doubles.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "latconf/error.hpp"

namespace latconf {

using Vector = std::vector<double>;

enum class CellType { kSimple, kGated };
enum class Direction { kForward = 0, kBackward = 1 };
enum class AttentionActivation { kLogistic, kTanh, kIdentity };
// How the states of a node's incoming arcs are combined.
enum class MergeMethod { kMax, kMean, kPosterior, kAttention };

template <class T>
struct MatrixView {
  T* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;

  T* row(std::size_t r) const { return data + r * cols; }
  T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return rows * cols; }
  operator MatrixView<const T>() const { return {data, rows, cols}; }
};

using MatrixRef = MatrixView<double>;
using ConstMatrixRef = MatrixView<const double>;

// ---------------------------------------------------------------------------
// Scalar nonlinearities

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double activate(AttentionActivation act, double x) {
  switch (act) {
    case AttentionActivation::kLogistic: return logistic(x);
    case AttentionActivation::kTanh: return std::tanh(x);
    case AttentionActivation::kIdentity: return x;
  }
  return x;
}

// Derivative expressed through the activation output y = act(x).
inline double activate_derivative(AttentionActivation act, double y) {
  switch (act) {
    case AttentionActivation::kLogistic: return y * (1.0 - y);
    case AttentionActivation::kTanh: return 1.0 - y * y;
    case AttentionActivation::kIdentity: return 1.0;
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Dense kernels

namespace kernel {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EVec = Eigen::Matrix<double, Eigen::Dynamic, 1>;

// y += W x
inline void gemv_acc(ConstMatrixRef w, const double* x, double* y) {
  Eigen::Map<const RowMajor> m(w.data, static_cast<Eigen::Index>(w.rows),
                               static_cast<Eigen::Index>(w.cols));
  Eigen::Map<const EVec> xv(x, static_cast<Eigen::Index>(w.cols));
  Eigen::Map<EVec> yv(y, static_cast<Eigen::Index>(w.rows));
  yv.noalias() += m * xv;
}

// x += W^T y
inline void gemv_t_acc(ConstMatrixRef w, const double* y, double* x) {
  Eigen::Map<const RowMajor> m(w.data, static_cast<Eigen::Index>(w.rows),
                               static_cast<Eigen::Index>(w.cols));
  Eigen::Map<const EVec> yv(y, static_cast<Eigen::Index>(w.rows));
  Eigen::Map<EVec> xv(x, static_cast<Eigen::Index>(w.cols));
  xv.noalias() += m.transpose() * yv;
}

// W += a b^T
inline void outer_acc(MatrixRef w, const double* a, const double* b) {
  Eigen::Map<RowMajor> m(w.data, static_cast<Eigen::Index>(w.rows),
                         static_cast<Eigen::Index>(w.cols));
  Eigen::Map<const EVec> av(a, static_cast<Eigen::Index>(w.rows));
  Eigen::Map<const EVec> bv(b, static_cast<Eigen::Index>(w.cols));
  m.noalias() += av * bv.transpose();
}

inline double dot(const double* a, const double* b, std::size_t n) {
  Eigen::Map<const EVec> av(a, static_cast<Eigen::Index>(n));
  Eigen::Map<const EVec> bv(b, static_cast<Eigen::Index>(n));
  return av.dot(bv);
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Model shape and parameter storage

struct ModelDims {
  std::size_t input = 0;    // d_x
  std::size_t hidden = 128; // d_h
  std::size_t ff = 128;     // d_f; 0 puts the logistic output directly on [h_fwd; h_bwd]
  CellType cell = CellType::kGated;

  std::size_t gates() const { return cell == CellType::kGated ? 4 : 1; }
  // [arc state; posterior; mean; std] of the merge set.
  std::size_t key_size() const { return hidden + 3; }
  std::size_t context_size() const { return 2 * hidden; }
  bool operator==(const ModelDims&) const = default;
};

struct TensorSlot {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return rows * cols; }
};

inline constexpr std::size_t kNoSlot = std::numeric_limits<std::size_t>::max();

// Tensor order inside the flat buffer. Per direction: input matrix,
// recurrence matrix, gate bias (gated only), initial state, attention
// vector, attention bias. Then the head: FF matrix and bias (ff > 0),
// output vector and bias.
struct ParamLayout {
  struct DirectionSlots {
    std::size_t input = kNoSlot, recurrent = kNoSlot, bias = kNoSlot, h0 = kNoSlot,
                attention_w = kNoSlot, attention_b = kNoSlot;
  };

  std::vector<TensorSlot> tensors;
  DirectionSlots direction[2];
  std::size_t ff_w = kNoSlot, ff_b = kNoSlot, out_w = kNoSlot, out_b = kNoSlot;
  std::size_t total = 0;

  ParamLayout() = default;
  explicit ParamLayout(const ModelDims& d) {
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
      tensors.push_back({std::move(name), rows, cols, total});
      total += rows * cols;
      return tensors.size() - 1;
    };
    const std::size_t g = d.gates() * d.hidden;
    for (int k = 0; k < 2; ++k) {
      const std::string tag = k == 0 ? "fwd" : "bwd";
      auto& s = direction[k];
      s.input = add("input_" + tag, g, d.input);
      s.recurrent = add("recurrent_" + tag, g, d.hidden);
      if (d.cell == CellType::kGated) s.bias = add("gate_bias_" + tag, g, 1);
      s.h0 = add("h0_" + tag, d.hidden, 1);
      s.attention_w = add("attention_w_" + tag, d.key_size(), 1);
      s.attention_b = add("attention_b_" + tag, 1, 1);
    }
    if (d.ff > 0) {
      ff_w = add("ff_w", d.ff, d.context_size());
      ff_b = add("ff_b", d.ff, 1);
      out_w = add("out_w", d.ff, 1);
    } else {
      out_w = add("out_w", d.context_size(), 1);
    }
    out_b = add("out_b", 1, 1);
  }
};

struct CellWeights {
  CellType type = CellType::kSimple;
  ConstMatrixRef input;      // (gates*H) x X
  ConstMatrixRef recurrent;  // (gates*H) x H
  std::span<const double> bias;  // gates*H, empty for the simple cell
};

struct CellGradients {
  MatrixRef input;
  MatrixRef recurrent;
  std::span<double> bias;
};

class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(const ModelDims& dims)
      : dims_(dims), layout_(dims), values_(layout_.total, 0.0) {}

  const ModelDims& dims() const { return dims_; }
  const ParamLayout& layout() const { return layout_; }
  const std::vector<TensorSlot>& tensors() const { return layout_.tensors; }
  std::size_t size() const { return values_.size(); }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  void set_flat(std::span<const double> values) {
    if (values.size() != values_.size())
      throw Error(ErrorCode::kShapeMismatch, "flat view has " + std::to_string(values.size()) +
                                                 " values, expected " +
                                                 std::to_string(values_.size()));
    std::copy(values.begin(), values.end(), values_.begin());
  }
  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  bool congruent(const ModelParams& other) const { return dims_ == other.dims_; }

  MatrixRef tensor(std::size_t slot) {
    const auto& t = layout_.tensors[slot];
    return {values_.data() + t.offset, t.rows, t.cols};
  }
  ConstMatrixRef tensor(std::size_t slot) const {
    const auto& t = layout_.tensors[slot];
    return {values_.data() + t.offset, t.rows, t.cols};
  }
  std::span<double> vec(std::size_t slot) {
    auto m = tensor(slot);
    return {m.data, m.size()};
  }
  std::span<const double> vec(std::size_t slot) const {
    auto m = tensor(slot);
    return {m.data, m.size()};
  }

  const ParamLayout::DirectionSlots& slots(Direction d) const {
    return layout_.direction[static_cast<int>(d)];
  }

  MatrixRef input(Direction d) { return tensor(slots(d).input); }
  ConstMatrixRef input(Direction d) const { return tensor(slots(d).input); }
  MatrixRef recurrent(Direction d) { return tensor(slots(d).recurrent); }
  ConstMatrixRef recurrent(Direction d) const { return tensor(slots(d).recurrent); }
  std::span<double> gate_bias(Direction d) {
    return slots(d).bias == kNoSlot ? std::span<double>{} : vec(slots(d).bias);
  }
  std::span<const double> gate_bias(Direction d) const {
    return slots(d).bias == kNoSlot ? std::span<const double>{} : vec(slots(d).bias);
  }
  std::span<double> h0(Direction d) { return vec(slots(d).h0); }
  std::span<const double> h0(Direction d) const { return vec(slots(d).h0); }
  std::span<double> attention_w(Direction d) { return vec(slots(d).attention_w); }
  std::span<const double> attention_w(Direction d) const { return vec(slots(d).attention_w); }
  double& attention_b(Direction d) { return vec(slots(d).attention_b)[0]; }
  double attention_b(Direction d) const { return vec(slots(d).attention_b)[0]; }

  MatrixRef ff_w() { return tensor(layout_.ff_w); }
  ConstMatrixRef ff_w() const { return tensor(layout_.ff_w); }
  std::span<double> ff_b() { return vec(layout_.ff_b); }
  std::span<const double> ff_b() const { return vec(layout_.ff_b); }
  std::span<double> out_w() { return vec(layout_.out_w); }
  std::span<const double> out_w() const { return vec(layout_.out_w); }
  double& out_b() { return vec(layout_.out_b)[0]; }
  double out_b() const { return vec(layout_.out_b)[0]; }

  CellWeights cell(Direction d) const {
    return {dims_.cell, input(d), recurrent(d), gate_bias(d)};
  }
  CellGradients cell_gradients(Direction d) {
    return {input(d), recurrent(d), gate_bias(d)};
  }

 private:
  ModelDims dims_;
  ParamLayout layout_;
  Vector values_;
};

// Same shape-structure as the parameters it differentiates.
using Gradient = ModelParams;

inline constexpr double kForgetBias = 1.0;

// Matrices ~ U(-1/sqrt(d_h), 1/sqrt(d_h)); biases, h0 and attention bias
// start at zero except the forget-gate bias, which starts at 1.
inline ModelParams initialize(const ModelDims& dims, std::uint64_t seed) {
  ModelParams p(dims);
  std::mt19937_64 rng(seed);
  const double r = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(dims.hidden, 1)));
  std::uniform_real_distribution<double> dist(-r, r);
  auto randomize = [&](std::size_t slot) {
    if (slot == kNoSlot) return;
    for (double& v : p.vec(slot)) v = dist(rng);
  };
  const auto& layout = p.layout();
  for (const auto& s : layout.direction) {
    randomize(s.input);
    randomize(s.recurrent);
    randomize(s.attention_w);
  }
  randomize(layout.ff_w);
  randomize(layout.out_w);
  if (dims.cell == CellType::kGated) {
    for (auto d : {Direction::kForward, Direction::kBackward}) {
      auto b = p.gate_bias(d);
      std::fill(b.begin() + static_cast<std::ptrdiff_t>(dims.hidden),
                b.begin() + static_cast<std::ptrdiff_t>(2 * dims.hidden), kForgetBias);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Affine map

inline Vector affine(ConstMatrixRef w, std::span<const double> x, std::span<const double> b) {
  if (x.size() != w.cols || b.size() != w.rows)
    throw Error(ErrorCode::kShapeMismatch, "affine: W is " + std::to_string(w.rows) + "x" +
                                               std::to_string(w.cols) + ", x has " +
                                               std::to_string(x.size()) + ", b has " +
                                               std::to_string(b.size()));
  Vector y(b.begin(), b.end());
  kernel::gemv_acc(w, x.data(), y.data());
  return y;
}

struct AffineGradients {
  Vector dw;  // row-major, same shape as W
  Vector dx;
  Vector db;
};

inline AffineGradients affine_backward(ConstMatrixRef w, std::span<const double> x,
                                       std::span<const double> dy) {
  if (x.size() != w.cols || dy.size() != w.rows)
    throw Error(ErrorCode::kShapeMismatch, "affine_backward: shape mismatch");
  AffineGradients g{Vector(w.size(), 0.0), Vector(w.cols, 0.0), Vector(dy.begin(), dy.end())};
  kernel::outer_acc({g.dw.data(), w.rows, w.cols}, dy.data(), x.data());
  kernel::gemv_t_acc(w, dy.data(), g.dx.data());
  return g;
}

// ---------------------------------------------------------------------------
// Recurrent cells
//
// Simple cell:  h = logistic(W_h h_prev + W_x x), no bias.
// Gated cell:   [i f o g] = W_x x + W_h h_prev + b, i/f/o logistic, g tanh,
//               c = f*c_prev + i*g, h = o*tanh(c).

// Per-arc scratch the backward pass needs. `gates`, `c` and `tanh_c` are
// only used by the gated cell.
struct CellCache {
  std::span<double> h;
  std::span<double> c;
  std::span<double> gates;   // 4H activations, i f o g
  std::span<double> tanh_c;
};

inline void check_cell_shapes(const CellWeights& w, std::size_t h_prev, std::size_t x) {
  const std::size_t g = w.type == CellType::kGated ? 4 : 1;
  const std::size_t hidden = w.recurrent.cols;
  if (w.recurrent.rows != g * hidden || w.input.rows != g * hidden || h_prev != hidden ||
      x != w.input.cols ||
      (w.type == CellType::kGated && w.bias.size() != g * hidden))
    throw Error(ErrorCode::kShapeMismatch, "cell: inconsistent dimensions");
}

inline void cell_forward(const CellWeights& w, const double* h_prev, const double* c_prev,
                         const double* x, const CellCache& out) {
  const std::size_t hidden = w.recurrent.cols;
  if (w.type == CellType::kSimple) {
    double* pre = out.h.data();
    std::fill(pre, pre + hidden, 0.0);
    kernel::gemv_acc(w.recurrent, h_prev, pre);
    kernel::gemv_acc(w.input, x, pre);
    for (std::size_t j = 0; j < hidden; ++j) pre[j] = logistic(pre[j]);
    return;
  }
  double* a = out.gates.data();
  std::copy(w.bias.begin(), w.bias.end(), a);
  kernel::gemv_acc(w.input, x, a);
  kernel::gemv_acc(w.recurrent, h_prev, a);
  double* gi = a;
  double* gf = a + hidden;
  double* go = a + 2 * hidden;
  double* gg = a + 3 * hidden;
  for (std::size_t j = 0; j < hidden; ++j) {
    gi[j] = logistic(gi[j]);
    gf[j] = logistic(gf[j]);
    go[j] = logistic(go[j]);
    gg[j] = std::tanh(gg[j]);
    const double c = gf[j] * c_prev[j] + gi[j] * gg[j];
    out.c[j] = c;
    out.tanh_c[j] = std::tanh(c);
    out.h[j] = go[j] * out.tanh_c[j];
  }
}

// Accumulates parameter gradients into `grads` and state gradients into
// dh_prev / dc_prev. `scratch` must hold gates*H doubles.
inline void cell_backward(const CellWeights& w, const double* h_prev, const double* c_prev,
                          const double* x, const CellCache& cache, const double* dh,
                          const double* dc, const CellGradients& grads, double* dh_prev,
                          double* dc_prev, double* scratch) {
  const std::size_t hidden = w.recurrent.cols;
  double* da = scratch;
  if (w.type == CellType::kSimple) {
    for (std::size_t j = 0; j < hidden; ++j) {
      const double h = cache.h[j];
      da[j] = dh[j] * h * (1.0 - h);
    }
  } else {
    const double* gi = cache.gates.data();
    const double* gf = gi + hidden;
    const double* go = gi + 2 * hidden;
    const double* gg = gi + 3 * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double tc = cache.tanh_c[j];
      const double dct = (dc ? dc[j] : 0.0) + dh[j] * go[j] * (1.0 - tc * tc);
      da[j] = dct * gg[j] * gi[j] * (1.0 - gi[j]);
      da[hidden + j] = dct * c_prev[j] * gf[j] * (1.0 - gf[j]);
      da[2 * hidden + j] = dh[j] * tc * go[j] * (1.0 - go[j]);
      da[3 * hidden + j] = dct * gi[j] * (1.0 - gg[j] * gg[j]);
      if (dc_prev) dc_prev[j] += dct * gf[j];
    }
    for (std::size_t r = 0; r < 4 * hidden; ++r) grads.bias[r] += da[r];
  }
  kernel::outer_acc(grads.input, da, x);
  kernel::outer_acc(grads.recurrent, da, h_prev);
  kernel::gemv_t_acc(w.recurrent, da, dh_prev);
}

inline Vector simple_cell(std::span<const double> h_prev, std::span<const double> x,
                          ConstMatrixRef recurrent, ConstMatrixRef input) {
  const CellWeights w{CellType::kSimple, input, recurrent, {}};
  check_cell_shapes(w, h_prev.size(), x.size());
  Vector h(h_prev.size());
  cell_forward(w, h_prev.data(), nullptr, x.data(), {h, {}, {}, {}});
  return h;
}

struct GatedState {
  Vector h;
  Vector c;
};

inline GatedState gated_cell(std::span<const double> h_prev, std::span<const double> c_prev,
                             std::span<const double> x, const CellWeights& w) {
  check_cell_shapes(w, h_prev.size(), x.size());
  if (c_prev.size() != h_prev.size())
    throw Error(ErrorCode::kShapeMismatch, "gated cell: c_prev size");
  const std::size_t hidden = h_prev.size();
  GatedState s{Vector(hidden), Vector(hidden)};
  Vector gates(4 * hidden), tanh_c(hidden);
  cell_forward(w, h_prev.data(), c_prev.data(), x.data(), {s.h, s.c, gates, tanh_c});
  return s;
}

// ---------------------------------------------------------------------------
// Attention scoring

// z = act(w_a . k + b_a)
inline double attention_logit(std::span<const double> key, std::span<const double> w_a,
                              double b_a,
                              AttentionActivation act = AttentionActivation::kLogistic) {
  if (key.size() != w_a.size())
    throw Error(ErrorCode::kShapeMismatch, "attention key has " + std::to_string(key.size()) +
                                               " entries, weights " +
                                               std::to_string(w_a.size()));
  return activate(act, kernel::dot(key.data(), w_a.data(), key.size()) + b_a);
}

// Max-subtracted softmax.
inline Vector softmax(std::span<const double> z) {
  Vector out(z.begin(), z.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

// dz_i = alpha_i (dalpha_i - sum_j alpha_j dalpha_j)
inline Vector softmax_backward(std::span<const double> alpha, std::span<const double> dalpha) {
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) s += alpha[i] * dalpha[i];
  Vector dz(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) dz[i] = alpha[i] * (dalpha[i] - s);
  return dz;
}

// ---------------------------------------------------------------------------
// Optimization helpers

inline void sgd_step(ModelParams& params, const Gradient& grad, double lr) {
  if (!params.congruent(grad) || params.size() != grad.size())
    throw Error(ErrorCode::kShapeMismatch, "sgd_step: gradient is not congruent");
  auto p = params.flat();
  auto g = grad.flat();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Rescales so the global norm is at most max_norm. Returns the norm before
// clipping.
inline double clip_gradient(Gradient& grad, double max_norm) {
  const double norm = l2_norm(grad.flat());
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& v : grad.flat()) v *= scale;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

inline constexpr double kRelativeErrorFloor = 1e-8;

inline double relative_error(double analytic, double numeric,
                             double floor = kRelativeErrorFloor) {
  return std::abs(analytic - numeric) / std::max(floor, std::abs(analytic) + std::abs(numeric));
}

// Central differences on every coordinate, or on a seeded sample of
// `min_coords` coordinates when the vector is larger than that.
template <class LossFn>
GradCheckResult grad_check(LossFn&& loss, std::span<const double> point,
                           std::span<const double> analytic, double eps = 1e-5,
                           std::size_t min_coords = 200, std::uint64_t seed = 0,
                           double floor = kRelativeErrorFloor) {
  if (point.size() != analytic.size())
    throw Error(ErrorCode::kShapeMismatch, "grad_check: gradient size");
  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), 0);
  if (coords.size() > min_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(min_coords);
    std::sort(coords.begin(), coords.end());
  }
  Vector probe(point.begin(), point.end());
  GradCheckResult result;
  for (std::size_t i : coords) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = loss(std::span<const double>(probe));
    probe[i] = saved - eps;
    const double down = loss(std::span<const double>(probe));
    probe[i] = saved;
    const double err = relative_error(analytic[i], (up - down) / (2.0 * eps), floor);
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace latconf
