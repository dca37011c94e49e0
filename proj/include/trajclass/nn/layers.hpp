#pragma once

// Forward and backward passes for the four layer types. Backward functions
// accumulate (+=) into parameter gradients and overwrite input gradients.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "trajclass/nn/tensor.hpp"

namespace trajclass::nn {

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace kernel {

/// y = A x (+ y if accumulate), A row-major [rows x cols].
inline void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y,
                   bool accumulate = false) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      s0 += row[c] * x[c];
      s1 += row[c + 1] * x[c + 1];
      s2 += row[c + 2] * x[c + 2];
      s3 += row[c + 3] * x[c + 3];
    }
    for (; c < cols; ++c) s0 += row[c] * x[c];
    const double s = (s0 + s1) + (s2 + s3);
    y[r] = accumulate ? y[r] + s : s;
  }
}

/// y += A^T g.
inline void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* g, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] += row[c] * gr;
  }
}

/// A += g x^T.
inline void outer_acc(double* a, std::size_t rows, std::size_t cols, const double* g, const double* x) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += gr * x[c];
  }
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Dense: y = W x + b, W [out x in]

inline void dense_forward(std::span<const double> x, const Tensor& w, const Tensor& b, std::span<double> y) {
  const std::size_t out = w.rows(), in = w.cols();
  require_size(x.size(), in, "dense input");
  require_size(b.size(), out, "dense bias");
  require_size(y.size(), out, "dense output");
  kernel::matvec(w.data(), out, in, x.data(), y.data());
  for (std::size_t o = 0; o < out; ++o) y[o] += b[o];
}

/// dx may be empty when the input gradient is not needed.
inline void dense_backward(std::span<const double> x, const Tensor& w, std::span<const double> dy,
                           std::span<double> dx, Tensor& dw, Tensor& db) {
  const std::size_t out = w.rows(), in = w.cols();
  require_size(dy.size(), out, "dense output gradient");
  kernel::outer_acc(dw.data(), out, in, dy.data(), x.data());
  for (std::size_t o = 0; o < out; ++o) db[o] += dy[o];
  if (!dx.empty()) {
    require_size(dx.size(), in, "dense input gradient");
    std::fill(dx.begin(), dx.end(), 0.0);
    kernel::matvec_t_acc(w.data(), out, in, dy.data(), dx.data());
  }
}

// ---------------------------------------------------------------------------
// Conv1D over time, kernel width 2, stride 1, no padding.
//   x [T x Cin] row-major, kernels [C x Cin x 2], y [(T-1) x C]
//   y[t][c] = b[c] + sum_i sum_k K[c][i][k] * x[t + k][i]

inline constexpr std::size_t kConvWidth = 2;

inline void conv1d_forward(std::span<const double> x, std::size_t steps, const Tensor& k, const Tensor& b,
                           std::span<double> y) {
  if (k.shape.size() != 3 || k.shape[2] != kConvWidth) throw ShapeError("conv1d kernels must be [C x Cin x 2]");
  const std::size_t channels = k.shape[0], cin = k.shape[1];
  if (steps < kConvWidth) throw ShapeError("conv1d needs at least 2 time steps");
  require_size(x.size(), steps * cin, "conv1d input");
  require_size(b.size(), channels, "conv1d bias");
  const std::size_t out_steps = steps - kConvWidth + 1;
  require_size(y.size(), out_steps * channels, "conv1d output");
  for (std::size_t t = 0; t < out_steps; ++t) {
    const double* window = x.data() + t * cin;  // x[t..t+1][*], contiguous
    for (std::size_t c = 0; c < channels; ++c) {
      const double* kc = k.data() + c * cin * kConvWidth;
      double s = b[c];
      for (std::size_t i = 0; i < cin; ++i) {
        for (std::size_t j = 0; j < kConvWidth; ++j) s += kc[i * kConvWidth + j] * window[j * cin + i];
      }
      y[t * channels + c] = s;
    }
  }
}

inline void conv1d_backward(std::span<const double> x, std::size_t steps, const Tensor& k,
                            std::span<const double> dy, std::span<double> dx, Tensor& dk, Tensor& db) {
  const std::size_t channels = k.shape[0], cin = k.shape[1];
  const std::size_t out_steps = steps - kConvWidth + 1;
  require_size(dy.size(), out_steps * channels, "conv1d output gradient");
  if (!dx.empty()) {
    require_size(dx.size(), steps * cin, "conv1d input gradient");
    std::fill(dx.begin(), dx.end(), 0.0);
  }
  for (std::size_t t = 0; t < out_steps; ++t) {
    const double* window = x.data() + t * cin;
    for (std::size_t c = 0; c < channels; ++c) {
      const double g = dy[t * channels + c];
      if (g == 0.0) continue;
      db[c] += g;
      double* dkc = dk.data() + c * cin * kConvWidth;
      const double* kc = k.data() + c * cin * kConvWidth;
      for (std::size_t i = 0; i < cin; ++i) {
        for (std::size_t j = 0; j < kConvWidth; ++j) {
          dkc[i * kConvWidth + j] += g * window[j * cin + i];
          if (!dx.empty()) dx[(t + j) * cin + i] += g * kc[i * kConvWidth + j];
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// LSTM cell. Gate blocks in W [4H x I], U [4H x H], b [4H] are ordered
// i, f, g, o.

struct LstmParams {
  const Tensor& w;
  const Tensor& u;
  const Tensor& b;
};

struct LstmGrads {
  Tensor& w;
  Tensor& u;
  Tensor& b;
};

/// Activations of one step, kept for the backward pass.
struct LstmStep {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> gates;  // activated i, f, g, o (4H)
  std::vector<double> c, tanh_c, h;
};

inline void lstm_cell_forward(std::span<const double> x, std::span<const double> h, std::span<const double> c,
                              const LstmParams& p, LstmStep& s) {
  const std::size_t hidden = p.u.cols(), in = p.w.cols();
  require_shape(p.w, {4 * hidden, in}, "lstm W");
  require_shape(p.u, {4 * hidden, hidden}, "lstm U");
  require_size(p.b.size(), 4 * hidden, "lstm bias");
  require_size(x.size(), in, "lstm input");
  require_size(h.size(), hidden, "lstm hidden state");
  require_size(c.size(), hidden, "lstm cell state");

  s.x.assign(x.begin(), x.end());
  s.h_prev.assign(h.begin(), h.end());
  s.c_prev.assign(c.begin(), c.end());
  s.gates.assign(p.b.values.begin(), p.b.values.end());
  kernel::matvec(p.w.data(), 4 * hidden, in, x.data(), s.gates.data(), true);
  kernel::matvec(p.u.data(), 4 * hidden, hidden, h.data(), s.gates.data(), true);
  s.c.resize(hidden);
  s.tanh_c.resize(hidden);
  s.h.resize(hidden);
  double* gi = s.gates.data();
  double* gf = gi + hidden;
  double* gg = gf + hidden;
  double* go = gg + hidden;
  for (std::size_t j = 0; j < hidden; ++j) {
    gi[j] = sigmoid(gi[j]);
    gf[j] = sigmoid(gf[j]);
    gg[j] = std::tanh(gg[j]);
    go[j] = sigmoid(go[j]);
    s.c[j] = gf[j] * c[j] + gi[j] * gg[j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = go[j] * s.tanh_c[j];
  }
}

/// Given dL/dh' and dL/dc' for this step, writes dL/dx, dL/dh, dL/dc.
/// `scratch` must hold 4H doubles.
inline void lstm_cell_backward(const LstmStep& s, const LstmParams& p, std::span<const double> dh,
                               std::span<const double> dc_next, std::span<double> dx, std::span<double> dh_prev,
                               std::span<double> dc_prev, LstmGrads& g, std::vector<double>& scratch) {
  const std::size_t hidden = p.u.cols(), in = p.w.cols();
  scratch.resize(4 * hidden);
  const double* gi = s.gates.data();
  const double* gf = gi + hidden;
  const double* gg = gf + hidden;
  const double* go = gg + hidden;
  double* da_i = scratch.data();
  double* da_f = da_i + hidden;
  double* da_g = da_f + hidden;
  double* da_o = da_g + hidden;
  for (std::size_t j = 0; j < hidden; ++j) {
    const double dc = dc_next[j] + dh[j] * go[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
    da_o[j] = dh[j] * s.tanh_c[j] * go[j] * (1.0 - go[j]);
    da_i[j] = dc * gg[j] * gi[j] * (1.0 - gi[j]);
    da_f[j] = dc * s.c_prev[j] * gf[j] * (1.0 - gf[j]);
    da_g[j] = dc * gi[j] * (1.0 - gg[j] * gg[j]);
    dc_prev[j] = dc * gf[j];
  }
  kernel::outer_acc(g.w.data(), 4 * hidden, in, scratch.data(), s.x.data());
  kernel::outer_acc(g.u.data(), 4 * hidden, hidden, scratch.data(), s.h_prev.data());
  for (std::size_t j = 0; j < 4 * hidden; ++j) g.b[j] += scratch[j];
  std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
  kernel::matvec_t_acc(p.u.data(), 4 * hidden, hidden, scratch.data(), dh_prev.data());
  if (!dx.empty()) {
    std::fill(dx.begin(), dx.end(), 0.0);
    kernel::matvec_t_acc(p.w.data(), 4 * hidden, in, scratch.data(), dx.data());
  }
}

// ---------------------------------------------------------------------------
// GRU cell. Blocks in W [3H x I], U [3H x H], b [3H] are ordered z, r, n:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   n = tanh(Wn x + Un (r * h) + bn)
//   h' = (1 - z) * h + z * n

struct GruParams {
  const Tensor& w;
  const Tensor& u;
  const Tensor& b;
};

struct GruGrads {
  Tensor& w;
  Tensor& u;
  Tensor& b;
};

struct GruStep {
  std::vector<double> x, h_prev, rh;
  std::vector<double> gates;  // activated z, r, n (3H)
  std::vector<double> h;
};

inline void gru_cell_forward(std::span<const double> x, std::span<const double> h, const GruParams& p, GruStep& s) {
  const std::size_t hidden = p.u.cols(), in = p.w.cols();
  require_shape(p.w, {3 * hidden, in}, "gru W");
  require_shape(p.u, {3 * hidden, hidden}, "gru U");
  require_size(p.b.size(), 3 * hidden, "gru bias");
  require_size(x.size(), in, "gru input");
  require_size(h.size(), hidden, "gru hidden state");

  s.x.assign(x.begin(), x.end());
  s.h_prev.assign(h.begin(), h.end());
  s.gates.assign(p.b.values.begin(), p.b.values.end());
  kernel::matvec(p.w.data(), 3 * hidden, in, x.data(), s.gates.data(), true);
  // z and r see U h; n sees U (r * h), added after r is known.
  kernel::matvec(p.u.data(), 2 * hidden, hidden, h.data(), s.gates.data(), true);
  double* gz = s.gates.data();
  double* gr = gz + hidden;
  double* gn = gr + hidden;
  s.rh.resize(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    gz[j] = sigmoid(gz[j]);
    gr[j] = sigmoid(gr[j]);
    s.rh[j] = gr[j] * h[j];
  }
  kernel::matvec(p.u.data() + 2 * hidden * hidden, hidden, hidden, s.rh.data(), gn, true);
  s.h.resize(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    gn[j] = std::tanh(gn[j]);
    s.h[j] = (1.0 - gz[j]) * h[j] + gz[j] * gn[j];
  }
}

/// `scratch` is resized to hold 4H doubles.
inline void gru_cell_backward(const GruStep& s, const GruParams& p, std::span<const double> dh, std::span<double> dx,
                              std::span<double> dh_prev, GruGrads& g, std::vector<double>& scratch) {
  const std::size_t hidden = p.u.cols(), in = p.w.cols();
  scratch.assign(4 * hidden, 0.0);
  const double* gz = s.gates.data();
  const double* gr = gz + hidden;
  const double* gn = gr + hidden;
  double* da_z = scratch.data();
  double* da_r = da_z + hidden;
  double* da_n = da_r + hidden;
  double* drh = da_n + hidden;

  for (std::size_t j = 0; j < hidden; ++j) {
    da_n[j] = dh[j] * gz[j] * (1.0 - gn[j] * gn[j]);
    da_z[j] = dh[j] * (gn[j] - s.h_prev[j]) * gz[j] * (1.0 - gz[j]);
    dh_prev[j] = dh[j] * (1.0 - gz[j]);
  }
  const double* un = p.u.data() + 2 * hidden * hidden;
  kernel::matvec_t_acc(un, hidden, hidden, da_n, drh);
  for (std::size_t j = 0; j < hidden; ++j) {
    da_r[j] = drh[j] * s.h_prev[j] * gr[j] * (1.0 - gr[j]);
    dh_prev[j] += drh[j] * gr[j];
  }

  kernel::outer_acc(g.w.data(), 3 * hidden, in, scratch.data(), s.x.data());
  kernel::outer_acc(g.u.data(), 2 * hidden, hidden, scratch.data(), s.h_prev.data());
  kernel::outer_acc(g.u.data() + 2 * hidden * hidden, hidden, hidden, da_n, s.rh.data());
  for (std::size_t j = 0; j < 3 * hidden; ++j) g.b[j] += scratch[j];
  kernel::matvec_t_acc(p.u.data(), 2 * hidden, hidden, scratch.data(), dh_prev.data());
  if (!dx.empty()) {
    std::fill(dx.begin(), dx.end(), 0.0);
    kernel::matvec_t_acc(p.w.data(), 3 * hidden, in, scratch.data(), dx.data());
  }
}

// ---------------------------------------------------------------------------
// Loss

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits = softmax - onehot
};

/// Cross-entropy of softmax(logits) against `label`, stabilised by
/// subtracting the max logit.
inline LossResult softmax_cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw std::invalid_argument("softmax_cross_entropy: label out of range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  LossResult r;
  r.grad.resize(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.grad[i] = std::exp(logits[i] - m);
    z += r.grad[i];
  }
  const auto li = static_cast<std::size_t>(label);
  r.loss = std::log(z) - (logits[li] - m);
  for (auto& v : r.grad) v /= z;
  r.grad[li] -= 1.0;
  return r;
}

/// Index of the largest logit; ties go to the lowest index.
inline int argmax(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace trajclass::nn
