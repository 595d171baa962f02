// Copyright 2026 The mtcil Authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "mtcil/common.hpp"
#include "mtcil/nn/tape.hpp"
#include "mtcil/nn/tensor.hpp"

// Differentiable ops. Each one computes its value eagerly and records a
// closure that pushes the output gradient back into its parents.
namespace mtcil::nn {

namespace kernel {

// Four partial sums so the compiler can vectorise without reassociating.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace kernel

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.shape.size() != rank) fail(op, ": expected rank ", rank, ", got shape ", shape_str(t.shape));
}

// y[n, o] = sum_i x[n, i] * w[o, i] + b[o]
inline Var linear(Tape& t, Var x, Var w, Var b) {
  const Tensor& X = t.value(x);
  const Tensor& W = t.value(w);
  const Tensor& B = t.value(b);
  require_rank(X, 2, "linear");
  require_rank(W, 2, "linear");
  if (W.dim(1) != X.dim(1)) {
    fail("linear: input ", shape_str(X.shape), " incompatible with weight ", shape_str(W.shape));
  }
  if (B.size() != static_cast<std::size_t>(W.dim(0))) {
    fail("linear: bias ", shape_str(B.shape), " incompatible with weight ", shape_str(W.shape));
  }
  const std::size_t N = X.dim(0), in = X.dim(1), out = W.dim(0);
  Tensor Y({static_cast<int>(N), static_cast<int>(out)});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t o = 0; o < out; ++o) {
      Y[n * out + o] = B[o] + kernel::dot(&X.data[n * in], &W.data[o * in], in);
    }
  }
  const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  return t.record(std::move(Y), ng, [x, w, b, N, in, out](Tape& t, const Tensor& g) {
    const Tensor& X = t.value(x);
    const Tensor& W = t.value(w);
    if (t.needs_grad(x)) {
      Tensor& dx = t.acc(x);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < out; ++o)
          kernel::axpy(g[n * out + o], &W.data[o * in], &dx.data[n * in], in);
    }
    if (t.needs_grad(w)) {
      Tensor& dw = t.acc(w);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < out; ++o)
          kernel::axpy(g[n * out + o], &X.data[n * in], &dw.data[o * in], in);
    }
    if (t.needs_grad(b)) {
      Tensor& db = t.acc(b);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < out; ++o) db[o] += g[n * out + o];
    }
  });
}

// 3x3 convolution, zero padding 1, NCHW. Lowered to im2col + matrix product.
inline Var conv3x3(Tape& t, Var x, Var w, Var b, int stride = 1) {
  const Tensor& X = t.value(x);
  const Tensor& W = t.value(w);
  const Tensor& B = t.value(b);
  require_rank(X, 4, "conv3x3");
  require_rank(W, 4, "conv3x3");
  if (stride < 1) fail("conv3x3: stride must be >= 1");
  if (W.dim(1) != X.dim(1) || W.dim(2) != 3 || W.dim(3) != 3) {
    fail("conv3x3: input ", shape_str(X.shape), " incompatible with weight ", shape_str(W.shape));
  }
  if (B.size() != static_cast<std::size_t>(W.dim(0))) {
    fail("conv3x3: bias ", shape_str(B.shape), " incompatible with weight ", shape_str(W.shape));
  }
  const int N = X.dim(0), C = X.dim(1), H = X.dim(2), Wd = X.dim(3), Co = W.dim(0);
  const int Ho = (H - 1) / stride + 1, Wo = (Wd - 1) / stride + 1;
  const std::size_t K = static_cast<std::size_t>(C) * 9, P = static_cast<std::size_t>(Ho) * Wo;

  auto cols = std::make_shared<std::vector<double>>(static_cast<std::size_t>(N) * K * P, 0.0);
  Tensor Y({N, Co, Ho, Wo});
  for (int n = 0; n < N; ++n) {
    double* cn = cols->data() + static_cast<std::size_t>(n) * K * P;
    const double* xn = &X.data[static_cast<std::size_t>(n) * C * H * Wd];
    for (int c = 0; c < C; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          double* row = cn + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * P;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= H) continue;
            const double* xr = xn + (static_cast<std::size_t>(c) * H + iy) * Wd;
            double* dst = row + static_cast<std::size_t>(oy) * Wo;
            for (int ox = 0; ox < Wo; ++ox) {
              const int ix = ox * stride + kx - 1;
              if (ix >= 0 && ix < Wd) dst[ox] = xr[ix];
            }
          }
        }
      }
    }
    double* yn = &Y.data[static_cast<std::size_t>(n) * Co * P];
    for (int co = 0; co < Co; ++co) {
      double* yr = yn + static_cast<std::size_t>(co) * P;
      std::fill(yr, yr + P, B[co]);
      for (std::size_t k = 0; k < K; ++k) kernel::axpy(W[co * K + k], cn + k * P, yr, P);
    }
  }
  const bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
  return t.record(std::move(Y), ng,
                  [x, w, b, cols, N, C, H, Wd, Co, Ho, Wo, K, P, stride](Tape& t, const Tensor& g) {
    const Tensor& W = t.value(w);
    if (t.needs_grad(w)) {
      Tensor& dw = t.acc(w);
      for (int n = 0; n < N; ++n) {
        const double* cn = cols->data() + static_cast<std::size_t>(n) * K * P;
        const double* gn = &g.data[static_cast<std::size_t>(n) * Co * P];
        for (int co = 0; co < Co; ++co)
          for (std::size_t k = 0; k < K; ++k)
            dw[co * K + k] += kernel::dot(gn + co * P, cn + k * P, P);
      }
    }
    if (t.needs_grad(b)) {
      Tensor& db = t.acc(b);
      for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co) {
          const double* gr = &g.data[(static_cast<std::size_t>(n) * Co + co) * P];
          double s = 0.0;
          for (std::size_t p = 0; p < P; ++p) s += gr[p];
          db[co] += s;
        }
    }
    if (t.needs_grad(x)) {
      Tensor& dx = t.acc(x);
      std::vector<double> dcols(K * P);
      for (int n = 0; n < N; ++n) {
        std::fill(dcols.begin(), dcols.end(), 0.0);
        const double* gn = &g.data[static_cast<std::size_t>(n) * Co * P];
        for (int co = 0; co < Co; ++co)
          for (std::size_t k = 0; k < K; ++k) kernel::axpy(W[co * K + k], gn + co * P, &dcols[k * P], P);
        double* dxn = &dx.data[static_cast<std::size_t>(n) * C * H * Wd];
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const double* row = &dcols[(static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * P];
              for (int oy = 0; oy < Ho; ++oy) {
                const int iy = oy * stride + ky - 1;
                if (iy < 0 || iy >= H) continue;
                double* xr = dxn + (static_cast<std::size_t>(c) * H + iy) * Wd;
                for (int ox = 0; ox < Wo; ++ox) {
                  const int ix = ox * stride + kx - 1;
                  if (ix >= 0 && ix < Wd) xr[ix] += row[static_cast<std::size_t>(oy) * Wo + ox];
                }
              }
            }
      }
    }
  });
}

inline Var relu(Tape& t, Var x) {
  Tensor Y = t.value(x);
  for (double& v : Y.data) v = v > 0.0 ? v : 0.0;
  return t.record(std::move(Y), t.needs_grad(x), [x](Tape& t, const Tensor& g) {
    const Tensor& X = t.value(x);
    Tensor& dx = t.acc(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (X[i] > 0.0) dx[i] += g[i];
  });
}

// Inverted dropout. In eval mode (or p = 0) this is the identity and returns
// the input node itself.
inline Var dropout(Tape& t, Var x, double p, bool train, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) fail("dropout: p must be in [0, 1), got ", p);
  if (!train || p == 0.0) return x;
  const double scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(t.value(x).size());
  for (double& m : *mask) m = uniform(rng, 0.0, 1.0) < p ? 0.0 : scale;
  Tensor Y = t.value(x);
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= (*mask)[i];
  return t.record(std::move(Y), t.needs_grad(x), [x, mask](Tape& t, const Tensor& g) {
    Tensor& dx = t.acc(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (*mask)[i];
  });
}

// [N, ...] -> [N, prod(...)]
inline Var flatten(Tape& t, Var x) {
  Tensor Y = t.value(x);
  if (Y.shape.empty()) fail("flatten: scalar input");
  const int n = Y.shape[0];
  Y.shape = {n, static_cast<int>(Y.row_size())};
  return t.record(std::move(Y), t.needs_grad(x), [x](Tape& t, const Tensor& g) {
    Tensor& dx = t.acc(x);
    kernel::axpy(1.0, g.data.data(), dx.data.data(), g.size());
  });
}

// Column-wise concatenation of rank-2 tensors sharing the row count.
inline Var concat(Tape& t, const std::vector<Var>& parts) {
  if (parts.empty()) fail("concat: no inputs");
  const Tensor& first = t.value(parts[0]);
  require_rank(first, 2, "concat");
  const int N = first.dim(0);
  int total = 0;
  std::vector<int> widths;
  bool ng = false;
  for (Var v : parts) {
    const Tensor& T = t.value(v);
    require_rank(T, 2, "concat");
    if (T.dim(0) != N) fail("concat: row mismatch ", shape_str(first.shape), " vs ", shape_str(T.shape));
    widths.push_back(T.dim(1));
    total += T.dim(1);
    ng = ng || t.needs_grad(v);
  }
  Tensor Y({N, total});
  int off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& T = t.value(parts[k]);
    for (int n = 0; n < N; ++n)
      std::copy_n(&T.data[static_cast<std::size_t>(n) * widths[k]], widths[k],
                  &Y.data[static_cast<std::size_t>(n) * total + off]);
    off += widths[k];
  }
  return t.record(std::move(Y), ng, [parts, widths, N, total](Tape& t, const Tensor& g) {
    int off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (t.needs_grad(parts[k])) {
        Tensor& d = t.acc(parts[k]);
        for (int n = 0; n < N; ++n)
          kernel::axpy(1.0, &g.data[static_cast<std::size_t>(n) * total + off],
                       &d.data[static_cast<std::size_t>(n) * widths[k]], static_cast<std::size_t>(widths[k]));
      }
      off += widths[k];
    }
  });
}

// Rows idx[i] of x, in order.
inline Var gather_rows(Tape& t, Var x, const std::vector<int>& idx) {
  const Tensor& X = t.value(x);
  if (X.shape.empty()) fail("gather_rows: scalar input");
  const std::size_t R = X.row_size();
  Shape s = X.shape;
  s[0] = static_cast<int>(idx.size());
  Tensor Y(s);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= X.dim(0)) fail("gather_rows: index ", idx[i], " out of range");
    std::copy_n(&X.data[static_cast<std::size_t>(idx[i]) * R], R, &Y.data[i * R]);
  }
  return t.record(std::move(Y), t.needs_grad(x), [x, idx, R](Tape& t, const Tensor& g) {
    Tensor& dx = t.acc(x);
    for (std::size_t i = 0; i < idx.size(); ++i)
      kernel::axpy(1.0, &g.data[i * R], &dx.data[static_cast<std::size_t>(idx[i]) * R], R);
  });
}

// Inverse of gather_rows: an [n, ...] tensor holding x's rows at idx and zeros
// elsewhere. Indices must be distinct.
inline Var scatter_rows(Tape& t, Var x, const std::vector<int>& idx, int n) {
  const Tensor& X = t.value(x);
  if (X.shape.empty() || static_cast<std::size_t>(X.dim(0)) != idx.size()) {
    fail("scatter_rows: ", idx.size(), " indices for input ", shape_str(X.shape));
  }
  if (std::set<int>(idx.begin(), idx.end()).size() != idx.size()) fail("scatter_rows: duplicate index");
  const std::size_t R = X.row_size();
  Shape s = X.shape;
  s[0] = n;
  Tensor Y(s);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n) fail("scatter_rows: index ", idx[i], " out of range");
    std::copy_n(&X.data[i * R], R, &Y.data[static_cast<std::size_t>(idx[i]) * R]);
  }
  return t.record(std::move(Y), t.needs_grad(x), [x, idx, R](Tape& t, const Tensor& g) {
    Tensor& dx = t.acc(x);
    for (std::size_t i = 0; i < idx.size(); ++i)
      kernel::axpy(1.0, &g.data[static_cast<std::size_t>(idx[i]) * R], &dx.data[i * R], R);
  });
}

// Column j of a rank-2 tensor as [N, 1].
inline Var column(Tape& t, Var x, int j) {
  const Tensor& X = t.value(x);
  require_rank(X, 2, "column");
  if (j < 0 || j >= X.dim(1)) fail("column: index ", j, " out of range for ", shape_str(X.shape));
  const int N = X.dim(0), M = X.dim(1);
  Tensor Y({N, 1});
  for (int n = 0; n < N; ++n) Y[n] = X[static_cast<std::size_t>(n) * M + j];
  return t.record(std::move(Y), t.needs_grad(x), [x, j, N, M](Tape& t, const Tensor& g) {
    Tensor& dx = t.acc(x);
    for (int n = 0; n < N; ++n) dx[static_cast<std::size_t>(n) * M + j] += g[n];
  });
}

namespace detail {

// Elementwise binary op where either side may be a single-element tensor.
template <typename F, typename DA, typename DB>
Var binary(Tape& t, Var a, Var b, const char* name, F f, DA da, DB db) {
  const Tensor& A = t.value(a);
  const Tensor& Bv = t.value(b);
  const bool a1 = A.size() == 1 && Bv.size() != 1;
  const bool b1 = Bv.size() == 1 && A.size() != 1;
  if (!a1 && !b1 && A.shape != Bv.shape) {
    fail(name, ": shape mismatch ", shape_str(A.shape), " vs ", shape_str(Bv.shape));
  }
  Tensor Y(a1 ? Bv.shape : A.shape);
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = f(A[a1 ? 0 : i], Bv[b1 ? 0 : i]);
  const bool ng = t.needs_grad(a) || t.needs_grad(b);
  return t.record(std::move(Y), ng, [a, b, a1, b1, da, db](Tape& t, const Tensor& g) {
    const Tensor& A = t.value(a);
    const Tensor& Bv = t.value(b);
    if (t.needs_grad(a)) {
      Tensor& d = t.acc(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        d[a1 ? 0 : i] += g[i] * da(A[a1 ? 0 : i], Bv[b1 ? 0 : i]);
    }
    if (t.needs_grad(b)) {
      Tensor& d = t.acc(b);
      for (std::size_t i = 0; i < g.size(); ++i)
        d[b1 ? 0 : i] += g[i] * db(A[a1 ? 0 : i], Bv[b1 ? 0 : i]);
    }
  });
}

template <typename F, typename D>
Var unary(Tape& t, Var x, F f, D d) {
  Tensor Y = t.value(x);
  for (double& v : Y.data) v = f(v);
  return t.record(std::move(Y), t.needs_grad(x), [x, d](Tape& t, const Tensor& g) {
    const Tensor& X = t.value(x);
    Tensor& dx = t.acc(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * d(X[i]);
  });
}

}  // namespace detail

inline Var add(Tape& t, Var a, Var b) {
  return detail::binary(
      t, a, b, "add", [](double p, double q) { return p + q; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Var sub(Tape& t, Var a, Var b) {
  return detail::binary(
      t, a, b, "sub", [](double p, double q) { return p - q; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline Var mul(Tape& t, Var a, Var b) {
  return detail::binary(
      t, a, b, "mul", [](double p, double q) { return p * q; }, [](double, double q) { return q; },
      [](double p, double) { return p; });
}

inline Var scale(Tape& t, Var x, double c) {
  return detail::unary(t, x, [c](double v) { return c * v; }, [c](double) { return c; });
}

inline Var add_scalar(Tape& t, Var x, double c) {
  return detail::unary(t, x, [c](double v) { return v + c; }, [](double) { return 1.0; });
}

inline Var square(Tape& t, Var x) {
  return detail::unary(t, x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

// d|x|/dx taken as 0 at the origin.
inline Var abs(Tape& t, Var x) {
  return detail::unary(
      t, x, [](double v) { return std::abs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

inline Var exp(Tape& t, Var x) {
  return detail::unary(t, x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

inline Var sum(Tape& t, Var x) {
  const Tensor& X = t.value(x);
  double s = 0.0;
  for (double v : X.data) s += v;
  return t.record(Tensor::scalar(s), t.needs_grad(x), [x](Tape& t, const Tensor& g) {
    Tensor& dx = t.acc(x);
    for (double& v : dx.data) v += g[0];
  });
}

inline Var mean(Tape& t, Var x) {
  const std::size_t n = t.value(x).size();
  if (n == 0) fail("mean: empty tensor");
  return scale(t, sum(t, x), 1.0 / static_cast<double>(n));
}

}  // namespace mtcil::nn
