#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gsamn/tape.hpp"
#include "gsamn/tensor.hpp"

// Differentiable operations over dense fp64 tensors. Every op computes its
// result eagerly and, when any input requires a gradient, records a backward
// rule on the tape. Shapes never broadcast; the only scalar convenience is
// scale()/add_scalar() with a plain double.

namespace gsamn {

namespace detail {

inline void record1(Tape& tape, const Tensor& a, Tensor& out, std::function<void()> fn) {
  const int ia = tape.ensure_node(a);
  const int io = tape.ensure_node(out);
  tape.record({ia}, io, std::move(fn));
}

inline void record2(Tape& tape, const Tensor& a, const Tensor& b, Tensor& out,
                    std::function<void()> fn) {
  const int ia = tape.ensure_node(a);
  const int ib = tape.ensure_node(b);
  const int io = tape.ensure_node(out);
  tape.record({ia, ib}, io, std::move(fn));
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

// Saturates into the open interval (0,1): 1.0 would otherwise be reached in
// fp64 for x >~ 37, and downstream log/gate-range contracts need strictness.
inline double sigmoid_scalar(double x) {
  double y;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    y = 1.0 / (1.0 + e);
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  const double lo = std::numeric_limits<double>::min();
  const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;  // nextafter(1, 0)
  return std::min(std::max(y, lo), hi);
}

}  // namespace detail

inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul expects rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * p, 0.0);
  {
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = av[i * k + kk];
        for (std::size_t j = 0; j < p; ++j) out[i * p + j] += aik * bv[kk * p + j];
      }
    }
  }
  Tensor res({m, p}, std::move(out), a.requires_grad() || b.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), bd = b.shared(), od = res.shared();
    detail::record2(tape, a, b, res, [ad, bd, od, m, k, p] {
      const auto& go = od->grad;
      if (ad->requires_grad) {
        auto& ga = ad->grad;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < p; ++j) {
            const double g = go[i * p + j];
            for (std::size_t kk = 0; kk < k; ++kk) ga[i * k + kk] += g * bd->values[kk * p + j];
          }
      }
      if (bd->requires_grad) {
        auto& gb = bd->grad;
        for (std::size_t kk = 0; kk < k; ++kk)
          for (std::size_t i = 0; i < m; ++i) {
            const double av_ik = ad->values[i * k + kk];
            for (std::size_t j = 0; j < p; ++j) gb[kk * p + j] += av_ik * go[i * p + j];
          }
      }
    });
  }
  return res;
}

inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  Tensor res(a.shape(), std::move(out), a.requires_grad() || b.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), bd = b.shared(), od = res.shared();
    detail::record2(tape, a, b, res, [ad, bd, od] {
      const auto& go = od->grad;
      if (ad->requires_grad)
        for (std::size_t i = 0; i < go.size(); ++i) ad->grad[i] += go[i];
      if (bd->requires_grad)
        for (std::size_t i = 0; i < go.size(); ++i) bd->grad[i] += go[i];
    });
  }
  return res;
}

inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  Tensor res(a.shape(), std::move(out), a.requires_grad() || b.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), bd = b.shared(), od = res.shared();
    detail::record2(tape, a, b, res, [ad, bd, od] {
      const auto& go = od->grad;
      if (ad->requires_grad)
        for (std::size_t i = 0; i < go.size(); ++i) ad->grad[i] += go[i] * bd->values[i];
      if (bd->requires_grad)
        for (std::size_t i = 0; i < go.size(); ++i) bd->grad[i] += go[i] * ad->values[i];
    });
  }
  return res;
}

enum class Elementwise { add, mul };

inline Tensor elementwise(Tape& tape, const Tensor& a, const Tensor& b, Elementwise kind) {
  return kind == Elementwise::add ? add(tape, a, b) : mul(tape, a, b);
}

inline Tensor scale(Tape& tape, const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * a.values()[i];
  Tensor res(a.shape(), std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od, s] {
      for (std::size_t i = 0; i < od->grad.size(); ++i) ad->grad[i] += s * od->grad[i];
    });
  }
  return res;
}

inline Tensor add_scalar(Tape& tape, const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + s;
  Tensor res(a.shape(), std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od] {
      for (std::size_t i = 0; i < od->grad.size(); ++i) ad->grad[i] += od->grad[i];
    });
  }
  return res;
}

inline Tensor sigmoid(Tape& tape, const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::sigmoid_scalar(a.values()[i]);
  Tensor res(a.shape(), std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od] {
      for (std::size_t i = 0; i < od->grad.size(); ++i) {
        const double y = od->values[i];
        ad->grad[i] += od->grad[i] * y * (1.0 - y);
      }
    });
  }
  return res;
}

namespace detail {

// One softmax row with max-subtraction; masked positions come out exactly 0.
inline void softmax_row(const double* x, const std::vector<bool>* mask, std::size_t mask_off,
                        std::size_t n, double* y) {
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask && !(*mask)[mask_off + i]) continue;
    any = true;
    mx = std::max(mx, x[i]);
  }
  if (!any) throw EmptySupportError("softmax: every position is masked");
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask && !(*mask)[mask_off + i]) {
      y[i] = 0.0;
    } else {
      y[i] = std::exp(x[i] - mx);
      z += y[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) y[i] /= z;
}

// dL/dx_i = y_i * (g_i - sum_j g_j y_j), which is 0 at masked positions.
inline void softmax_row_backward(const double* y, const double* gout, std::size_t n, double* gin) {
  double dot = 0.0;
  for (std::size_t j = 0; j < n; ++j) dot += gout[j] * y[j];
  for (std::size_t i = 0; i < n; ++i) gin[i] += y[i] * (gout[i] - dot);
}

}  // namespace detail

inline Tensor softmax(Tape& tape, const Tensor& a, const std::vector<bool>* mask = nullptr) {
  if (a.rank() != 1)
    throw DimensionError("softmax expects a rank-1 tensor, got " + shape_str(a.shape()));
  const std::size_t n = a.numel();
  if (mask && mask->size() != n)
    throw DimensionError("softmax: mask length " + std::to_string(mask->size()) +
                         " does not match input length " + std::to_string(n));
  std::vector<double> out(n);
  detail::softmax_row(a.values().data(), mask, 0, n, out.data());
  Tensor res(a.shape(), std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od, n] {
      detail::softmax_row_backward(od->values.data(), od->grad.data(), n, ad->grad.data());
    });
  }
  return res;
}

// Row-wise softmax of a rank-2 tensor; mask, when given, is row-major over all
// entries. Rows are independent in both directions.
inline Tensor softmax_rows(Tape& tape, const Tensor& a, const std::vector<bool>* mask = nullptr) {
  if (a.rank() != 2)
    throw DimensionError("softmax_rows expects a rank-2 tensor, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (mask && mask->size() != m * n)
    throw DimensionError("softmax_rows: mask size does not match " + shape_str(a.shape()));
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r)
    detail::softmax_row(a.values().data() + r * n, mask, r * n, n, out.data() + r * n);
  Tensor res(a.shape(), std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od, m, n] {
      for (std::size_t r = 0; r < m; ++r)
        detail::softmax_row_backward(od->values.data() + r * n, od->grad.data() + r * n, n,
                                     ad->grad.data() + r * n);
    });
  }
  return res;
}

enum class Reduce { sum, mean };

// Reduction along one axis; the axis disappears from the shape (a rank-1
// input reduces to a scalar of shape [1]).
inline Tensor reduce(Tape& tape, const Tensor& a, Reduce kind, std::size_t axis) {
  if (axis >= a.rank())
    throw DimensionError("reduce: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(a.shape()));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= a.dim(i);
  for (std::size_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
  const std::size_t len = a.dim(axis);

  Shape out_shape;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (i != axis) out_shape.push_back(a.dim(i));
  if (out_shape.empty()) out_shape = {1};

  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t in = 0; in < inner; ++in)
        out[o * inner + in] += a.values()[(o * len + l) * inner + in];
  if (kind == Reduce::mean)
    for (double& v : out) v /= static_cast<double>(len);

  Tensor res(std::move(out_shape), std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    const double w = kind == Reduce::mean ? 1.0 / static_cast<double>(len) : 1.0;
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od, outer, len, inner, w] {
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < len; ++l)
          for (std::size_t in = 0; in < inner; ++in)
            ad->grad[(o * len + l) * inner + in] += w * od->grad[o * inner + in];
    });
  }
  return res;
}

// Sum of every element, as a [1] scalar.
inline Tensor sum_all(Tape& tape, const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor res({1}, {total}, a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od] {
      const double g = od->grad[0];
      for (double& gi : ad->grad) gi += g;
    });
  }
  return res;
}

inline Tensor log(Tape& tape, const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.values()[i]);
  Tensor res(a.shape(), std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od] {
      for (std::size_t i = 0; i < od->grad.size(); ++i) ad->grad[i] += od->grad[i] / ad->values[i];
    });
  }
  return res;
}

// Clamp into [lo, hi]; gradient passes through strictly inside the interval.
inline Tensor clamp(Tape& tape, const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(a.values()[i], lo), hi);
  Tensor res(a.shape(), std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od, lo, hi] {
      for (std::size_t i = 0; i < od->grad.size(); ++i) {
        const double x = ad->values[i];
        if (x > lo && x < hi) ad->grad[i] += od->grad[i];
      }
    });
  }
  return res;
}

inline Tensor concat(Tape& tape, const Tensor& a, const Tensor& b, std::size_t axis) {
  if (a.rank() != b.rank())
    throw DimensionError("concat: rank mismatch: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  if (a.rank() == 1) {
    if (axis != 0) throw DimensionError("concat: axis 1 invalid for rank-1 tensors");
    std::vector<double> out(a.values());
    out.insert(out.end(), b.values().begin(), b.values().end());
    Tensor res({a.numel() + b.numel()}, std::move(out), a.requires_grad() || b.requires_grad());
    if (res.requires_grad()) {
      auto ad = a.shared(), bd = b.shared(), od = res.shared();
      const std::size_t na = a.numel();
      detail::record2(tape, a, b, res, [ad, bd, od, na] {
        if (ad->requires_grad)
          for (std::size_t i = 0; i < na; ++i) ad->grad[i] += od->grad[i];
        if (bd->requires_grad)
          for (std::size_t i = 0; i < bd->grad.size(); ++i) bd->grad[i] += od->grad[na + i];
      });
    }
    return res;
  }
  if (a.rank() != 2 || axis > 1)
    throw DimensionError("concat supports rank-1 and rank-2 tensors on axis 0 or 1");
  const std::size_t ra = a.dim(0), ca = a.dim(1), rb = b.dim(0), cb = b.dim(1);
  if (axis == 0) {
    if (ca != cb)
      throw DimensionError("concat axis 0: column counts disagree: " + shape_str(a.shape()) +
                           " vs " + shape_str(b.shape()));
    std::vector<double> out(a.values());
    out.insert(out.end(), b.values().begin(), b.values().end());
    Tensor res({ra + rb, ca}, std::move(out), a.requires_grad() || b.requires_grad());
    if (res.requires_grad()) {
      auto ad = a.shared(), bd = b.shared(), od = res.shared();
      const std::size_t na = a.numel();
      detail::record2(tape, a, b, res, [ad, bd, od, na] {
        if (ad->requires_grad)
          for (std::size_t i = 0; i < na; ++i) ad->grad[i] += od->grad[i];
        if (bd->requires_grad)
          for (std::size_t i = 0; i < bd->grad.size(); ++i) bd->grad[i] += od->grad[na + i];
      });
    }
    return res;
  }
  if (ra != rb)
    throw DimensionError("concat axis 1: row counts disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  const std::size_t cols = ca + cb;
  std::vector<double> out(ra * cols);
  for (std::size_t i = 0; i < ra; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out[i * cols + j] = a.values()[i * ca + j];
    for (std::size_t j = 0; j < cb; ++j) out[i * cols + ca + j] = b.values()[i * cb + j];
  }
  Tensor res({ra, cols}, std::move(out), a.requires_grad() || b.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), bd = b.shared(), od = res.shared();
    detail::record2(tape, a, b, res, [ad, bd, od, ra, ca, cb, cols] {
      if (ad->requires_grad)
        for (std::size_t i = 0; i < ra; ++i)
          for (std::size_t j = 0; j < ca; ++j) ad->grad[i * ca + j] += od->grad[i * cols + j];
      if (bd->requires_grad)
        for (std::size_t i = 0; i < ra; ++i)
          for (std::size_t j = 0; j < cb; ++j) bd->grad[i * cb + j] += od->grad[i * cols + ca + j];
    });
  }
  return res;
}

inline Tensor slice_rows(Tape& tape, const Tensor& a, std::size_t begin, std::size_t end) {
  if (a.rank() != 2)
    throw DimensionError("slice_rows expects a rank-2 tensor, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (begin >= end || end > m)
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " + std::to_string(m) + " rows");
  std::vector<double> out(a.values().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          a.values().begin() + static_cast<std::ptrdiff_t>(end * n));
  Tensor res({end - begin, n}, std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od, begin, n] {
      for (std::size_t i = 0; i < od->grad.size(); ++i) ad->grad[begin * n + i] += od->grad[i];
    });
  }
  return res;
}

inline Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
  Tensor res(std::move(shape), a.values(), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od] {
      for (std::size_t i = 0; i < od->grad.size(); ++i) ad->grad[i] += od->grad[i];
    });
  }
  return res;
}

inline Tensor transpose(Tape& tape, const Tensor& a) {
  if (a.rank() != 2)
    throw DimensionError("transpose expects a rank-2 tensor, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
  Tensor res({n, m}, std::move(out), a.requires_grad());
  if (res.requires_grad()) {
    auto ad = a.shared(), od = res.shared();
    detail::record1(tape, a, res, [ad, od, m, n] {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ad->grad[i * n + j] += od->grad[j * m + i];
    });
  }
  return res;
}

// Gather rows of a [V x d] table; backward scatter-adds, so repeated indices
// accumulate.
inline Tensor take_rows(Tape& tape, const Tensor& table, const std::vector<std::size_t>& rows) {
  if (table.rank() != 2)
    throw DimensionError("take_rows expects a rank-2 table, got " + shape_str(table.shape()));
  if (rows.empty()) throw EmptyInputError("take_rows: no rows requested");
  const std::size_t v = table.dim(0), d = table.dim(1);
  for (std::size_t r : rows) {
    if (r >= v)
      throw ContractError("take_rows: row " + std::to_string(r) + " out of range for table with " +
                          std::to_string(v) + " rows");
  }
  std::vector<double> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = table.values()[rows[i] * d + j];
  Tensor res({rows.size(), d}, std::move(out), table.requires_grad());
  if (res.requires_grad()) {
    auto td = table.shared(), od = res.shared();
    detail::record1(tape, table, res, [td, od, rows, d] {
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) td->grad[rows[i] * d + j] += od->grad[i * d + j];
    });
  }
  return res;
}

}  // namespace gsamn
