#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gsamn/errors.hpp"

namespace gsamn {

class Tape;

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward runs
  bool requires_grad = false;
  Tape* tape = nullptr;  // tape this node currently belongs to
  int node_id = -1;
};

// Dense row-major fp64 tensor. Copies share storage (handle semantics);
// clone() makes an independent, detached copy.
class Tensor {
 public:
  Tensor() = default;  // undefined handle; any access throws

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false) {
    for (std::size_t d : shape) {
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
    }
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("shape " + shape_str(shape) + " wants " +
                           std::to_string(shape_numel(shape)) + " values, got " +
                           std::to_string(values.size()));
    }
    d_ = std::make_shared<TensorData>();
    d_->shape = std::move(shape);
    d_->values = std::move(values);
    d_->requires_grad = requires_grad;
  }

  static Tensor full(Shape shape, double v) {
    std::vector<double> vals(shape_numel(shape), v);
    return Tensor(std::move(shape), std::move(vals));
  }
  static Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  bool defined() const { return static_cast<bool>(d_); }

  const Shape& shape() const { return data().shape; }
  std::size_t rank() const { return data().shape.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= rank()) {
      throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                           shape_str(shape()));
    }
    return data().shape[axis];
  }
  std::size_t numel() const { return data().values.size(); }

  std::size_t rows() const { return dim2().first; }
  std::size_t cols() const { return dim2().second; }

  const std::vector<double>& values() const { return data().values; }
  std::vector<double>& values() { return data().values; }

  double value() const {
    if (numel() != 1) throw ContractError("expected a scalar tensor, got shape " + shape_str(shape()));
    return data().values[0];
  }
  double at(std::size_t i) const { return data().values.at(i); }
  double at(std::size_t r, std::size_t c) const {
    auto [m, n] = dim2();
    if (r >= m || c >= n) throw DimensionError("index out of range for shape " + shape_str(shape()));
    return data().values[r * n + c];
  }

  bool requires_grad() const { return data().requires_grad; }
  Tensor& set_requires_grad(bool on) {
    data().requires_grad = on;
    return *this;
  }

  bool has_grad() const { return !data().grad.empty(); }
  const std::vector<double>& grad() const {
    if (!has_grad()) throw ContractError("tensor has no gradient; run backward first");
    return data().grad;
  }
  void clear_grad() { data().grad.clear(); }

  int node_id() const { return data().node_id; }

  // Independent storage, detached from any tape.
  Tensor clone() const { return Tensor(shape(), values(), requires_grad()); }

  TensorData& data() const {
    if (!d_) throw ContractError("use of an undefined tensor");
    return *d_;
  }
  std::shared_ptr<TensorData> shared() const { return d_; }

 private:
  std::pair<std::size_t, std::size_t> dim2() const {
    if (rank() != 2) throw DimensionError("expected a rank-2 tensor, got shape " + shape_str(shape()));
    return {data().shape[0], data().shape[1]};
  }

  std::shared_ptr<TensorData> d_;
};

}  // namespace gsamn
