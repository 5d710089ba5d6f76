#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqil {

// Dense row-major tensor of 64-bit floats. Rank 0 (scalar), 1, or 2.
struct Tensor {
  std::vector<long> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor scalar(double v) {
    Tensor t;
    t.data.assign(1, v);
    return t;
  }

  static Tensor zeros(std::vector<long> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(count(t.shape)), 0.0);
    return t;
  }

  static Tensor full(std::vector<long> shape, double v) {
    Tensor t = zeros(std::move(shape));
    t.data.assign(t.data.size(), v);
    return t;
  }

  static Tensor vec(std::vector<double> values) {
    Tensor t;
    t.shape = {static_cast<long>(values.size())};
    t.data = std::move(values);
    return t;
  }

  static Tensor matrix(long rows, long cols, std::vector<double> values) {
    if (static_cast<long>(values.size()) != rows * cols)
      throw std::invalid_argument("Tensor::matrix: value count does not match rows*cols");
    Tensor t;
    t.shape = {rows, cols};
    t.data = std::move(values);
    return t;
  }

  long ndim() const { return static_cast<long>(shape.size()); }
  long numel() const { return static_cast<long>(data.size()); }

  bool is_scalar() const { return shape.empty(); }

  long rows() const {
    if (ndim() != 2) throw std::logic_error("Tensor::rows: tensor is not 2-d");
    return shape[0];
  }
  long cols() const {
    if (ndim() != 2) throw std::logic_error("Tensor::cols: tensor is not 2-d");
    return shape[1];
  }

  double& at(long i) { return data[static_cast<size_t>(i)]; }
  double at(long i) const { return data[static_cast<size_t>(i)]; }

  double& at(long i, long j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
  double at(long i, long j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }

  double item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item: tensor does not hold exactly one value");
    return data[0];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static long count(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }
};

std::string shape_str(const std::vector<long>& shape);

}  // namespace seqil
