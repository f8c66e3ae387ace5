#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dctrain {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// Dense row-major double tensor. Rank 0 is a scalar (size 1).
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() : data(1, 0.0) {}

  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_size(shape), 0.0) {}

  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_size(shape))
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
  }

  static Tensor scalar(double v) {
    Tensor t;
    t.data[0] = v;
    return t;
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

  static Tensor full(Shape s, double v) {
    Tensor t(std::move(s));
    for (double& x : t.data) x = v;
    return t;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return shape.empty(); }

  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }

  double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace dctrain
