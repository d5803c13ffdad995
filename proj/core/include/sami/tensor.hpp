#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sami {

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 (vector) and 2
// (matrix) are the only ranks the library produces.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor vector(std::vector<double> values);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  // Size of the last axis (1 for scalars).
  std::size_t last_dim() const;
  // Number of rows when viewed as (rows, last_dim).
  std::size_t rows() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

  void fill(double v);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Throws std::invalid_argument naming the operation and the offending shapes.
[[noreturn]] void throw_shape_error(const std::string& op, const Tensor& a);
[[noreturn]] void throw_shape_error(const std::string& op, const Tensor& a, const Tensor& b);

}  // namespace sami
