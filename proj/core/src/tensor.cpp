#include "sami/tensor.hpp"

#include <numeric>
#include <stdexcept>

namespace sami {

namespace {
std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor Tensor::scalar(double v) {
  Tensor t{std::vector<std::size_t>{}};
  t.data_ = {v};
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.shape_ = {values.size()};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) +
                                " values do not fill shape");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw std::invalid_argument("Tensor::dim: axis out of range");
  return shape_[axis];
}

std::size_t Tensor::last_dim() const { return shape_.empty() ? 1 : shape_.back(); }

std::size_t Tensor::rows() const {
  std::size_t ld = last_dim();
  return ld == 0 ? 0 : numel() / ld;
}

double& Tensor::at(std::size_t r, std::size_t c) {
  if (rank() != 2 || r >= shape_[0] || c >= shape_[1])
    throw std::invalid_argument("Tensor::at(" + std::to_string(r) + "," + std::to_string(c) +
                                "): shape " + shape_str());
  return data_[r * shape_[1] + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return const_cast<Tensor*>(this)->at(r, c);
}

double Tensor::item() const {
  if (numel() != 1)
    throw std::invalid_argument("Tensor::item: tensor of shape " + shape_str() +
                                " is not a scalar");
  return data_[0];
}

std::string Tensor::shape_str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + ")";
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

void throw_shape_error(const std::string& op, const Tensor& a) {
  throw std::invalid_argument(op + ": invalid shape " + a.shape_str());
}

void throw_shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " and " +
                              b.shape_str());
}

}  // namespace sami
