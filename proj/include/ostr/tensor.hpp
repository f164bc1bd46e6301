#pragma once

#include <cassert>
#include <cstdint>
#include <utility>
#include <vector>

namespace ostr {

// Dense row-major tensor of doubles, rank 1..4. The one numeric container
// used everywhere; all training math is done in 64-bit.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(count(shape_)), 0.0);
  }

  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    assert(static_cast<std::int64_t>(data_.size()) == count(shape_));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  double& at(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  double& at(int i, int j, int k, int l) {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) *
                     shape_[3] +
                 l];
  }
  double at(int i) const { return data_[static_cast<std::size_t>(i)]; }
  double at(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * shape_[1] + j];
  }
  double at(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  double at(int i, int j, int k, int l) const {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) *
                     shape_[3] +
                 l];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(double v) {
    for (double& x : data_) x = v;
  }

  static std::int64_t count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace ostr
