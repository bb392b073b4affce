#ifndef QUAYDECK_NN_TENSOR_HPP_
#define QUAYDECK_NN_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quaydeck/error.hpp"

namespace quaydeck::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

/// Storage aligned to Eigen's maximum so vectorized reductions peel the same
/// way regardless of which thread allocated the buffer.
using AlignedVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense row-major f64 array. 1-D tensors act as 1 x n rows.
struct Tensor {
  std::vector<int> shape;
  AlignedVector values;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0) : shape(std::move(dims)) {
    for (int d : shape)
      if (d <= 0) throw ShapeError("tensor dimensions must be positive");
    values.assign(element_count(shape), fill);
  }

  static std::size_t element_count(const std::vector<int>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }

  std::size_t size() const { return values.size(); }
  int rows() const { return shape.size() >= 2 ? shape[0] : 1; }
  int cols() const { return shape.empty() ? 0 : static_cast<int>(size() / static_cast<std::size_t>(rows())); }

  MatMap mat() { return {values.data(), rows(), cols()}; }
  ConstMatMap mat() const { return {values.data(), rows(), cols()}; }
  Eigen::Map<Eigen::RowVectorXd> row() { return {values.data(), static_cast<Eigen::Index>(size())}; }
  Eigen::Map<const Eigen::RowVectorXd> row() const { return {values.data(), static_cast<Eigen::Index>(size())}; }

  void fill(double v) { std::fill(values.begin(), values.end(), v); }

  void check_finite(const std::string& what) const {
    for (double v : values)
      if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
  }

  bool operator==(const Tensor&) const = default;
};

/// Throws NumericError if any entry of `m` is NaN or infinite.
template <typename Derived>
inline void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite intermediate: ") + what);
}

}  // namespace quaydeck::nn

#endif  // QUAYDECK_NN_TENSOR_HPP_
