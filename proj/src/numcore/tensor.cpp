#include "uavip/numcore/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uavip/error.hpp"

namespace uavip::numcore {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ConfigError("Tensor2: data length " + std::to_string(data_.size()) +
                      " does not match shape " + std::to_string(rows_) + "x" +
                      std::to_string(cols_));
  }
}

Tensor2 Tensor2::row_vector(std::initializer_list<double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values));
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  return Tensor2(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

bool Tensor2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void Tensor2::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols() != b.rows()) {
    throw ConfigError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.rows()) + ")");
  }
  Tensor2 out(a.rows(), b.cols());
  const std::size_t inner = a.cols();
  const std::size_t width = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out_row = out.row(i).data();
    const double* a_row = a.row(i).data();
    for (std::size_t p = 0; p < inner; ++p) {
      const double s = a_row[p];
      if (s == 0.0) {
        continue;
      }
      const double* b_row = b.row(p).data();
      for (std::size_t j = 0; j < width; ++j) {
        out_row[j] += s * b_row[j];
      }
    }
  }
  return out;
}

}  // namespace uavip::numcore
