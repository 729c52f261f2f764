#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "drorecode/error.hpp"

namespace drorecode {

/// Compressed sparse row matrix. Rows are appended one at a time; exact zeros are skipped.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  explicit CsrMatrix(std::size_t cols) : cols_(cols) {}

  struct Entry {
    std::size_t col;
    double value;
  };

  void append_row(std::span<const Entry> entries) {
    for (const auto& e : entries) {
      detail::require(e.col < cols_, "sparse entry column out of range");
      detail::require(std::isfinite(e.value), "sparse entry must be finite");
      if (e.value == 0.0) continue;
      col_idx_.push_back(e.col);
      values_.push_back(e.value);
    }
    row_ptr_.push_back(values_.size());
  }

  void append_row(std::initializer_list<Entry> entries) {
    append_row(std::span<const Entry>(entries.begin(), entries.size()));
  }

  std::size_t rows() const { return row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  std::size_t row_begin(std::size_t i) const { return row_ptr_[i]; }
  std::size_t row_end(std::size_t i) const { return row_ptr_[i + 1]; }
  std::size_t col(std::size_t k) const { return col_idx_[k]; }
  double value(std::size_t k) const { return values_[k]; }
  double& value(std::size_t k) { return values_[k]; }
  std::span<const double> values() const { return values_; }

  /// out = A x
  void multiply(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < rows(); ++i) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      out[i] = s;
    }
  }

  /// out = A^T z
  void multiply_transpose(std::span<const double> z, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i) {
      const double zi = z[i];
      if (zi == 0.0) continue;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) out[col_idx_[k]] += values_[k] * zi;
    }
  }

  /// Matrix with only the listed rows, in the given order.
  CsrMatrix select_rows(std::span<const std::size_t> keep) const {
    CsrMatrix out(cols_);
    std::vector<Entry> row;
    for (std::size_t i : keep) {
      row.clear();
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) row.push_back({col_idx_[k], values_[k]});
      out.append_row(row);
    }
    return out;
  }

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace drorecode
