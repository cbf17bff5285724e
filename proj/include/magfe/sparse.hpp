#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "magfe/errors.hpp"

namespace magfe {

/// Compressed sparse row matrix with sorted column indices per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
               std::vector<double> values)
      : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), values_(std::move(values)) {}

  std::size_t rows() const noexcept { return n_; }
  std::size_t nonzeros() const noexcept { return values_.size(); }
  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> cols() const noexcept { return cols_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double sum = 0.0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) sum += values_[k] * x[cols_[k]];
      y[i] = sum;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(n_);
    multiply(x, y);
    return y;
  }

  double at(std::size_t i, std::size_t j) const {
    const auto begin = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto end = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(begin, end, j);
    return (it != end && *it == j) ? values_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(n_);
    for (std::size_t i = 0; i < n_; ++i) d[i] = at(i, i);
    return d;
  }

  /// max |A_ij - A_ji| relative to max |A_ij|.
  double asymmetry() const {
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        scale = std::max(scale, std::abs(values_[k]));
        diff = std::max(diff, std::abs(values_[k] - at(cols_[k], i)));
      }
    return scale > 0.0 ? diff / scale : 0.0;
  }

  /// x^T A y
  double bilinear(std::span<const double> x, std::span<const double> y) const {
    std::vector<double> ay(n_);
    multiply(y, ay);
    return std::inner_product(x.begin(), x.end(), ay.begin(), 0.0);
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> cols_;
  std::vector<double> values_;
};

/// CSR pattern for a fixed sequence of coordinate-list entries.
///
/// Entries are sorted by (row, col) with a stable sort, so duplicate entries
/// are summed in insertion order and every assembly reproduces the same bits.
class CooPattern {
 public:
  CooPattern() = default;

  CooPattern(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> entries) : n_(n) {
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return entries[a] < entries[b]; });

    slot_.resize(entries.size());
    row_ptr_.assign(n + 1, 0);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& e = entries[order[k]];
      if (e.first >= n || e.second >= n) throw InvalidArgument("CooPattern: index out of range");
      if (k == 0 || e != entries[order[k - 1]]) {
        cols_.push_back(e.second);
        ++row_ptr_[e.first + 1];
      }
      slot_[order[k]] = cols_.size() - 1;
    }
    std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
    // Sum duplicates in insertion order: order[] is stable, so within a slot
    // the entries appear in insertion order.
    sum_order_ = std::move(order);
  }

  std::size_t size() const noexcept { return slot_.size(); }

  /// Builds the matrix from entry values given in insertion order.
  SparseMatrix assemble(std::span<const double> entry_values) const {
    std::vector<double> values(cols_.size(), 0.0);
    for (std::size_t k : sum_order_) values[slot_[k]] += entry_values[k];
    return SparseMatrix(n_, row_ptr_, cols_, std::move(values));
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> cols_;
  std::vector<std::size_t> slot_;
  std::vector<std::size_t> sum_order_;
};

inline SparseMatrix from_triplets(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> entries,
                                  std::span<const double> values) {
  return CooPattern(n, entries).assemble(values);
}

}  // namespace magfe
