// Copyright 2026 The SharedMF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sharedmf {

/// Dense row-major matrix of doubles. Used for both profile matrices:
/// users are n x d (one row per user), items are d x m (one column per item).
class FactorMatrix {
 public:
  FactorMatrix() = default;
  FactorMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  FactorMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double> column(std::size_t c) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  // Row slice [begin, begin + count).
  FactorMatrix row_block(std::size_t begin, std::size_t count) const;

  double squared_norm() const noexcept;
  double frobenius_norm() const noexcept;
  bool all_finite() const noexcept;

  // Exact (bitwise for finite values) equality.
  friend bool operator==(const FactorMatrix&, const FactorMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Rating {
  std::size_t user = 0;
  std::size_t item = 0;
  double value = 0.0;

  friend bool operator==(const Rating&, const Rating&) = default;
};

/// Sparse observed ratings over an n_users x n_items grid. Each (user, item)
/// pair appears at most once; cells not listed are unobserved.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  // Throws BoundsError for out-of-range indices and ConfigError for
  // duplicate pairs.
  RatingMatrix(std::size_t n_users, std::size_t n_items,
               std::vector<Rating> entries);

  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_items() const noexcept { return n_items_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Rating> entries() const noexcept { return entries_; }

  double mean_rating() const;

  friend bool operator==(const RatingMatrix&, const RatingMatrix&) = default;

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<Rating> entries_;
};

}  // namespace sharedmf
