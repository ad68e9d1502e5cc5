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

#include "sharedmf/matrix.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <unordered_set>
#include <utility>

#include "sharedmf/errors.hpp"

namespace sharedmf {

FactorMatrix::FactorMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

FactorMatrix::FactorMatrix(std::size_t rows, std::size_t cols,
                           std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("factor matrix data length " +
                     std::to_string(data_.size()) + " != " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

std::vector<double> FactorMatrix::column(std::size_t c) const {
  if (c >= cols_) throw BoundsError("column index out of range");
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

FactorMatrix FactorMatrix::row_block(std::size_t begin,
                                     std::size_t count) const {
  if (begin + count > rows_) throw BoundsError("row block out of range");
  std::vector<double> out(data_.begin() + begin * cols_,
                          data_.begin() + (begin + count) * cols_);
  return FactorMatrix(count, cols_, std::move(out));
}

double FactorMatrix::squared_norm() const noexcept {
  double acc = 0.0;
  for (double x : data_) acc += x * x;
  return acc;
}

double FactorMatrix::frobenius_norm() const noexcept {
  return std::sqrt(squared_norm());
}

bool FactorMatrix::all_finite() const noexcept {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<std::size_t, std::size_t>& p) const {
    return std::hash<std::size_t>()(p.first * 0x9E3779B97F4A7C15ULL ^ p.second);
  }
};

}  // namespace

RatingMatrix::RatingMatrix(std::size_t n_users, std::size_t n_items,
                           std::vector<Rating> entries)
    : n_users_(n_users), n_items_(n_items), entries_(std::move(entries)) {
  std::unordered_set<std::pair<std::size_t, std::size_t>, PairHash> seen;
  seen.reserve(entries_.size());
  for (const Rating& r : entries_) {
    if (r.user >= n_users_ || r.item >= n_items_) {
      throw BoundsError("rating (" + std::to_string(r.user) + ", " +
                        std::to_string(r.item) + ") outside " +
                        std::to_string(n_users_) + "x" +
                        std::to_string(n_items_));
    }
    if (!seen.emplace(r.user, r.item).second) {
      throw ConfigError("duplicate rating for (" + std::to_string(r.user) +
                        ", " + std::to_string(r.item) + ")");
    }
  }
}

double RatingMatrix::mean_rating() const {
  if (entries_.empty()) throw DegenerateInputError("mean of empty ratings");
  double acc = 0.0;
  for (const Rating& r : entries_) acc += r.value;
  return acc / static_cast<double>(entries_.size());
}

}  // namespace sharedmf
