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
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include "sharedmf/matrix.hpp"

namespace sharedmf {

/// Ratings plus the raw MovieLens ids behind each dense index.
struct LabeledRatings {
  RatingMatrix ratings;
  std::vector<std::int64_t> user_ids;  // dense index -> raw id
  std::vector<std::int64_t> item_ids;
  std::size_t duplicate_warnings = 0;
};

/// Reads the ml-100k `u.data` layout: user, item, rating, timestamp per line,
/// whitespace separated. Raw ids are compacted in ascending order. A repeated
/// (user, item) pair keeps the last rating and bumps duplicate_warnings.
///
/// Throws ParseError (with line number) on malformed lines and
/// DegenerateInputError when no ratings are present.
LabeledRatings parse_movielens(std::istream& in);
LabeledRatings load_movielens(const std::filesystem::path& path);

/// Writes `u.data` lines with 1-based ids and a zero timestamp.
void save_movielens(std::ostream& out, const RatingMatrix& ratings);

/// CSV with header `user,item,rating` and 0-based indices.
void write_ratings_csv(std::ostream& out, const RatingMatrix& ratings);

struct SplitSpec {
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

/// Entry-level random split. Both halves keep the full n_users x n_items
/// shape. Throws ConfigError if the fraction is outside (0, 1).
std::pair<RatingMatrix, RatingMatrix> split_train_test(const RatingMatrix& r,
                                                       const SplitSpec& spec);

/// Ratings held by one data source, re-indexed to local user rows.
/// global_users[k] is the pooled index of local user k.
struct SourceData {
  RatingMatrix ratings;
  std::vector<std::size_t> global_users;
};

/// Seeded shuffle of user ids, then round-robin assignment to T sources.
/// Local rows follow ascending global id. Every source keeps all items.
std::vector<SourceData> partition_users(const RatingMatrix& r,
                                        std::size_t sources,
                                        std::uint64_t seed);

/// Source t receives users [t * per_source, (t + 1) * per_source).
std::vector<SourceData> partition_user_blocks(const RatingMatrix& r,
                                              std::size_t sources,
                                              std::size_t per_source);

/// Merges partitions back into one matrix indexed by global user id.
RatingMatrix pool_sources(const std::vector<SourceData>& parts,
                          std::size_t n_users);

/// Keeps users [0, n_users) and items [0, n_items) by dense index.
RatingMatrix slice(const RatingMatrix& r, std::size_t n_users,
                   std::size_t n_items);

struct SyntheticRatings {
  RatingMatrix ratings;
  FactorMatrix users;  // n x d_true
  FactorMatrix items;  // d_true x m
};

/// Planted low-rank ratings <u_i, v_j> + N(0, noise_sigma^2) on a uniformly
/// random round(fill_fraction * n * m) subset of cells. Planted entries are
/// N(0, 1/sqrt(d_true)) so noiseless ratings have unit variance.
SyntheticRatings synth_ratings(std::size_t n_users, std::size_t n_items,
                               std::size_t d_true, double noise_sigma,
                               double fill_fraction, std::uint64_t seed);

double rmse(const FactorMatrix& users, const FactorMatrix& items,
            const RatingMatrix& test);

/// RMSE on `test` of the constant predictor mean(train).
double global_mean_rmse(const RatingMatrix& train, const RatingMatrix& test);

}  // namespace sharedmf
