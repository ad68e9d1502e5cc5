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

#include "sharedmf/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "sharedmf/errors.hpp"
#include "sharedmf/mf.hpp"
#include "test_util.hpp"

namespace sharedmf {
namespace {

using testing::random_matrix;
using testing::random_ratings;

using Triple = std::tuple<std::size_t, std::size_t, double>;

std::multiset<Triple> triples(const RatingMatrix& r) {
  std::multiset<Triple> s;
  for (const Rating& e : r.entries()) s.emplace(e.user, e.item, e.value);
  return s;
}

LabeledRatings parse(const std::string& text) {
  std::istringstream in(text);
  return parse_movielens(in);
}

TEST(LoadTest, FirstRecordOfMovieLens) {
  const LabeledRatings l = parse("196\t242\t3\t881250949\n");
  ASSERT_EQ(l.ratings.nnz(), 1u);
  EXPECT_EQ(l.ratings.n_users(), 1u);
  EXPECT_EQ(l.ratings.n_items(), 1u);
  EXPECT_EQ(l.user_ids, std::vector<std::int64_t>{196});
  EXPECT_EQ(l.item_ids, std::vector<std::int64_t>{242});
  const Rating& e = l.ratings.entries()[0];
  EXPECT_EQ(e.user, 0u);
  EXPECT_EQ(e.item, 0u);
  EXPECT_EQ(e.value, 3.0);
}

TEST(LoadTest, CompactsIdsInAscendingOrder) {
  const LabeledRatings l = parse("7 30 4 0\n2 10 5 0\n7 10 1 0\n");
  EXPECT_EQ(l.user_ids, (std::vector<std::int64_t>{2, 7}));
  EXPECT_EQ(l.item_ids, (std::vector<std::int64_t>{10, 30}));
  EXPECT_EQ(triples(l.ratings),
            (std::multiset<Triple>{{1, 1, 4.0}, {0, 0, 5.0}, {1, 0, 1.0}}));
}

TEST(LoadTest, EmptyFileRejected) {
  EXPECT_THROW(parse(""), DegenerateInputError);
  EXPECT_THROW(parse("\n\n"), DegenerateInputError);
}

TEST(LoadTest, MalformedLineNamesIt) {
  try {
    parse("1\t2\t3\t4\n1\t3\tx\t4\n");
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("1 2 3\n"), ParseError);
  EXPECT_THROW(parse("1 2 3 4 5\n"), ParseError);
}

TEST(LoadTest, DuplicateKeepsLast) {
  const LabeledRatings l = parse("1 1 2 0\n1 1 5 9\n2 1 3 0\n");
  EXPECT_EQ(l.duplicate_warnings, 1u);
  EXPECT_EQ(triples(l.ratings), (std::multiset<Triple>{{0, 0, 5.0}, {1, 0, 3.0}}));
}

TEST(LoadTest, MissingFile) {
  EXPECT_THROW(load_movielens("/nonexistent/u.data"), Error);
}

TEST(LoadTest, SaveLoadRoundtrip) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 eng(seed);
    const std::size_t n = 2 + eng() % 8, m = 2 + eng() % 8;
    const RatingMatrix r = random_ratings(n, m, 1 + eng() % (n * m), eng);
    std::stringstream ss;
    save_movielens(ss, r);
    const LabeledRatings back = parse_movielens(ss);
    // Saved ids are 1-based; map the compacted indices back through them.
    std::multiset<Triple> restored;
    for (const Rating& e : back.ratings.entries()) {
      restored.emplace(static_cast<std::size_t>(back.user_ids[e.user] - 1),
                       static_cast<std::size_t>(back.item_ids[e.item] - 1), e.value);
    }
    EXPECT_EQ(restored, triples(r)) << "seed " << seed;
  }
}

TEST(CsvTest, HeaderAndZeroBasedRows) {
  const RatingMatrix r(2, 3, {{1, 2, 4.5}, {0, 0, 1.0}});
  std::ostringstream out;
  write_ratings_csv(out, r);
  EXPECT_EQ(out.str(), "user,item,rating\n1,2,4.5\n0,0,1\n");
}

TEST(SplitTest, SizeWithinTolerance) {
  std::mt19937_64 eng(1);
  const RatingMatrix r = random_ratings(50, 40, 1000, eng);
  const auto [train, test] = split_train_test(r, {0.7, 3});
  EXPECT_GE(train.nnz(), 690u);
  EXPECT_LE(train.nnz(), 710u);
  EXPECT_EQ(train.nnz() + test.nnz(), 1000u);
  EXPECT_EQ(train.n_users(), 50u);
  EXPECT_EQ(test.n_items(), 40u);
}

TEST(SplitTest, PartitionAndDeterminism) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 eng(seed);
    const RatingMatrix r = random_ratings(20, 20, 1 + eng() % 300, eng);
    const auto [a, b] = split_train_test(r, {0.7, seed});
    const auto [a2, b2] = split_train_test(r, {0.7, seed});
    EXPECT_EQ(triples(a), triples(a2));
    EXPECT_EQ(triples(b), triples(b2));
    std::multiset<Triple> both = triples(a);
    for (const Triple& t : triples(b)) both.insert(t);
    EXPECT_EQ(both, triples(r));
    std::set<std::pair<std::size_t, std::size_t>> cells;
    for (const Rating& e : a.entries()) cells.emplace(e.user, e.item);
    for (const Rating& e : b.entries()) EXPECT_FALSE(cells.contains({e.user, e.item}));
  }
}

TEST(SplitTest, DifferentSeedsDiffer) {
  std::mt19937_64 eng(1);
  const RatingMatrix r = random_ratings(20, 20, 200, eng);
  EXPECT_NE(triples(split_train_test(r, {0.7, 1}).first),
            triples(split_train_test(r, {0.7, 2}).first));
}

TEST(SplitTest, BadFractionRejected) {
  std::mt19937_64 eng(1);
  const RatingMatrix r = random_ratings(5, 5, 10, eng);
  EXPECT_THROW(split_train_test(r, {0.0, 1}), ConfigError);
  EXPECT_THROW(split_train_test(r, {1.0, 1}), ConfigError);
  EXPECT_THROW(split_train_test(RatingMatrix(2, 2, {}), {0.5, 1}), DegenerateInputError);
}

TEST(PartitionTest, SingleSourceIsWholeMatrix) {
  std::mt19937_64 eng(4);
  const RatingMatrix r = random_ratings(9, 7, 30, eng);
  const auto parts = partition_users(r, 1, 5);
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(triples(parts[0].ratings), triples(r));
  EXPECT_EQ(parts[0].global_users.size(), 9u);
}

TEST(PartitionTest, OneUserPerSource) {
  std::mt19937_64 eng(4);
  const RatingMatrix r = random_ratings(6, 7, 30, eng);
  const auto parts = partition_users(r, 6, 5);
  for (const SourceData& p : parts) {
    EXPECT_EQ(p.ratings.n_users(), 1u);
    EXPECT_EQ(p.ratings.n_items(), 7u);
  }
  EXPECT_THROW(partition_users(r, 7, 5), ConfigError);
  EXPECT_THROW(partition_users(r, 0, 5), ConfigError);
}

TEST(PartitionProperties, DisjointCoverAndPoolRoundtrip) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 eng(seed);
    const std::size_t n = 2 + eng() % 20, t = 1 + eng() % n;
    const RatingMatrix r = random_ratings(n, 6, eng() % (n * 6), eng);
    const auto parts = partition_users(r, t, seed);
    std::set<std::size_t> users;
    std::size_t total = 0;
    for (const SourceData& p : parts) {
      EXPECT_TRUE(std::is_sorted(p.global_users.begin(), p.global_users.end()));
      for (std::size_t u : p.global_users) EXPECT_TRUE(users.insert(u).second);
      total += p.global_users.size();
    }
    EXPECT_EQ(total, n);
    EXPECT_EQ(users.size(), n);
    EXPECT_EQ(triples(pool_sources(parts, n)), triples(r));
    // Round-robin keeps source sizes within one of each other.
    auto [lo, hi] = std::minmax_element(parts.begin(), parts.end(), [](auto& a, auto& b) {
      return a.global_users.size() < b.global_users.size();
    });
    EXPECT_LE(hi->global_users.size() - lo->global_users.size(), 1u);
  }
}

TEST(PartitionTest, UserBlocks) {
  std::mt19937_64 eng(2);
  const RatingMatrix r = random_ratings(10, 4, 25, eng);
  const auto parts = partition_user_blocks(r, 3, 3);
  EXPECT_EQ(parts[1].global_users, (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_THROW(partition_user_blocks(r, 4, 3), ConfigError);
}

TEST(SliceTest, KeepsLeadingIndices) {
  const RatingMatrix r(3, 3, {{0, 0, 1}, {2, 0, 2}, {1, 2, 3}, {1, 1, 4}});
  EXPECT_EQ(triples(slice(r, 2, 2)), (std::multiset<Triple>{{0, 0, 1.0}, {1, 1, 4.0}}));
}

TEST(SynthTest, NoiselessLowRankIsRecovered) {
  // 30 x 20, rank 3, every cell observed. Measured: converges in 188
  // epochs to a loss near 4e-27 at lr 0.01.
  const auto s = synth_ratings(30, 20, 3, 0.0, 1.0, 5);
  EXPECT_EQ(s.ratings.nnz(), 600u);
  TrainConfig cfg;
  cfg.dim = 3;
  cfg.learning_rate = 0.01;
  cfg.reg_user = cfg.reg_item = 0.0;
  cfg.max_epochs = 5000;
  cfg.stop_threshold = 1e-12;
  cfg.init_seed = 1;
  const auto res = train_centralized(s.ratings, cfg);
  EXPECT_LT(loss(res.users, res.items, s.ratings, 0, 0), 1e-6);
}

TEST(SynthTest, ExactFillAndPlantedValues) {
  const auto s = synth_ratings(10, 8, 2, 0.0, 0.25, 3);
  EXPECT_EQ(s.ratings.nnz(), 20u);
  for (const Rating& e : s.ratings.entries()) {
    EXPECT_NEAR(e.value, predict(s.users, s.items, e.user, e.item), 1e-12);
  }
}

TEST(SynthTest, Validation) {
  EXPECT_THROW(synth_ratings(5, 5, 2, 0.1, 0.0, 1), ConfigError);
  EXPECT_THROW(synth_ratings(5, 5, 2, 0.1, 1.5, 1), ConfigError);
  EXPECT_THROW(synth_ratings(0, 5, 2, 0.1, 0.5, 1), ConfigError);
  EXPECT_THROW(synth_ratings(5, 5, 2, -1.0, 0.5, 1), ConfigError);
}

TEST(SynthTest, Deterministic) {
  const auto a = synth_ratings(12, 9, 3, 0.2, 0.4, 8);
  const auto b = synth_ratings(12, 9, 3, 0.2, 0.4, 8);
  EXPECT_EQ(triples(a.ratings), triples(b.ratings));
  EXPECT_EQ(a.users, b.users);
  EXPECT_NE(triples(a.ratings), triples(synth_ratings(12, 9, 3, 0.2, 0.4, 9).ratings));
}

TEST(RmseTest, Identities) {
  std::mt19937_64 eng(3);
  const FactorMatrix u = random_matrix(4, 2, eng), v = random_matrix(2, 5, eng);
  std::vector<Rating> perfect;
  for (std::size_t i = 0; i < 4; ++i) perfect.push_back({i, i, predict(u, v, i, i)});
  EXPECT_NEAR(rmse(u, v, RatingMatrix(4, 5, perfect)), 0.0, 1e-15);

  const RatingMatrix train(1, 2, {{0, 0, 2.0}});
  const RatingMatrix test(1, 2, {{0, 1, 4.5}});
  EXPECT_DOUBLE_EQ(global_mean_rmse(train, test), 2.5);

  const RatingMatrix r = random_ratings(4, 5, 9, eng);
  EXPECT_NEAR(rmse(u, v, r), std::sqrt(loss(u, v, r, 0, 0)), 1e-12);
  EXPECT_THROW(rmse(u, v, RatingMatrix(4, 5, {})), DegenerateInputError);
}

TEST(RatingMatrixTest, Validation) {
  EXPECT_THROW(RatingMatrix(2, 2, {{2, 0, 1.0}}), BoundsError);
  EXPECT_THROW(RatingMatrix(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), ConfigError);
  EXPECT_DOUBLE_EQ(RatingMatrix(2, 2, {{0, 0, 1.0}, {1, 1, 2.0}}).mean_rating(), 1.5);
}

}  // namespace
}  // namespace sharedmf
