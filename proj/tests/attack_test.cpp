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

#include "sharedmf/attack.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sharedmf/errors.hpp"
#include "sharedmf/mf.hpp"
#include "sharedmf/protocol.hpp"
#include "test_util.hpp"

namespace sharedmf {
namespace {

using testing::random_matrix;

TEST(RecoverResidualTest, Examples) {
  const std::vector<double> u{1, 0}, g{-1, 0};
  EXPECT_DOUBLE_EQ(recover_residual(g, u, 0), 0.5);
  const std::vector<double> zero{0, 0};
  EXPECT_EQ(recover_residual(zero, u, 0), 0.0);
}

TEST(RecoverResidualTest, Errors) {
  const std::vector<double> u{1, 1e-10}, g{-1, 0};
  EXPECT_THROW(recover_residual(g, u, 1), IllConditionedError);
  EXPECT_THROW(recover_residual(g, u, 2), BoundsError);
  const std::vector<double> short_g{-1};
  EXPECT_THROW(recover_residual(short_g, u, 0), ShapeError);
}

TEST(RecoverRatingTest, Examples) {
  const std::vector<double> u{1, 1}, v{1, 2}, g{-2, -2};
  EXPECT_DOUBLE_EQ(recover_rating(g, u, v, 0), 4.0);
  EXPECT_DOUBLE_EQ(recover_rating(g, u, v, 1), 4.0);
  const std::vector<double> zero{0, 0};
  EXPECT_DOUBLE_EQ(recover_rating(zero, u, v, 0), 3.0);
}

TEST(RecoverRatingTest, ForwardGeneratedSingleUser) {
  std::mt19937_64 eng(8);
  const FactorMatrix u = random_matrix(1, 4, eng);
  const FactorMatrix v = random_matrix(4, 7, eng);
  std::vector<Rating> e{{0, 1, 4.0}, {0, 3, 2.0}, {0, 6, 5.0}};
  const RatingMatrix r(1, 7, e);
  const FactorMatrix g = grad_item(u, v, r, 0.0);
  for (const Rating& x : e) {
    const double truth_residual = x.value - predict(u, v, 0, x.item);
    const std::vector<double> col = g.column(x.item);
    EXPECT_NEAR(recover_residual(col, u.row(0), best_pivot(u.row(0))), truth_residual,
                1e-10);
  }
}

TEST(AttackProperties, InversionExactAndConsistentAcrossPivots) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 eng(seed);
    const std::size_t d = 1 + eng() % 8, m = 2 + eng() % 10;
    const FactorMatrix u = random_matrix(1, d, eng);
    const FactorMatrix v = random_matrix(d, m, eng);
    std::vector<Rating> e;
    std::uniform_real_distribution<double> rating(1.0, 5.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (eng() % 2) e.push_back({0, j, rating(eng)});
    }
    const RatingMatrix r(1, m, e);
    const FactorMatrix g = grad_item(u, v, r, 0.0);
    for (const Rating& x : e) {
      const std::vector<double> col = g.column(x.item);
      const std::vector<double> vj = v.column(x.item);
      for (std::size_t k = 0; k < d; ++k) {
        if (std::fabs(u(0, k)) <= 1e-6) continue;
        ASSERT_NEAR(recover_rating(col, u.row(0), vj, k), x.value, 1e-10)
            << "seed " << seed << " k " << k;
      }
    }
  }
}

// A capture of what a single-user source uploads in round 0.
struct Capture {
  std::vector<Frame> frames;
  std::vector<double> user;
  std::map<std::size_t, double> truth;
  ProtocolConfig cfg;
};

Capture capture_round0(Mode mode, double reg_item, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  const std::size_t m = 20;
  std::vector<Rating> e;
  Capture c;
  for (std::size_t j = 0; j < m; ++j) {
    const double r = static_cast<double>(1 + eng() % 5);
    e.push_back({0, j, r});
    c.truth[j] = r;
  }
  for (std::size_t i = 1; i < 4; ++i) {
    for (std::size_t j = 0; j < m; j += 1 + i) e.push_back({i, j, 3.0});
  }
  const RatingMatrix all(4, m, e);
  std::vector<SourceData> parts = partition_user_blocks(all, 2, 1);
  // partition_user_blocks gives source 0 users [0, 1); the rest go to 1.
  c.cfg.sources = 2;
  c.cfg.mode = mode;
  c.cfg.train.dim = 5;
  c.cfg.train.reg_item = reg_item;
  c.cfg.train.max_epochs = 2;
  c.cfg.train.init_seed = seed;
  c.cfg.share_seed = seed + 100;
  const FactorMatrix u0 = init_user_profiles(parts[0].global_users, 5, seed);
  c.user.assign(u0.row(0).begin(), u0.row(0).end());
  RunHooks hooks;
  hooks.on_network = [&](Network& net) {
    for (const std::string& name : {Network::up_name(0), Network::down_name(0)}) {
      net.find(name)->set_tap([&](std::span<const std::uint8_t> b) {
        std::size_t used = 0;
        c.frames.push_back(parse_frame(b, used));
      });
    }
  };
  run_training(c.cfg, parts, hooks);
  return c;
}

AttackKnowledge knowledge_for(const Capture& c) {
  AttackKnowledge k;
  k.target_sender = 0;
  k.round = 0;
  k.user_profile = c.user;
  k.gradient_scale = c.cfg.train.learning_rate;
  k.reg_weight = c.cfg.reg_weight();
  k.reg_item = c.cfg.train.reg_item;
  k.truth = c.truth;
  return k;
}

TEST(AttackTraceTest, PlainCaptureLeaksRatings) {
  const Capture c = capture_round0(Mode::kPlain, 0.0, 4);
  const AttackReport rep = attack_trace(c.frames, knowledge_for(c));
  EXPECT_EQ(rep.frame_type, MsgType::kPlainGradient);
  EXPECT_EQ(rep.recovered.size(), 20u);
  EXPECT_LT(rep.mean_abs_error, 1e-4);
  for (const RecoveredRating& r : rep.recovered) EXPECT_NEAR(r.recovered, r.truth, 1e-4);
}

TEST(AttackTraceTest, StripsItemRegularizer) {
  const Capture c = capture_round0(Mode::kPlain, 0.05, 5);
  AttackKnowledge k = knowledge_for(c);
  EXPECT_LT(attack_trace(c.frames, k).mean_abs_error, 1e-4);
  // Forgetting the regularizer biases every recovered rating.
  k.reg_item = 0.0;
  EXPECT_GT(attack_trace(c.frames, k).mean_abs_error, 1e-3);
}

TEST(AttackTraceTest, SharedCaptureResists) {
  const Capture c = capture_round0(Mode::kShared, 0.0, 6);
  const AttackReport rep = attack_trace(c.frames, knowledge_for(c));
  EXPECT_EQ(rep.frame_type, MsgType::kHybridGradient);
  EXPECT_GE(rep.mean_abs_error, 0.5);
}

TEST(AttackTraceTest, ExplicitItemsAndDefaultRound) {
  const Capture c = capture_round0(Mode::kPlain, 0.0, 7);
  AttackKnowledge k = knowledge_for(c);
  k.round.reset();
  k.items = init_item_profiles(5, 20, 7);
  std::vector<Frame> uploads;
  for (const Frame& f : c.frames) {
    if (f.type == MsgType::kPlainGradient) uploads.push_back(f);
  }
  const AttackReport rep = attack_trace(uploads, k);
  EXPECT_EQ(rep.round, 0u);
  EXPECT_LT(rep.mean_abs_error, 1e-4);
  EXPECT_LT(rep.pivot_spread, 1e-4);
  EXPECT_EQ(rep.nonzero_columns, 20u);
}

TEST(AttackTraceTest, EmptyTrace) {
  AttackKnowledge k;
  k.user_profile = {1.0};
  EXPECT_THROW(attack_trace({}, k), EmptyTraceError);
  const std::vector<Frame> only_model{model_frame(0, FactorMatrix(1, 2))};
  EXPECT_THROW(attack_trace(only_model, k), EmptyTraceError);
  // Gradient present but no model for its round and none supplied.
  const std::vector<Frame> only_grad{
      block_frame(MsgType::kPlainGradient, 3, 0, FixedPointBlock(1, 2, 24))};
  EXPECT_THROW(attack_trace(only_grad, k), EmptyTraceError);
}

}  // namespace
}  // namespace sharedmf
