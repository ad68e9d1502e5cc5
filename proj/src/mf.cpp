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

#include "sharedmf/mf.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sharedmf/errors.hpp"

namespace sharedmf {

namespace {

std::string shape_str(const FactorMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_factors(const FactorMatrix& users, const FactorMatrix& items) {
  if (users.cols() != items.rows()) {
    throw ShapeError("user profile " + shape_str(users) +
                     " incompatible with item profile " + shape_str(items));
  }
}

void check_ratings(const FactorMatrix& users, const FactorMatrix& items,
                   const RatingMatrix& ratings) {
  check_factors(users, items);
  if (ratings.n_users() != users.rows() || ratings.n_items() != items.cols()) {
    throw ShapeError("ratings " + std::to_string(ratings.n_users()) + "x" +
                     std::to_string(ratings.n_items()) +
                     " do not match profiles " + shape_str(users) + " / " +
                     shape_str(items));
  }
}

// <u_i, v_j> without bounds checks; V is d x m so v_j is strided.
inline double dot_unchecked(const FactorMatrix& users,
                            const FactorMatrix& items, std::size_t i,
                            std::size_t j) {
  const std::size_t d = users.cols();
  const std::size_t m = items.cols();
  const double* u = users.row(i).data();
  const double* v = items.data().data() + j;
  double acc = 0.0;
  for (std::size_t k = 0; k < d; ++k) acc += u[k] * v[k * m];
  return acc;
}

constexpr std::uint64_t kUserTag = 0x5553455250524f46ULL;  // "USERPROF"
constexpr std::uint64_t kItemTag = 0x4954454d50524f46ULL;  // "ITEMPROF"

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t tag,
                            std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag),
                    static_cast<std::uint32_t>(tag >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

// Uniform in [-bound, bound] from the top 53 bits; avoids the
// implementation-defined std::uniform_real_distribution.
double uniform_sym(std::mt19937_64& eng, double bound) {
  const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * bound;
}

}  // namespace

void TrainConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(reg_user >= 0.0) || !(reg_item >= 0.0)) {
    throw ConfigError("regularization weights must be >= 0");
  }
  if (!(stop_threshold > 0.0)) throw ConfigError("stop threshold must be > 0");
}

double predict(const FactorMatrix& users, const FactorMatrix& items,
               std::size_t user, std::size_t item) {
  check_factors(users, items);
  if (user >= users.rows()) throw BoundsError("user index out of range");
  if (item >= items.cols()) throw BoundsError("item index out of range");
  return dot_unchecked(users, items, user, item);
}

double squared_error(const FactorMatrix& users, const FactorMatrix& items,
                     const RatingMatrix& ratings) {
  check_ratings(users, items, ratings);
  double acc = 0.0;
  for (const Rating& r : ratings.entries()) {
    const double e = r.value - dot_unchecked(users, items, r.user, r.item);
    acc += e * e;
  }
  return acc;
}

double loss(const FactorMatrix& users, const FactorMatrix& items,
            const RatingMatrix& ratings, double reg_user, double reg_item) {
  if (ratings.empty()) throw DegenerateInputError("loss of empty rating set");
  const double sse = squared_error(users, items, ratings);
  return sse / static_cast<double>(ratings.nnz()) +
         reg_user * users.squared_norm() + reg_item * items.squared_norm();
}

double objective(const FactorMatrix& users, const FactorMatrix& items,
                 const RatingMatrix& ratings, double reg_user,
                 double reg_item) {
  return squared_error(users, items, ratings) +
         reg_user * users.squared_norm() + reg_item * items.squared_norm();
}

FactorMatrix grad_user(const FactorMatrix& users, const FactorMatrix& items,
                       const RatingMatrix& ratings, double reg_user) {
  check_ratings(users, items, ratings);
  const std::size_t d = users.cols();
  const std::size_t m = items.cols();
  FactorMatrix g(users.rows(), d);
  const double* v = items.data().data();
  for (const Rating& r : ratings.entries()) {
    const double e = r.value - dot_unchecked(users, items, r.user, r.item);
    double* gu = g.row(r.user).data();
    for (std::size_t k = 0; k < d; ++k) gu[k] += -2.0 * e * v[k * m + r.item];
  }
  auto gd = g.data();
  auto ud = users.data();
  for (std::size_t x = 0; x < gd.size(); ++x) gd[x] += 2.0 * reg_user * ud[x];
  return g;
}

FactorMatrix grad_item(const FactorMatrix& users, const FactorMatrix& items,
                       const RatingMatrix& ratings, double reg_item,
                       double reg_weight) {
  check_ratings(users, items, ratings);
  if (!(reg_weight > 0.0 && reg_weight <= 1.0)) {
    throw ConfigError("reg_weight must lie in (0, 1]");
  }
  const std::size_t d = users.cols();
  const std::size_t m = items.cols();
  FactorMatrix g(d, m);
  double* gv = g.data().data();
  for (const Rating& r : ratings.entries()) {
    const double e = r.value - dot_unchecked(users, items, r.user, r.item);
    const double* u = users.row(r.user).data();
    for (std::size_t k = 0; k < d; ++k) gv[k * m + r.item] += -2.0 * e * u[k];
  }
  const double reg = reg_weight * 2.0 * reg_item;
  auto vd = items.data();
  for (std::size_t x = 0; x < vd.size(); ++x) gv[x] += reg * vd[x];
  return g;
}

FactorMatrix apply_update(const FactorMatrix& m, const FactorMatrix& g,
                          double step) {
  if (m.rows() != g.rows() || m.cols() != g.cols()) {
    throw ShapeError("update " + shape_str(g) + " does not match " +
                     shape_str(m));
  }
  FactorMatrix out = m;
  auto od = out.data();
  auto gd = g.data();
  for (std::size_t x = 0; x < od.size(); ++x) od[x] -= step * gd[x];
  return out;
}

FactorMatrix init_user_profiles(std::span<const std::size_t> global_users,
                                std::size_t dim, std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  FactorMatrix u(global_users.size(), dim);
  for (std::size_t r = 0; r < global_users.size(); ++r) {
    auto eng = make_engine(seed, kUserTag, global_users[r]);
    for (double& x : u.row(r)) x = uniform_sym(eng, bound);
  }
  return u;
}

FactorMatrix init_user_profiles(std::size_t n_users, std::size_t dim,
                                std::uint64_t seed) {
  std::vector<std::size_t> ids(n_users);
  for (std::size_t i = 0; i < n_users; ++i) ids[i] = i;
  return init_user_profiles(ids, dim, seed);
}

FactorMatrix init_item_profiles(std::size_t dim, std::size_t n_items,
                                std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  FactorMatrix v(dim, n_items);
  auto eng = make_engine(seed, kItemTag, 0);
  for (double& x : v.data()) x = uniform_sym(eng, bound);
  return v;
}

CentralizedResult train_centralized(const RatingMatrix& ratings,
                                    const TrainConfig& cfg,
                                    const EpochObserver& observer) {
  cfg.validate();
  if (ratings.empty()) throw DegenerateInputError("no ratings to train on");

  CentralizedResult res;
  res.users = init_user_profiles(ratings.n_users(), cfg.dim, cfg.init_seed);
  res.items = init_item_profiles(cfg.dim, ratings.n_items(), cfg.init_seed);

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    res.loss_history.push_back(
        loss(res.users, res.items, ratings, cfg.reg_user, cfg.reg_item));
    // Both gradients are taken at the parameters entering the epoch.
    FactorMatrix gu = grad_user(res.users, res.items, ratings, cfg.reg_user);
    FactorMatrix gv = grad_item(res.users, res.items, ratings, cfg.reg_item);
    res.users = apply_update(res.users, gu, cfg.learning_rate);
    res.items = apply_update(res.items, gv, cfg.learning_rate);
    res.epochs_run = epoch + 1;
    if (!res.users.all_finite() || !res.items.all_finite()) {
      throw DivergenceError(epoch, "non-finite profile values");
    }
    if (observer) observer(epoch, res.users, res.items);
    if (gv.frobenius_norm() < cfg.stop_threshold) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace sharedmf
