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
#include <functional>
#include <span>
#include <vector>

#include "sharedmf/matrix.hpp"

namespace sharedmf {

/// Hyperparameters for full-batch gradient descent on the MF objective.
struct TrainConfig {
  std::size_t dim = 100;
  double learning_rate = 1e-2;
  double reg_user = 1e-3;
  double reg_item = 1e-3;
  // Training stops once the Frobenius norm of the item gradient drops
  // below this value.
  double stop_threshold = 1e-4;
  std::size_t max_epochs = 100;
  std::uint64_t init_seed = 0;

  // Throws ConfigError when an invariant does not hold.
  void validate() const;
};

double predict(const FactorMatrix& users, const FactorMatrix& items,
               std::size_t user, std::size_t item);

// Sum of squared residuals over observed entries.
double squared_error(const FactorMatrix& users, const FactorMatrix& items,
                     const RatingMatrix& ratings);

/// Monitoring loss: mean squared residual over observed entries plus
/// reg_user * ||U||^2 + reg_item * ||V||^2. Throws DegenerateInputError on
/// an empty rating set.
double loss(const FactorMatrix& users, const FactorMatrix& items,
            const RatingMatrix& ratings, double reg_user, double reg_item);

/// Unnormalized objective sum(r - <u,v>)^2 + reg_user ||U||^2 +
/// reg_item ||V||^2. grad_user/grad_item are its exact partial derivatives.
double objective(const FactorMatrix& users, const FactorMatrix& items,
                 const RatingMatrix& ratings, double reg_user,
                 double reg_item);

/// -2 * (masked residual) * V^T + 2 * reg_user * U.
FactorMatrix grad_user(const FactorMatrix& users, const FactorMatrix& items,
                       const RatingMatrix& ratings, double reg_user);

/// -2 * U^T * (masked residual) + reg_weight * 2 * reg_item * V.
///
/// With T sources each passing reg_weight = 1/T the server-side sum carries
/// the item regularizer exactly once. reg_weight must lie in (0, 1].
FactorMatrix grad_item(const FactorMatrix& users, const FactorMatrix& items,
                       const RatingMatrix& ratings, double reg_item,
                       double reg_weight = 1.0);

/// Returns m - step * g.
FactorMatrix apply_update(const FactorMatrix& m, const FactorMatrix& g,
                          double step);

/// User rows drawn uniformly from [-1/sqrt(d), 1/sqrt(d)]. Each row is
/// seeded by its global user id, so any partition of the users produces the
/// same rows as the pooled initialization.
FactorMatrix init_user_profiles(std::span<const std::size_t> global_users,
                                std::size_t dim, std::uint64_t seed);
FactorMatrix init_user_profiles(std::size_t n_users, std::size_t dim,
                                std::uint64_t seed);
FactorMatrix init_item_profiles(std::size_t dim, std::size_t n_items,
                                std::uint64_t seed);

struct CentralizedResult {
  FactorMatrix users;
  FactorMatrix items;
  // loss_history[e] is the loss at the parameters entering epoch e.
  std::vector<double> loss_history;
  std::size_t epochs_run = 0;
  bool converged = false;
};

using EpochObserver = std::function<void(
    std::size_t epoch, const FactorMatrix& users, const FactorMatrix& items)>;

/// Single-process full-batch trainer. Serves as the reference for the
/// distributed modes. Throws DivergenceError if any parameter becomes
/// non-finite.
CentralizedResult train_centralized(const RatingMatrix& ratings,
                                    const TrainConfig& cfg,
                                    const EpochObserver& observer = {});

}  // namespace sharedmf
