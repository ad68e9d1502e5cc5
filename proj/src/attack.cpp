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

#include <algorithm>
#include <cmath>
#include <string>

#include "sharedmf/errors.hpp"
#include "sharedmf/fixed_point.hpp"

namespace sharedmf {

double recover_residual(std::span<const double> gradient_column,
                        std::span<const double> user, std::size_t k) {
  if (gradient_column.size() != user.size()) {
    throw ShapeError("gradient column and user profile differ in length");
  }
  if (k >= user.size()) throw BoundsError("pivot index out of range");
  if (!(std::fabs(user[k]) > kMinPivot)) {
    throw IllConditionedError("user component " + std::to_string(k) +
                              " is too small to divide by");
  }
  return gradient_column[k] / (-2.0 * user[k]);
}

double recover_rating(std::span<const double> gradient_column,
                      std::span<const double> user,
                      std::span<const double> item, std::size_t k) {
  if (item.size() != user.size()) {
    throw ShapeError("item and user profiles differ in length");
  }
  double dot = 0.0;
  for (std::size_t x = 0; x < user.size(); ++x) dot += user[x] * item[x];
  return recover_residual(gradient_column, user, k) + dot;
}

std::size_t best_pivot(std::span<const double> user) {
  if (user.empty()) throw ShapeError("empty user profile");
  std::size_t best = 0;
  for (std::size_t k = 1; k < user.size(); ++k) {
    if (std::fabs(user[k]) > std::fabs(user[best])) best = k;
  }
  return best;
}

AttackReport attack_trace(std::span<const Frame> frames,
                          const AttackKnowledge& knowledge) {
  const Frame* target = nullptr;
  for (const Frame& f : frames) {
    if ((f.type != MsgType::kPlainGradient &&
         f.type != MsgType::kHybridGradient) ||
        f.sender != knowledge.target_sender) {
      continue;
    }
    if (knowledge.round ? f.round == *knowledge.round
                        : (!target || f.round < target->round)) {
      target = &f;
      if (knowledge.round) break;
    }
  }
  if (!target) {
    throw EmptyTraceError("capture has no gradient frame from source " +
                          std::to_string(knowledge.target_sender));
  }

  FactorMatrix items;
  if (knowledge.items) {
    items = *knowledge.items;
  } else {
    const auto it = std::find_if(frames.begin(), frames.end(), [&](const Frame& f) {
      return f.type == MsgType::kModelBroadcast && f.round == target->round;
    });
    if (it == frames.end()) {
      throw EmptyTraceError("capture has no model for round " +
                            std::to_string(target->round));
    }
    items = frame_model(*it);
  }

  const std::size_t d = knowledge.user_profile.size();
  if (target->rows != d || items.rows() != d || items.cols() != target->cols) {
    throw ShapeError("capture shapes do not match the attacker's knowledge");
  }
  if (!(knowledge.gradient_scale != 0.0)) {
    throw ConfigError("gradient scale must be non-zero");
  }

  // The attacker reads the words as they are; an upload that is not a valid
  // encoding still decodes to something.
  const FactorMatrix raw = decode_unchecked(frame_block(*target));
  const std::span<const double> user = knowledge.user_profile;
  const std::size_t pivot = best_pivot(user);

  AttackReport rep;
  rep.round = target->round;
  rep.sender = target->sender;
  rep.frame_type = target->type;

  auto column_of = [&](std::size_t j) {
    std::vector<double> g(d);
    for (std::size_t k = 0; k < d; ++k) {
      g[k] = raw(k, j) / knowledge.gradient_scale -
             knowledge.reg_weight * 2.0 * knowledge.reg_item * items(k, j);
    }
    return g;
  };

  for (std::size_t j = 0; j < raw.cols(); ++j) {
    for (std::size_t k = 0; k < d; ++k) {
      if (raw(k, j) != 0.0) {
        ++rep.nonzero_columns;
        break;
      }
    }
  }

  double abs_err = 0.0;
  for (const auto& [item, truth] : knowledge.truth) {
    if (item >= raw.cols()) throw BoundsError("truth item out of range");
    const std::vector<double> g = column_of(item);
    const std::vector<double> v = items.column(item);
    const double r = recover_rating(g, user, v, pivot);
    for (std::size_t k = 0; k < d; ++k) {
      if (std::fabs(user[k]) > 1e-6) {
        rep.pivot_spread =
            std::max(rep.pivot_spread, std::fabs(recover_rating(g, user, v, k) - r));
      }
    }
    rep.recovered.push_back({item, r, truth});
    abs_err += std::fabs(r - truth);
  }
  if (!rep.recovered.empty()) {
    rep.mean_abs_error = abs_err / static_cast<double>(rep.recovered.size());
  }
  return rep;
}

}  // namespace sharedmf
