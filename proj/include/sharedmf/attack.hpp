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

// Rating recovery from item-gradient uploads, as an honest-but-curious
// server would attempt it.
//
// For a source holding one user i, the unregularized item gradient column is
// g_j = -2 * e_ij * u_i with e_ij = r_ij - <u_i, v_j>, and zero for items the
// user did not rate. A server that knows u_i and v_j recovers
// e_ij = g_j[k] / (-2 u_i[k]) from any well-conditioned component k, and then
// r_ij = e_ij + <u_i, v_j>.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "sharedmf/matrix.hpp"
#include "sharedmf/wire.hpp"

namespace sharedmf {

inline constexpr double kMinPivot = 1e-9;

/// e_ij from one gradient column. Throws IllConditionedError when
/// |user[k]| <= kMinPivot and ShapeError on length mismatch.
double recover_residual(std::span<const double> gradient_column,
                        std::span<const double> user, std::size_t k);

/// recover_residual(...) + <user, item>.
double recover_rating(std::span<const double> gradient_column,
                      std::span<const double> user,
                      std::span<const double> item, std::size_t k);

/// Index of the largest-magnitude component of the user vector.
std::size_t best_pivot(std::span<const double> user);

struct AttackKnowledge {
  std::uint32_t target_sender = 0;
  // Round to attack; the earliest gradient frame from the target if unset.
  std::optional<std::uint32_t> round;
  std::vector<double> user_profile;  // u_i at the attacked round
  // Uploads carry scale * (-2 U^T E + reg_weight * 2 * reg_item * V); both
  // terms are stripped before inversion.
  double gradient_scale = 1.0;
  double reg_weight = 1.0;
  double reg_item = 0.0;
  // Item profiles at the attacked round; read from a ModelBroadcast frame
  // of that round in the capture when unset.
  std::optional<FactorMatrix> items;
  // Ground truth for scoring: item -> rating.
  std::map<std::size_t, double> truth;
};

struct RecoveredRating {
  std::size_t item = 0;
  double recovered = 0.0;
  double truth = 0.0;
};

struct AttackReport {
  std::uint32_t round = 0;
  std::uint32_t sender = 0;
  MsgType frame_type = MsgType::kPlainGradient;
  std::size_t nonzero_columns = 0;
  std::vector<RecoveredRating> recovered;  // one per truth item
  double mean_abs_error = 0.0;
  // Largest disagreement between pivots on any truth item; near zero on
  // a genuine single-user gradient.
  double pivot_spread = 0.0;
};

/// Applies the recovery to the target's gradient frame (PlainGradient or
/// HybridGradient) in a capture. Throws EmptyTraceError when the capture
/// holds no usable gradient or model frame.
AttackReport attack_trace(std::span<const Frame> frames,
                          const AttackKnowledge& knowledge);

}  // namespace sharedmf
