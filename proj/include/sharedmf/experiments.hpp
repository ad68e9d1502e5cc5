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

// Experiment drivers shared by the command-line tool and the acceptance
// run: the leakage demo, the source-scaling comparison and the timing
// benches.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sharedmf/attack.hpp"
#include "sharedmf/data.hpp"
#include "sharedmf/protocol.hpp"
#include "sharedmf/wire.hpp"

namespace sharedmf {

struct SyntheticSpec {
  std::size_t users = 60;
  std::size_t items = 40;
  std::size_t rank = 5;
  double noise = 0.1;
  double fill = 0.3;
  double offset = 0.0;  // added to every rating
  std::uint64_t seed = 1;
};

/// synth_ratings(...) with `offset` added to every observed value.
RatingMatrix make_synthetic(const SyntheticSpec& spec);

/// Bytes sent in one training round (broadcasts, shares, uploads). Teardown
/// Done frames are not included.
std::size_t expected_round_bytes(Mode mode, std::size_t sources,
                                 std::size_t dim, std::size_t items);

/// Payload bytes of the share exchange plus the hybrid uploads in one
/// shared round: T * T * d * m * 8. Headers and broadcasts excluded.
std::size_t share_payload_bytes(std::size_t sources, std::size_t dim,
                                std::size_t items);

// --- Leakage demo ---------------------------------------------------------

struct AttackDemoSpec {
  std::size_t items = 20;    // all rated by the target user
  std::size_t dim = 5;
  std::size_t other_users = 3;  // held by source 1
  double reg_item = 0.0;
  std::uint64_t seed = 1;
};

struct AttackDemoResult {
  std::vector<Frame> capture;  // everything on source 0's server links
  AttackKnowledge knowledge;
  AttackReport report;
};

/// Two sources; source 0 holds a single user who rated every item with an
/// integer in [1, 5]. Captures source 0's uplink and downlink during a
/// short run and attacks round 0 with full knowledge of u_i.
AttackDemoResult run_attack_demo(Mode mode, const AttackDemoSpec& spec);

// --- Source scaling -------------------------------------------------------

struct ScalingSpec {
  std::size_t per_source = 40;  // users added with every source
  SyntheticSpec data{.users = 0, .items = 100, .rank = 5, .noise = 1.0,
                     .fill = 0.063, .offset = 3.5, .seed = 1};
  TrainConfig train{.dim = 10, .max_epochs = 100};
  unsigned frac_bits = kDefaultFracBits;
};

struct ScalingPoint {
  std::size_t sources = 0;
  std::size_t users = 0;
  std::size_t ratings = 0;
  Mode mode = Mode::kPlain;
  double final_loss = 0.0;
  double train_mse = 0.0;  // pooled over all sources
  TrainingMetrics metrics;
};

/// Draws one universe of max(sources) * per_source users and runs each T on
/// the first T * per_source of them, source t holding block t. T = 1 runs
/// plain; larger T run shared.
std::vector<ScalingPoint> local_vs_distributed(
    const ScalingSpec& spec, std::span<const std::size_t> sources);

// --- Timing ---------------------------------------------------------------

struct TimingPoint {
  Mode mode = Mode::kPlain;
  std::size_t sources = 0;
  std::size_t items = 0;
  double median_round_ms = 0.0;  // round 0 excluded
  std::size_t round_bytes = 0;   // measured, identical every round
  std::size_t expected_bytes = 0;
  TrainingMetrics metrics;
};

/// Median wall time per round, the warm-up round excluded. Needs at least
/// six rounds; convergence is effectively disabled for the run.
TimingPoint time_rounds(ProtocolConfig cfg, const std::vector<SourceData>& parts);

struct HorizontalSpec {
  SyntheticSpec data{.users = 200, .items = 100, .rank = 5, .noise = 0.1,
                     .fill = 0.2, .offset = 0.0, .seed = 1};
  TrainConfig train{.dim = 10, .max_epochs = 11};  // max_epochs = rounds
  unsigned frac_bits = kDefaultFracBits;
  TransportKind transport = TransportKind::kMemory;
  Threading threading = Threading::kSingle;
};

/// Fixed data split by partition_users across T sources, both modes.
std::vector<TimingPoint> horizontal_bench(const HorizontalSpec& spec,
                                          std::span<const std::size_t> sources);

struct VerticalSpec {
  SyntheticSpec data{.users = 100, .items = 0, .rank = 5, .noise = 0.1,
                     .fill = 0.2, .offset = 0.0, .seed = 1};
  TrainConfig train{.dim = 10, .max_epochs = 11};
  unsigned frac_bits = kDefaultFracBits;
  TransportKind transport = TransportKind::kMemory;
  Threading threading = Threading::kSingle;
};

/// Shared mode for every (T, m) pair, items restricted to the first m by
/// index of a max(m)-item universe. data.items is ignored.
std::vector<TimingPoint> vertical_bench(const VerticalSpec& spec,
                                        std::span<const std::size_t> sources,
                                        std::span<const std::size_t> items);

}  // namespace sharedmf
