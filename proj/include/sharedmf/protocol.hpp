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

// Federated full-batch MF between T data sources and one server.
//
// Each round the server broadcasts V. Every source updates its private user
// rows and produces alpha * (item gradient), fixed-point encoded. In plain
// mode that block goes straight to the server. In shared mode the source
// splits it into T additive shares, keeps one, sends one to every peer, and
// uploads only the ring sum of the share it kept and the shares it received
// (the hybrid gradient). The server ring-sums the T uploads, decodes, and
// subtracts the result from V. Both modes reconstruct the same ring sum, so
// they produce bit-identical models.

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sharedmf/data.hpp"
#include "sharedmf/fixed_point.hpp"
#include "sharedmf/matrix.hpp"
#include "sharedmf/mf.hpp"
#include "sharedmf/sharing.hpp"
#include "sharedmf/transport.hpp"
#include "sharedmf/wire.hpp"

namespace sharedmf {

enum class Mode { kPlain, kShared };
enum class Threading { kSingle, kPerParty };

std::string_view to_string(Mode m);

struct ProtocolConfig {
  std::size_t sources = 2;
  Mode mode = Mode::kShared;
  TransportKind transport = TransportKind::kMemory;
  Threading threading = Threading::kSingle;
  TrainConfig train;
  unsigned frac_bits = kDefaultFracBits;
  std::uint64_t share_seed = 0;
  std::chrono::milliseconds receive_timeout{30000};

  // Throws ConfigError. Shared mode needs at least two sources.
  void validate() const;
  // Weight each source applies to the item regularizer.
  double reg_weight() const { return 1.0 / static_cast<double>(sources); }
};

/// A gradient-bearing protocol message.
struct GradientMessage {
  MsgType type = MsgType::kPlainGradient;
  std::uint32_t round = 0;
  std::uint32_t sender = 0;
  FixedPointBlock payload;

  Frame to_frame() const;
  static GradientMessage from_frame(const Frame& f);
};

struct SourceState {
  std::uint32_t id = 0;
  RatingMatrix ratings;  // local user rows, global item columns
  std::vector<std::size_t> global_users;
  FactorMatrix users;    // private U_t
  FactorMatrix items;    // V as last broadcast
  std::uint32_t round = 0;
};

SourceState make_source(std::uint32_t id, SourceData data,
                        const ProtocolConfig& cfg);

struct ServerState {
  FactorMatrix items;
  std::uint32_t round = 0;
  std::map<std::uint32_t, GradientMessage> received;
};

ServerState make_server(std::size_t n_items, const ProtocolConfig& cfg);

/// Result of one source's local computation for a round.
struct LocalStep {
  FactorMatrix next_users;
  FixedPointBlock scaled_gradient;  // encode(alpha * grad_item)
  std::size_t clamped = 0;          // entries clamped to the overflow budget
  double squared_error = 0.0;       // at the parameters entering the round
  double user_squared_norm = 0.0;
};

/// grad_user/grad_item at (U_t, V); U_t stepped by alpha; the item gradient
/// pre-multiplied by alpha, clamped to the budget, and encoded. Throws
/// DivergenceError on non-finite values.
LocalStep local_step(const SourceState& s, const ProtocolConfig& cfg);

struct PlainRound {
  SourceState state;
  GradientMessage message;  // PlainGradient
  LocalStep step;
};

PlainRound source_round_plain(SourceState s, const ProtocolConfig& cfg);

struct AddressedShare {
  std::uint32_t to = 0;
  GradientMessage message;  // ShareExchange
};

struct SharePhase {
  SourceState state;
  FixedPointBlock kept;  // this source's own share
  std::vector<AddressedShare> outgoing;  // one per peer
  LocalStep step;
};

/// First half of a shared round: local step, then split into T shares.
SharePhase source_split_shares(SourceState s, const ProtocolConfig& cfg,
                               WordSource& rng);

/// Second half: ring-sum of the kept share and exactly one share from each
/// peer for this round. Throws ProtocolError naming the offending source on
/// a missing, duplicate, stale or malformed share.
GradientMessage source_round_shared(const SharePhase& own,
                                    std::span<const GradientMessage> incoming,
                                    const ProtocolConfig& cfg);

struct ServerRound {
  ServerState state;
  Frame broadcast;          // next ModelBroadcast, or Done
  bool done = false;
  bool converged = false;   // ||G||_F / alpha < delta
  double gradient_norm = 0.0;  // ||G||_F / alpha
};

/// Aggregates exactly T messages of the current round and steps V by the
/// decoded ring sum. Emits Done on convergence or after max_epochs rounds.
ServerRound server_round(ServerState st,
                         std::span<const GradientMessage> msgs,
                         const ProtocolConfig& cfg);

struct RoundMetrics {
  std::uint32_t round = 0;
  double loss = 0.0;    // at the parameters entering the round
  double wall_ms = 0.0;
  std::size_t bytes = 0;  // all frames sent during the round
};

struct TrainingMetrics {
  std::vector<RoundMetrics> rounds;
  std::map<std::string, std::size_t> channel_bytes;
  std::size_t teardown_bytes = 0;  // Done frames
  std::size_t clamped = 0;
  bool converged = false;
  double final_loss = 0.0;
};

struct TrainingResult {
  FactorMatrix items;
  std::vector<FactorMatrix> users;  // per source, local row order
  TrainingMetrics metrics;
};

/// Test and tooling hooks. None of them are visible to the parties.
struct RunHooks {
  // Server V after each round's update.
  std::function<void(std::uint32_t round, const FactorMatrix& items)> on_round;
  // Each source's plaintext encoded contribution, before it is shared.
  std::function<void(std::uint32_t source, std::uint32_t round,
                     const FixedPointBlock& plain)>
      on_plaintext;
  // Installed on the network before the first frame is sent.
  std::function<void(Network&)> on_network;
};

/// Runs the full protocol until convergence or max_epochs rounds. Throws
/// TransportError (with round context) on channel failure and
/// DivergenceError on non-finite parameters.
TrainingResult run_training(const ProtocolConfig& cfg,
                            const std::vector<SourceData>& sources,
                            const RunHooks& hooks = {});

}  // namespace sharedmf
