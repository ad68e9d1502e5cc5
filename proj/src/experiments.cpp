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

#include "sharedmf/experiments.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <string>

#include "sharedmf/errors.hpp"
#include "sharedmf/mf.hpp"

namespace sharedmf {

RatingMatrix make_synthetic(const SyntheticSpec& spec) {
  const SyntheticRatings s = synth_ratings(spec.users, spec.items, spec.rank,
                                           spec.noise, spec.fill, spec.seed);
  if (spec.offset == 0.0) return s.ratings;
  std::vector<Rating> e(s.ratings.entries().begin(), s.ratings.entries().end());
  for (Rating& r : e) r.value += spec.offset;
  return RatingMatrix(spec.users, spec.items, std::move(e));
}

std::size_t expected_round_bytes(Mode mode, std::size_t sources,
                                 std::size_t dim, std::size_t items) {
  const std::size_t frame = frame_bytes(dim, items);
  if (mode == Mode::kPlain) return 2 * sources * frame;
  // T broadcasts, T(T-1) shares, T hybrid uploads.
  return (sources + sources * (sources - 1) + sources) * frame;
}

std::size_t share_payload_bytes(std::size_t sources, std::size_t dim,
                                std::size_t items) {
  return sources * sources * dim * items * 8;
}

AttackDemoResult run_attack_demo(Mode mode, const AttackDemoSpec& spec) {
  if (spec.items == 0 || spec.dim == 0 || spec.other_users == 0) {
    throw ConfigError("attack demo needs items, dim and other users");
  }
  std::mt19937_64 eng(spec.seed);
  AttackDemoResult out;
  std::vector<Rating> e;
  for (std::size_t j = 0; j < spec.items; ++j) {
    const double r = static_cast<double>(1 + eng() % 5);
    e.push_back({0, j, r});
    out.knowledge.truth[j] = r;
  }
  std::uniform_real_distribution<double> filler(1.0, 5.0);
  for (std::size_t i = 1; i <= spec.other_users; ++i) {
    for (std::size_t j = 0; j < spec.items; ++j) {
      if (eng() % 2) e.push_back({i, j, filler(eng)});
    }
  }
  const RatingMatrix all(1 + spec.other_users, spec.items, std::move(e));
  const std::vector<SourceData> parts = partition_user_blocks(all, 2, 1);

  ProtocolConfig cfg;
  cfg.sources = 2;
  cfg.mode = mode;
  cfg.train.dim = spec.dim;
  cfg.train.reg_item = spec.reg_item;
  cfg.train.max_epochs = 2;
  cfg.train.init_seed = spec.seed;
  cfg.share_seed = spec.seed ^ 0x5eed;

  // Round-0 profile; the server is assumed to know it.
  const FactorMatrix u0 =
      init_user_profiles(parts[0].global_users, spec.dim, spec.seed);
  out.knowledge.target_sender = 0;
  out.knowledge.round = 0;
  out.knowledge.user_profile.assign(u0.row(0).begin(), u0.row(0).end());
  out.knowledge.gradient_scale = cfg.train.learning_rate;
  out.knowledge.reg_weight = cfg.reg_weight();
  out.knowledge.reg_item = spec.reg_item;

  RunHooks hooks;
  hooks.on_network = [&out](Network& net) {
    for (const std::string& name : {Network::up_name(0), Network::down_name(0)}) {
      net.find(name)->set_tap([&out](std::span<const std::uint8_t> bytes) {
        std::size_t used = 0;
        out.capture.push_back(parse_frame(bytes, used));
      });
    }
  };
  run_training(cfg, parts, hooks);
  out.report = attack_trace(out.capture, out.knowledge);
  return out;
}

std::vector<ScalingPoint> local_vs_distributed(
    const ScalingSpec& spec, std::span<const std::size_t> sources) {
  if (sources.empty()) throw ConfigError("no source counts given");
  if (spec.per_source == 0) throw ConfigError("per_source must be positive");
  const std::size_t max_t = *std::max_element(sources.begin(), sources.end());
  SyntheticSpec data = spec.data;
  data.users = max_t * spec.per_source;
  const RatingMatrix universe = make_synthetic(data);

  std::vector<ScalingPoint> out;
  for (std::size_t t : sources) {
    const std::vector<SourceData> parts =
        partition_user_blocks(universe, t, spec.per_source);
    ProtocolConfig cfg;
    cfg.sources = t;
    cfg.mode = t == 1 ? Mode::kPlain : Mode::kShared;
    cfg.train = spec.train;
    cfg.frac_bits = spec.frac_bits;
    cfg.share_seed = data.seed;
    const TrainingResult r = run_training(cfg, parts);
    ScalingPoint p;
    p.sources = t;
    p.users = t * spec.per_source;
    p.mode = cfg.mode;
    double sse = 0.0;
    for (std::size_t s = 0; s < t; ++s) {
      sse += squared_error(r.users[s], r.items, parts[s].ratings);
      p.ratings += parts[s].ratings.nnz();
    }
    p.train_mse = sse / static_cast<double>(p.ratings);
    p.final_loss = r.metrics.final_loss;
    p.metrics = r.metrics;
    out.push_back(std::move(p));
  }
  return out;
}

TimingPoint time_rounds(ProtocolConfig cfg,
                        const std::vector<SourceData>& parts) {
  if (cfg.train.max_epochs < 6) {
    throw ConfigError("timing needs at least six rounds");
  }
  cfg.train.stop_threshold = std::numeric_limits<double>::min();
  const TrainingResult r = run_training(cfg, parts);
  TimingPoint p;
  p.mode = cfg.mode;
  p.sources = cfg.sources;
  p.items = r.items.cols();
  p.expected_bytes =
      expected_round_bytes(cfg.mode, cfg.sources, cfg.train.dim, p.items);
  std::vector<double> ms;
  for (const RoundMetrics& m : r.metrics.rounds) {
    if (m.round == 0) continue;
    ms.push_back(m.wall_ms);
  }
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  p.median_round_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  p.round_bytes = r.metrics.rounds.front().bytes;
  for (const RoundMetrics& m : r.metrics.rounds) {
    if (m.bytes != p.round_bytes) {
      throw ProtocolError("round " + std::to_string(m.round) + " sent " +
                          std::to_string(m.bytes) + " bytes, round 0 sent " +
                          std::to_string(p.round_bytes));
    }
  }
  p.metrics = r.metrics;
  return p;
}

namespace {

ProtocolConfig timing_config(std::size_t sources, Mode mode,
                             const TrainConfig& train, unsigned frac_bits,
                             TransportKind transport, Threading threading,
                             std::uint64_t seed) {
  ProtocolConfig cfg;
  cfg.sources = sources;
  cfg.mode = mode;
  cfg.transport = transport;
  cfg.threading = threading;
  cfg.train = train;
  cfg.frac_bits = frac_bits;
  cfg.share_seed = seed;
  return cfg;
}

}  // namespace

std::vector<TimingPoint> horizontal_bench(const HorizontalSpec& spec,
                                          std::span<const std::size_t> sources) {
  const RatingMatrix data = make_synthetic(spec.data);
  std::vector<TimingPoint> out;
  for (std::size_t t : sources) {
    const std::vector<SourceData> parts = partition_users(data, t, spec.data.seed);
    for (Mode mode : {Mode::kPlain, Mode::kShared}) {
      out.push_back(time_rounds(
          timing_config(t, mode, spec.train, spec.frac_bits, spec.transport,
                        spec.threading, spec.data.seed),
          parts));
    }
  }
  return out;
}

std::vector<TimingPoint> vertical_bench(const VerticalSpec& spec,
                                        std::span<const std::size_t> sources,
                                        std::span<const std::size_t> items) {
  if (items.empty()) throw ConfigError("no item counts given");
  const std::size_t max_m = *std::max_element(items.begin(), items.end());
  SyntheticSpec ds = spec.data;
  ds.items = max_m;
  const RatingMatrix universe = make_synthetic(ds);
  std::vector<TimingPoint> out;
  for (std::size_t t : sources) {
    for (std::size_t m : items) {
      const RatingMatrix data = slice(universe, ds.users, m);
      const std::vector<SourceData> parts = partition_users(data, t, ds.seed);
      out.push_back(time_rounds(
          timing_config(t, Mode::kShared, spec.train, spec.frac_bits,
                        spec.transport, spec.threading, ds.seed),
          parts));
    }
  }
  return out;
}

}  // namespace sharedmf
