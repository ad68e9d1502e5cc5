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

#include "sharedmf/protocol.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "sharedmf/errors.hpp"

namespace sharedmf {

std::string_view to_string(Mode m) {
  return m == Mode::kPlain ? "plain" : "shared";
}

void ProtocolConfig::validate() const {
  train.validate();
  check_frac_bits(frac_bits);
  if (mode == Mode::kShared && sources < 2) {
    throw ConfigError("shared mode needs at least 2 sources, got " +
                      std::to_string(sources));
  }
  if (sources < 1) throw ConfigError("need at least 1 source");
  if (train.max_epochs > UINT32_MAX) throw ConfigError("too many epochs");
}

Frame GradientMessage::to_frame() const {
  return block_frame(type, round, sender, payload);
}

GradientMessage GradientMessage::from_frame(const Frame& f) {
  return {f.type, f.round, f.sender, frame_block(f)};
}

SourceState make_source(std::uint32_t id, SourceData data,
                        const ProtocolConfig& cfg) {
  if (data.global_users.size() != data.ratings.n_users()) {
    throw ShapeError("source " + std::to_string(id) +
                     ": user map does not match ratings");
  }
  SourceState s;
  s.id = id;
  s.users = init_user_profiles(data.global_users, cfg.train.dim,
                               cfg.train.init_seed);
  s.ratings = std::move(data.ratings);
  s.global_users = std::move(data.global_users);
  return s;
}

ServerState make_server(std::size_t n_items, const ProtocolConfig& cfg) {
  ServerState st;
  st.items = init_item_profiles(cfg.train.dim, n_items, cfg.train.init_seed);
  return st;
}

LocalStep local_step(const SourceState& s, const ProtocolConfig& cfg) {
  const TrainConfig& tc = cfg.train;
  if (s.items.rows() != tc.dim || s.items.cols() != s.ratings.n_items()) {
    throw ShapeError("source " + std::to_string(s.id) +
                     ": broadcast model has the wrong shape");
  }
  LocalStep out;
  out.squared_error = squared_error(s.users, s.items, s.ratings);
  out.user_squared_norm = s.users.squared_norm();
  const FactorMatrix gu = grad_user(s.users, s.items, s.ratings, tc.reg_user);
  FactorMatrix gv =
      grad_item(s.users, s.items, s.ratings, tc.reg_item, cfg.reg_weight());
  out.next_users = apply_update(s.users, gu, tc.learning_rate);
  for (double& x : gv.data()) x *= tc.learning_rate;
  if (!out.next_users.all_finite() || !gv.all_finite()) {
    throw DivergenceError(s.round, "source " + std::to_string(s.id) +
                                       " produced non-finite values");
  }
  out.clamped =
      clamp_to_bound(gv, contribution_bound(cfg.frac_bits, cfg.sources));
  out.scaled_gradient = encode(gv, cfg.frac_bits);
  return out;
}

PlainRound source_round_plain(SourceState s, const ProtocolConfig& cfg) {
  LocalStep step = local_step(s, cfg);
  GradientMessage msg{MsgType::kPlainGradient, s.round, s.id,
                      step.scaled_gradient};
  s.users = step.next_users;
  return {std::move(s), std::move(msg), std::move(step)};
}

SharePhase source_split_shares(SourceState s, const ProtocolConfig& cfg,
                               WordSource& rng) {
  LocalStep step = local_step(s, cfg);
  // The T-1 uniformly random shares go to the peers (in id order); the
  // source keeps the complementary share.
  ShareSet set = split_shares(step.scaled_gradient, cfg.sources, rng);
  SharePhase out;
  std::size_t next = 0;
  for (std::uint32_t to = 0; to < cfg.sources; ++to) {
    if (to == s.id) continue;
    out.outgoing.push_back({to,
                            {MsgType::kShareExchange, s.round, s.id,
                             std::move(set.shares[next++])}});
  }
  out.kept = std::move(set.shares.back());
  s.users = step.next_users;
  out.state = std::move(s);
  out.step = std::move(step);
  return out;
}

GradientMessage source_round_shared(const SharePhase& own,
                                    std::span<const GradientMessage> incoming,
                                    const ProtocolConfig& cfg) {
  const SourceState& s = own.state;
  const std::string who = "source " + std::to_string(s.id) + " round " +
                          std::to_string(s.round) + ": ";
  std::set<std::uint32_t> seen;
  FixedPointBlock hybrid = own.kept;
  for (const GradientMessage& m : incoming) {
    if (m.type != MsgType::kShareExchange) {
      throw ProtocolError(who + "expected ShareExchange from source " +
                          std::to_string(m.sender) + ", got " +
                          std::string(to_string(m.type)));
    }
    if (m.sender >= cfg.sources || m.sender == s.id) {
      throw ProtocolError(who + "share from invalid sender " +
                          std::to_string(m.sender));
    }
    if (m.round != s.round) {
      throw ProtocolError(who + "protocol desync: share from source " +
                          std::to_string(m.sender) + " is for round " +
                          std::to_string(m.round));
    }
    if (!seen.insert(m.sender).second) {
      throw ProtocolError(who + "protocol desync: duplicate share from source " +
                          std::to_string(m.sender));
    }
    if (!m.payload.same_layout(own.kept)) {
      throw ProtocolError(who + "share from source " +
                          std::to_string(m.sender) + " has the wrong shape");
    }
    ring_add_into(hybrid, m.payload);
  }
  for (std::uint32_t peer = 0; peer < cfg.sources; ++peer) {
    if (peer != s.id && !seen.contains(peer)) {
      throw ProtocolError(who + "protocol desync: missing share from source " +
                          std::to_string(peer));
    }
  }
  return {MsgType::kHybridGradient, s.round, s.id, std::move(hybrid)};
}

ServerRound server_round(ServerState st,
                         std::span<const GradientMessage> msgs,
                         const ProtocolConfig& cfg) {
  const std::string ctx = "server round " + std::to_string(st.round) + ": ";
  if (msgs.size() != cfg.sources) {
    throw ProtocolError(ctx + "expected " + std::to_string(cfg.sources) +
                        " messages, got " + std::to_string(msgs.size()));
  }
  const MsgType expected = cfg.mode == Mode::kPlain ? MsgType::kPlainGradient
                                                    : MsgType::kHybridGradient;
  st.received.clear();
  for (const GradientMessage& m : msgs) {
    if (m.type != expected) {
      throw ProtocolError(ctx + "expected " + std::string(to_string(expected)) +
                          ", got " + std::string(to_string(m.type)));
    }
    if (m.round != st.round) {
      throw ProtocolError(ctx + "message from source " +
                          std::to_string(m.sender) + " is for round " +
                          std::to_string(m.round));
    }
    if (m.sender >= cfg.sources) {
      throw ProtocolError(ctx + "unknown sender " + std::to_string(m.sender));
    }
    if (m.payload.rows() != st.items.rows() ||
        m.payload.cols() != st.items.cols() ||
        m.payload.frac_bits() != cfg.frac_bits) {
      throw ProtocolError(ctx + "payload from source " +
                          std::to_string(m.sender) + " has the wrong layout");
    }
    if (!st.received.emplace(m.sender, m).second) {
      throw ProtocolError(ctx + "duplicate message from source " +
                          std::to_string(m.sender));
    }
  }

  // All T messages are present; only now does V move.
  FixedPointBlock sum = st.received.begin()->second.payload;
  for (auto it = std::next(st.received.begin()); it != st.received.end(); ++it) {
    ring_add_into(sum, it->second.payload);
  }
  st.received.clear();
  FactorMatrix aggregate;
  try {
    aggregate = decode(sum);
  } catch (const OverflowError& e) {
    throw ProtocolError(ctx + "aggregate decode failed: " + e.what());
  }

  ServerRound out;
  st.items = apply_update(st.items, aggregate, 1.0);
  if (!st.items.all_finite()) {
    throw DivergenceError(st.round, "server model became non-finite");
  }
  out.gradient_norm = aggregate.frobenius_norm() / cfg.train.learning_rate;
  out.converged = out.gradient_norm < cfg.train.stop_threshold;
  ++st.round;
  out.done = out.converged || st.round >= cfg.train.max_epochs;
  out.broadcast = out.done ? done_frame(st.round) : model_frame(st.round, st.items);
  out.state = std::move(st);
  return out;
}

namespace {

// Harness-side bookkeeping. Parties report what they already know locally;
// nothing here flows between parties.
class MetricsSink {
 public:
  void source_report(std::uint32_t round, const LocalStep& step) {
    std::lock_guard<std::mutex> lk(mu_);
    auto& r = rounds_[round];
    r.sse += step.squared_error;
    r.user_sq += step.user_squared_norm;
    clamped_ += step.clamped;
  }

  void server_report(std::uint32_t round, double item_sq, double wall_ms,
                     std::size_t bytes) {
    std::lock_guard<std::mutex> lk(mu_);
    auto& r = rounds_[round];
    r.item_sq = item_sq;
    r.wall_ms = wall_ms;
    r.bytes = bytes;
    r.closed = true;
  }

  void fill(TrainingMetrics& m, std::size_t n_ratings,
            const TrainConfig& tc) const {
    std::lock_guard<std::mutex> lk(mu_);
    for (const auto& [round, r] : rounds_) {
      if (!r.closed) continue;
      m.rounds.push_back(
          {round,
           r.sse / static_cast<double>(n_ratings) + tc.reg_user * r.user_sq +
               tc.reg_item * r.item_sq,
           r.wall_ms, r.bytes});
    }
    m.clamped = clamped_;
  }

 private:
  struct Partial {
    double sse = 0.0;
    double user_sq = 0.0;
    double item_sq = 0.0;
    double wall_ms = 0.0;
    std::size_t bytes = 0;
    bool closed = false;
  };
  mutable std::mutex mu_;
  std::map<std::uint32_t, Partial> rounds_;
  std::size_t clamped_ = 0;
};

[[noreturn]] void rethrow_with_round(std::uint32_t round,
                                     const std::string& party) {
  try {
    throw;
  } catch (const TransportError& e) {
    throw TransportError(party + " round " + std::to_string(round) + ": " +
                         e.what());
  }
}

class SourceParty {
 public:
  SourceParty(SourceState state, const ProtocolConfig& cfg, Network& net,
              MetricsSink& sink, const RunHooks& hooks)
      : state_(std::move(state)),
        cfg_(cfg),
        net_(net),
        sink_(sink),
        hooks_(hooks),
        rng_(cfg.share_seed, state_.id) {}

  // False once the server has signalled Done.
  bool receive_model() {
    try {
      const Frame f =
          net_.from_server(state_.id).receive(cfg_.receive_timeout);
      if (f.type == MsgType::kDone) return false;
      state_.items = frame_model(f);
      state_.round = f.round;
      return true;
    } catch (...) {
      rethrow_with_round(state_.round, name());
    }
  }

  void compute_and_send() {
    try {
      if (cfg_.mode == Mode::kPlain) {
        PlainRound r = source_round_plain(std::move(state_), cfg_);
        state_ = std::move(r.state);
        report(r.step);
        net_.to_server(state_.id).send(r.message.to_frame());
      } else {
        SharePhase p = source_split_shares(std::move(state_), cfg_, rng_);
        report(p.step);
        for (const AddressedShare& a : p.outgoing) {
          net_.peer(p.state.id, a.to).send(a.message.to_frame());
        }
        state_ = p.state;
        pending_ = std::move(p);
      }
    } catch (...) {
      rethrow_with_round(state_.round, name());
    }
  }

  void finish_round() {
    if (cfg_.mode == Mode::kPlain) return;
    try {
      std::vector<GradientMessage> incoming;
      for (std::uint32_t peer = 0; peer < cfg_.sources; ++peer) {
        if (peer == state_.id) continue;
        incoming.push_back(GradientMessage::from_frame(
            net_.peer(peer, state_.id).receive(cfg_.receive_timeout)));
      }
      const GradientMessage hybrid =
          source_round_shared(*pending_, incoming, cfg_);
      pending_.reset();
      net_.to_server(state_.id).send(hybrid.to_frame());
    } catch (...) {
      rethrow_with_round(state_.round, name());
    }
  }

  void run() {
    while (receive_model()) {
      compute_and_send();
      finish_round();
    }
  }

  const SourceState& state() const { return state_; }

 private:
  std::string name() const { return "source " + std::to_string(state_.id); }

  void report(const LocalStep& step) {
    sink_.source_report(state_.round, step);
    if (hooks_.on_plaintext) {
      hooks_.on_plaintext(state_.id, state_.round, step.scaled_gradient);
    }
  }

  SourceState state_;
  const ProtocolConfig& cfg_;
  Network& net_;
  MetricsSink& sink_;
  const RunHooks& hooks_;
  ChaChaWordSource rng_;
  std::optional<SharePhase> pending_;
};

class ServerParty {
 public:
  ServerParty(ServerState state, const ProtocolConfig& cfg, Network& net,
              MetricsSink& sink, const RunHooks& hooks)
      : state_(std::move(state)),
        cfg_(cfg),
        net_(net),
        sink_(sink),
        hooks_(hooks),
        pending_(model_frame(0, state_.items)) {}

  void broadcast() {
    try {
      round_start_ = std::chrono::steady_clock::now();
      item_sq_ = state_.items.squared_norm();
      for (std::size_t s = 0; s < cfg_.sources; ++s) {
        net_.from_server(s).send(pending_);
      }
    } catch (...) {
      rethrow_with_round(state_.round, "server");
    }
  }

  // True once Done has been sent.
  bool collect() {
    const std::uint32_t round = state_.round;
    try {
      std::vector<GradientMessage> msgs;
      for (std::size_t s = 0; s < cfg_.sources; ++s) {
        msgs.push_back(GradientMessage::from_frame(
            net_.to_server(s).receive(cfg_.receive_timeout)));
      }
      ServerRound r = server_round(std::move(state_), msgs, cfg_);
      state_ = std::move(r.state);
      converged_ = r.converged;
      const auto elapsed = std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - round_start_);
      const std::size_t total = net_.total_bytes();
      sink_.server_report(round, item_sq_, elapsed.count(),
                          total - bytes_mark_);
      bytes_mark_ = total;
      if (hooks_.on_round) hooks_.on_round(round, state_.items);
      if (r.done) {
        for (std::size_t s = 0; s < cfg_.sources; ++s) {
          net_.from_server(s).send(r.broadcast);
        }
        teardown_bytes_ = net_.total_bytes() - bytes_mark_;
        return true;
      }
      pending_ = std::move(r.broadcast);
      return false;
    } catch (...) {
      rethrow_with_round(round, "server");
    }
  }

  void run() {
    do {
      broadcast();
    } while (!collect());
  }

  const ServerState& state() const { return state_; }
  bool converged() const { return converged_; }
  std::size_t teardown_bytes() const { return teardown_bytes_; }

 private:
  ServerState state_;
  const ProtocolConfig& cfg_;
  Network& net_;
  MetricsSink& sink_;
  const RunHooks& hooks_;
  Frame pending_;
  std::chrono::steady_clock::time_point round_start_;
  double item_sq_ = 0.0;
  std::size_t bytes_mark_ = 0;
  std::size_t teardown_bytes_ = 0;
  bool converged_ = false;
};

void check_sources(const ProtocolConfig& cfg,
                   const std::vector<SourceData>& sources) {
  if (sources.size() != cfg.sources) {
    throw ConfigError("config names " + std::to_string(cfg.sources) +
                      " sources but " + std::to_string(sources.size()) +
                      " partitions were given");
  }
  std::set<std::size_t> users;
  std::size_t total = 0;
  for (const SourceData& s : sources) {
    if (s.ratings.n_items() != sources.front().ratings.n_items()) {
      throw ShapeError("sources disagree on the item count");
    }
    for (std::size_t u : s.global_users) {
      if (!users.insert(u).second) {
        throw ConfigError("user " + std::to_string(u) +
                          " appears in more than one source");
      }
    }
    total += s.ratings.nnz();
  }
  if (total == 0) throw DegenerateInputError("no ratings in any source");
}

}  // namespace

TrainingResult run_training(const ProtocolConfig& cfg,
                            const std::vector<SourceData>& sources,
                            const RunHooks& hooks) {
  cfg.validate();
  check_sources(cfg, sources);
  const std::size_t n_items = sources.front().ratings.n_items();
  std::size_t n_ratings = 0;
  for (const SourceData& s : sources) n_ratings += s.ratings.nnz();

  Network net(cfg.sources, cfg.transport, cfg.mode == Mode::kShared);
  if (hooks.on_network) hooks.on_network(net);

  MetricsSink sink;
  ServerParty server(make_server(n_items, cfg), cfg, net, sink, hooks);
  std::vector<std::unique_ptr<SourceParty>> parties;
  for (std::uint32_t t = 0; t < cfg.sources; ++t) {
    parties.push_back(std::make_unique<SourceParty>(
        make_source(t, sources[t], cfg), cfg, net, sink, hooks));
  }

  if (cfg.threading == Threading::kSingle) {
    bool done = false;
    while (!done) {
      server.broadcast();
      for (auto& p : parties) p->receive_model();
      for (auto& p : parties) p->compute_and_send();
      for (auto& p : parties) p->finish_round();
      done = server.collect();
    }
    for (auto& p : parties) p->receive_model();
  } else {
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto guarded = [&](auto&& body) {
      return [&, body] {
        try {
          body();
        } catch (...) {
          {
            std::lock_guard<std::mutex> lk(err_mu);
            if (!first_error) first_error = std::current_exception();
          }
          net.close_all();
        }
      };
    };
    std::vector<std::thread> threads;
    threads.emplace_back(guarded([&server] { server.run(); }));
    for (auto& p : parties) {
      SourceParty* party = p.get();
      threads.emplace_back(guarded([party] { party->run(); }));
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  TrainingResult res;
  res.items = server.state().items;
  double sse = 0.0, user_sq = 0.0;
  for (const auto& p : parties) {
    res.users.push_back(p->state().users);
    sse += squared_error(p->state().users, res.items, p->state().ratings);
    user_sq += p->state().users.squared_norm();
  }
  sink.fill(res.metrics, n_ratings, cfg.train);
  res.metrics.converged = server.converged();
  res.metrics.teardown_bytes = server.teardown_bytes();
  res.metrics.final_loss = sse / static_cast<double>(n_ratings) +
                           cfg.train.reg_user * user_sq +
                           cfg.train.reg_item * res.items.squared_norm();
  for (const Channel* c : net.channels()) {
    res.metrics.channel_bytes[c->name()] = c->bytes_sent();
  }
  return res;
}

}  // namespace sharedmf
