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

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>

#include "sharedmf/attack.hpp"
#include "sharedmf/data.hpp"
#include "sharedmf/errors.hpp"
#include "sharedmf/experiments.hpp"
#include "sharedmf/protocol.hpp"
#include "sharedmf/wire.hpp"

namespace sharedmf::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest text that parses back to the same double.
std::string repr(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) {
    throw UsageError("bad value for " + key + ": '" + text + "'");
  }
  return v;
}

Mode parse_mode(const std::string& s) {
  return s == "plain" ? Mode::kPlain : Mode::kShared;
}
TransportKind parse_transport(const std::string& s) {
  return s == "socket" ? TransportKind::kSocket : TransportKind::kMemory;
}
Threading parse_threads(const std::string& s) {
  return s == "per-party" ? Threading::kPerParty : Threading::kSingle;
}

// Flags shared by every subcommand that trains.
struct TrainFlags {
  std::string mode = "shared";
  std::optional<std::size_t> sources;
  std::optional<std::size_t> dim;
  double lr = 1e-2;
  double reg_u = 1e-3;
  double reg_v = 1e-3;
  double delta = 1e-4;
  std::optional<std::size_t> epochs;
  unsigned frac_bits = kDefaultFracBits;
  std::uint64_t seed = 0;
  std::string transport = "memory";
  std::string threads = "single";
  std::vector<std::string> synthetic;
  std::string out = ".";
};

void add_train_flags(CLI::App* app, TrainFlags& f, bool with_mode) {
  if (with_mode) {
    app->add_option("--mode", f.mode, "plain or shared")
        ->check(CLI::IsMember({"plain", "shared"}))
        ->capture_default_str();
  }
  app->add_option("--sources", f.sources, "number of data sources T");
  app->add_option("--dim", f.dim, "latent dimension d");
  app->add_option("--lr", f.lr, "learning rate")->capture_default_str();
  app->add_option("--reg-u", f.reg_u, "user regularizer")->capture_default_str();
  app->add_option("--reg-v", f.reg_v, "item regularizer")->capture_default_str();
  app->add_option("--delta", f.delta, "stop threshold on ||grad V||")
      ->capture_default_str();
  app->add_option("--epochs", f.epochs, "maximum training rounds");
  app->add_option("--frac-bits", f.frac_bits, "fixed-point fractional bits")
      ->capture_default_str();
  app->add_option("--seed", f.seed, "seed for data, init and shares")
      ->capture_default_str();
  app->add_option("--transport", f.transport, "memory or socket")
      ->check(CLI::IsMember({"memory", "socket"}))
      ->capture_default_str();
  app->add_option("--threads", f.threads, "single or per-party")
      ->check(CLI::IsMember({"single", "per-party"}))
      ->capture_default_str();
  app->add_option("--out", f.out, "output directory")->capture_default_str();
}

// `--synthetic` keys: n, m, d (planted rank), noise, fill, offset, seed.
struct SyntheticKeys {
  SyntheticSpec spec;
  bool rank_given = false;
};

SyntheticKeys parse_synthetic(const std::vector<std::string>& kvs,
                              SyntheticSpec base) {
  SyntheticKeys out{base, false};
  for (const std::string& kv : kvs) {
    if (kv.empty()) continue;  // bare --synthetic
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw UsageError("--synthetic expects key=value, got '" + kv + "'");
    }
    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "n") {
      out.spec.users = parse_number<std::size_t>(k, v);
    } else if (k == "m") {
      out.spec.items = parse_number<std::size_t>(k, v);
    } else if (k == "d") {
      out.spec.rank = parse_number<std::size_t>(k, v);
      out.rank_given = true;
    } else if (k == "noise") {
      out.spec.noise = parse_number<double>(k, v);
    } else if (k == "fill") {
      out.spec.fill = parse_number<double>(k, v);
    } else if (k == "offset") {
      out.spec.offset = parse_number<double>(k, v);
    } else if (k == "seed") {
      out.spec.seed = parse_number<std::uint64_t>(k, v);
    } else {
      throw UsageError("unknown --synthetic key '" + k + "'");
    }
  }
  return out;
}

std::vector<std::string> synthetic_args(const SyntheticSpec& s) {
  return {"n=" + std::to_string(s.users),     "m=" + std::to_string(s.items),
          "d=" + std::to_string(s.rank),      "noise=" + repr(s.noise),
          "fill=" + repr(s.fill),             "offset=" + repr(s.offset),
          "seed=" + std::to_string(s.seed)};
}

json synthetic_json(const SyntheticSpec& s) {
  return {{"n", s.users},      {"m", s.items},   {"rank", s.rank},
          {"noise", s.noise},  {"fill", s.fill}, {"offset", s.offset},
          {"seed", s.seed}};
}

json train_json(const TrainConfig& t) {
  return {{"dim", t.dim},
          {"lr", t.learning_rate},
          {"reg_u", t.reg_user},
          {"reg_v", t.reg_item},
          {"delta", t.stop_threshold},
          {"epochs", t.max_epochs},
          {"init_seed", t.init_seed}};
}

json rounds_json(const TrainingMetrics& m) {
  json a = json::array();
  for (const RoundMetrics& r : m.rounds) {
    a.push_back({{"round", r.round},
                 {"loss", r.loss},
                 {"wall_ms", r.wall_ms},
                 {"bytes", r.bytes}});
  }
  return a;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + p.string());
}

void write_bench_csv(const fs::path& p, const TrainingMetrics& m) {
  std::string s = "round,loss,wall_ms,bytes\n";
  for (const RoundMetrics& r : m.rounds) {
    s += std::to_string(r.round) + "," + repr(r.loss) + "," + repr(r.wall_ms) +
         "," + std::to_string(r.bytes) + "\n";
  }
  write_text(p, s);
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

// Common flag echo, in a form `run` accepts again.
std::vector<std::string> train_flag_args(const TrainFlags& f,
                                         const TrainConfig& t,
                                         bool with_mode) {
  std::vector<std::string> a;
  if (with_mode) a.insert(a.end(), {"--mode", f.mode});
  a.insert(a.end(),
           {"--dim", std::to_string(t.dim), "--lr", repr(t.learning_rate),
            "--reg-u", repr(t.reg_user), "--reg-v", repr(t.reg_item),
            "--delta", repr(t.stop_threshold), "--epochs",
            std::to_string(t.max_epochs), "--frac-bits",
            std::to_string(f.frac_bits), "--seed", std::to_string(f.seed),
            "--transport", f.transport, "--threads", f.threads});
  return a;
}

TrainConfig make_train(const TrainFlags& f, std::size_t default_dim,
                       std::size_t default_epochs) {
  TrainConfig t;
  t.dim = f.dim.value_or(default_dim);
  t.learning_rate = f.lr;
  t.reg_user = f.reg_u;
  t.reg_item = f.reg_v;
  t.stop_threshold = f.delta;
  t.max_epochs = f.epochs.value_or(default_epochs);
  t.init_seed = f.seed;
  t.validate();
  return t;
}

// --- train ----------------------------------------------------------------

struct TrainCmd {
  TrainFlags flags;
  std::string data;
  std::optional<std::size_t> max_users;
  std::optional<std::size_t> max_items;
  double train_fraction = 0.7;
};

int cmd_train(const TrainCmd& c, bool synthetic_given, std::ostream& out) {
  const TrainFlags& f = c.flags;
  if (c.data.empty() == !synthetic_given) {
    throw UsageError("train needs exactly one of --data or --synthetic");
  }
  RatingMatrix all(1, 1, {});
  std::optional<SyntheticKeys> synth;
  if (!c.data.empty()) {
    if (!fs::exists(c.data)) throw UsageError("no such data file: " + c.data);
    all = load_movielens(c.data).ratings;
  } else {
    synth = parse_synthetic(f.synthetic, SyntheticSpec{.seed = f.seed});
    all = make_synthetic(synth->spec);
  }
  if (c.max_users || c.max_items) {
    all = slice(all, std::min(c.max_users.value_or(all.n_users()), all.n_users()),
                std::min(c.max_items.value_or(all.n_items()), all.n_items()));
  }
  // `--synthetic d=` doubles as the model dimension when --dim is absent.
  const std::size_t default_dim =
      synth && synth->rank_given ? synth->spec.rank : 100;
  ProtocolConfig cfg;
  cfg.sources = f.sources.value_or(2);
  cfg.mode = parse_mode(f.mode);
  cfg.transport = parse_transport(f.transport);
  cfg.threading = parse_threads(f.threads);
  cfg.train = make_train(f, default_dim, 100);
  cfg.frac_bits = f.frac_bits;
  cfg.share_seed = f.seed;
  cfg.validate();

  const auto [train, test] =
      split_train_test(all, SplitSpec{c.train_fraction, f.seed});
  const std::vector<SourceData> parts = partition_users(train, cfg.sources, f.seed);
  const TrainingResult r = run_training(cfg, parts);

  FactorMatrix users(all.n_users(), cfg.train.dim);
  for (std::size_t t = 0; t < parts.size(); ++t) {
    for (std::size_t k = 0; k < parts[t].global_users.size(); ++k) {
      for (std::size_t q = 0; q < cfg.train.dim; ++q) {
        users(parts[t].global_users[k], q) = r.users[t](k, q);
      }
    }
  }

  std::vector<std::string> args{"train"};
  const auto flag_args = train_flag_args(f, cfg.train, true);
  args.insert(args.end(), flag_args.begin(), flag_args.end());
  args.insert(args.end(), {"--sources", std::to_string(cfg.sources),
                           "--train-fraction", repr(c.train_fraction)});
  if (c.max_users) args.insert(args.end(), {"--users", std::to_string(*c.max_users)});
  if (c.max_items) args.insert(args.end(), {"--items", std::to_string(*c.max_items)});
  json config{{"mode", f.mode},
              {"sources", cfg.sources},
              {"train", train_json(cfg.train)},
              {"frac_bits", cfg.frac_bits},
              {"share_seed", cfg.share_seed},
              {"split_seed", f.seed},
              {"partition_seed", f.seed},
              {"train_fraction", c.train_fraction},
              {"transport", f.transport},
              {"threads", f.threads}};
  if (synth) {
    args.push_back("--synthetic");
    const auto kv = synthetic_args(synth->spec);
    args.insert(args.end(), kv.begin(), kv.end());
    config["synthetic"] = synthetic_json(synth->spec);
  } else {
    args.insert(args.end(), {"--data", c.data});
    config["data"] = c.data;
  }

  json m{{"command", "train"},
         {"args", args},
         {"config", config},
         {"rounds", rounds_json(r.metrics)},
         {"epochs_run", r.metrics.rounds.size()},
         {"final_loss", r.metrics.final_loss},
         {"converged", r.metrics.converged},
         {"clamped", r.metrics.clamped},
         {"channel_bytes", r.metrics.channel_bytes},
         {"teardown_bytes", r.metrics.teardown_bytes},
         {"ratings", {{"train", train.nnz()}, {"test", test.nnz()}}},
         {"train_rmse", rmse(users, r.items, train)}};
  if (!test.empty()) {
    m["test_rmse"] = rmse(users, r.items, test);
    m["baseline_rmse"] = global_mean_rmse(train, test);
  }

  const fs::path dir = prepare_out(f.out);
  write_text(dir / "metrics.json", m.dump(2) + "\n");
  write_bench_csv(dir / "bench.csv", r.metrics);
  {
    std::ofstream os(dir / "v_final.bin", std::ios::binary);
    write_frame(os, model_frame(static_cast<std::uint32_t>(r.metrics.rounds.size()),
                                r.items));
  }
  out << "rounds " << r.metrics.rounds.size() << "  final loss "
      << repr(r.metrics.final_loss);
  if (m.contains("test_rmse")) {
    out << "  test rmse " << repr(m["test_rmse"].get<double>())
        << "  baseline " << repr(m["baseline_rmse"].get<double>());
  }
  out << "\nwrote " << (dir / "metrics.json").string() << "\n";
  return kExitOk;
}

// --- bench ----------------------------------------------------------------

struct BenchCmd {
  TrainFlags flags;
  std::string scenario;
  std::vector<std::size_t> source_list;
  std::vector<std::size_t> item_list;
  std::size_t per_source = 40;
};

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

json timing_json(const TimingPoint& p, std::size_t dim) {
  return {{"mode", std::string(to_string(p.mode))},
          {"sources", p.sources},
          {"items", p.items},
          {"median_round_ms", p.median_round_ms},
          {"round_bytes", p.round_bytes},
          {"expected_round_bytes", p.expected_bytes},
          {"share_payload_bytes", p.mode == Mode::kShared
                                      ? share_payload_bytes(p.sources, dim, p.items)
                                      : 0},
          {"rounds", rounds_json(p.metrics)},
          {"channel_bytes", p.metrics.channel_bytes}};
}

int cmd_bench(const BenchCmd& c, std::ostream& out) {
  const TrainFlags& f = c.flags;
  const bool scaling = c.scenario == "local-vs-distributed";
  const TrainConfig tc = make_train(f, 10, scaling ? 100 : 11);
  std::vector<std::size_t> srcs = c.source_list;
  std::vector<std::size_t> items = c.item_list;
  json runs = json::array();
  json config{{"scenario", c.scenario},
              {"train", train_json(tc)},
              {"frac_bits", f.frac_bits},
              {"transport", f.transport},
              {"threads", f.threads}};
  std::vector<std::string> args{"bench", c.scenario};
  const auto flag_args = train_flag_args(f, tc, false);
  args.insert(args.end(), flag_args.begin(), flag_args.end());
  const fs::path dir = prepare_out(f.out);
  std::string summary;

  if (scaling) {
    if (srcs.empty()) srcs = {1, 3, 5};
    ScalingSpec spec;
    spec.per_source = c.per_source;
    spec.train = tc;
    spec.frac_bits = f.frac_bits;
    spec.data.seed = f.seed;
    spec.data = parse_synthetic(f.synthetic, spec.data).spec;
    // Universe size follows from the source counts.
    spec.data.users = 0;
    if (!items.empty()) spec.data.items = items.front();
    const auto points = local_vs_distributed(spec, srcs);
    summary = "sources,users,ratings,mode,final_loss,train_mse\n";
    for (const ScalingPoint& p : points) {
      const std::string label = "T" + std::to_string(p.sources);
      runs.push_back({{"label", label},
                      {"sources", p.sources},
                      {"users", p.users},
                      {"ratings", p.ratings},
                      {"mode", std::string(to_string(p.mode))},
                      {"final_loss", p.final_loss},
                      {"train_mse", p.train_mse},
                      {"rounds", rounds_json(p.metrics)}});
      fs::create_directories(dir / label);
      write_bench_csv(dir / label / "bench.csv", p.metrics);
      summary += std::to_string(p.sources) + "," + std::to_string(p.users) +
                 "," + std::to_string(p.ratings) + "," +
                 std::string(to_string(p.mode)) + "," + repr(p.final_loss) +
                 "," + repr(p.train_mse) + "\n";
      out << label << "  users " << p.users << "  final loss "
          << repr(p.final_loss) << "\n";
    }
    config["per_source"] = spec.per_source;
    config["synthetic"] = synthetic_json(spec.data);
    args.insert(args.end(), {"--per-source", std::to_string(spec.per_source),
                             "--items", std::to_string(spec.data.items)});
    auto kv = synthetic_args(spec.data);
    kv.erase(kv.begin());  // n follows from --per-source
    args.push_back("--synthetic");
    args.insert(args.end(), kv.begin(), kv.end());
  } else {
    std::vector<TimingPoint> points;
    SyntheticSpec data;
    const bool horizontal = c.scenario == "horizontal";
    if (horizontal) {
      if (srcs.empty()) srcs = {2, 3, 4, 5};
      HorizontalSpec spec;
      spec.train = tc;
      spec.frac_bits = f.frac_bits;
      spec.transport = parse_transport(f.transport);
      spec.threading = parse_threads(f.threads);
      spec.data.seed = f.seed;
      spec.data = parse_synthetic(f.synthetic, spec.data).spec;
      if (!items.empty()) spec.data.items = items.front();
      data = spec.data;
      points = horizontal_bench(spec, srcs);
    } else {
      if (srcs.empty()) srcs = {3, 5};
      if (items.empty()) items = {50, 200, 500};
      VerticalSpec spec;
      spec.train = tc;
      spec.frac_bits = f.frac_bits;
      spec.transport = parse_transport(f.transport);
      spec.threading = parse_threads(f.threads);
      spec.data.seed = f.seed;
      spec.data = parse_synthetic(f.synthetic, spec.data).spec;
      data = spec.data;
      points = vertical_bench(spec, srcs, items);
    }
    summary = "mode,sources,items,median_round_ms,round_bytes,expected_round_bytes\n";
    for (const TimingPoint& p : points) {
      const std::string label = "T" + std::to_string(p.sources) + "_m" +
                                std::to_string(p.items) + "_" +
                                std::string(to_string(p.mode));
      json j = timing_json(p, tc.dim);
      j["label"] = label;
      runs.push_back(j);
      fs::create_directories(dir / label);
      write_bench_csv(dir / label / "bench.csv", p.metrics);
      summary += std::string(to_string(p.mode)) + "," +
                 std::to_string(p.sources) + "," + std::to_string(p.items) +
                 "," + repr(p.median_round_ms) + "," +
                 std::to_string(p.round_bytes) + "," +
                 std::to_string(p.expected_bytes) + "\n";
      out << label << "  median " << repr(p.median_round_ms) << " ms  bytes "
          << p.round_bytes << " (expected " << p.expected_bytes << ")\n";
    }
    config["synthetic"] = synthetic_json(data);
    if (horizontal) {
      args.insert(args.end(), {"--items", std::to_string(data.items)});
    } else {
      args.insert(args.end(), {"--items", join(items)});
    }
    auto kv = synthetic_args(data);
    if (!horizontal) kv.erase(kv.begin() + 1);  // m comes from --items
    args.push_back("--synthetic");
    args.insert(args.end(), kv.begin(), kv.end());
  }
  config["sources"] = srcs;
  args.insert(args.end(), {"--sources", join(srcs)});

  json report{{"command", "bench"},
              {"experiment", c.scenario},
              {"args", args},
              {"config", config},
              {"runs", runs}};
  write_text(dir / "metrics.json", report.dump(2) + "\n");
  write_text(dir / "summary.csv", summary);
  out << "wrote " << (dir / "metrics.json").string() << "\n";
  return kExitOk;
}

// --- attack ---------------------------------------------------------------

struct AttackCmd {
  std::string mode = "both";
  std::uint64_t seed = 1;
  std::size_t items = 20;
  std::size_t dim = 5;
  double reg_v = 0.0;
  std::string out = ".";
  bool expect_leak = false;
  std::string from_capture;
  std::string knowledge;
};

inline constexpr double kLeakThreshold = 1e-4;

json knowledge_json(const AttackKnowledge& k) {
  json truth = json::object();
  for (const auto& [item, r] : k.truth) truth[std::to_string(item)] = r;
  json j{{"target_sender", k.target_sender},
         {"user_profile", k.user_profile},
         {"gradient_scale", k.gradient_scale},
         {"reg_weight", k.reg_weight},
         {"reg_item", k.reg_item},
         {"truth", truth}};
  if (k.round) j["round"] = *k.round;
  return j;
}

AttackKnowledge knowledge_from_json(const json& j) {
  AttackKnowledge k;
  k.target_sender = j.at("target_sender").get<std::uint32_t>();
  if (j.contains("round")) k.round = j.at("round").get<std::uint32_t>();
  k.user_profile = j.at("user_profile").get<std::vector<double>>();
  k.gradient_scale = j.value("gradient_scale", 1.0);
  k.reg_weight = j.value("reg_weight", 1.0);
  k.reg_item = j.value("reg_item", 0.0);
  if (j.contains("truth")) {
    for (const auto& [item, r] : j.at("truth").items()) {
      k.truth[parse_number<std::size_t>("truth item", item)] = r.get<double>();
    }
  }
  return k;
}

json report_json(const AttackReport& r) {
  json rec = json::array();
  for (const RecoveredRating& x : r.recovered) {
    rec.push_back({{"item", x.item}, {"recovered", x.recovered}, {"truth", x.truth}});
  }
  return {{"round", r.round},
          {"sender", r.sender},
          {"frame_type", std::string(to_string(r.frame_type))},
          {"nonzero_columns", r.nonzero_columns},
          {"mean_abs_error", r.mean_abs_error},
          {"pivot_spread", r.pivot_spread},
          {"recovered", rec}};
}

int cmd_attack(const AttackCmd& c, std::ostream& out, std::ostream& err) {
  const fs::path dir = prepare_out(c.out);
  json results = json::object();
  if (!c.from_capture.empty()) {
    if (!fs::exists(c.from_capture)) {
      throw UsageError("no such capture file: " + c.from_capture);
    }
    if (c.knowledge.empty()) throw UsageError("--from-capture needs --knowledge");
    if (!fs::exists(c.knowledge)) {
      throw UsageError("no such knowledge file: " + c.knowledge);
    }
    std::ifstream ks(c.knowledge);
    json kj;
    try {
      kj = json::parse(ks);
    } catch (const json::exception& e) {
      throw UsageError("bad knowledge file: " + std::string(e.what()));
    }
    std::ifstream cs(c.from_capture, std::ios::binary);
    const std::vector<Frame> frames = read_frames(cs);
    results["capture"] = report_json(attack_trace(frames, knowledge_from_json(kj)));
  } else {
    std::vector<Mode> modes;
    if (c.mode != "shared") modes.push_back(Mode::kPlain);
    if (c.mode != "plain") modes.push_back(Mode::kShared);
    AttackDemoSpec spec;
    spec.items = c.items;
    spec.dim = c.dim;
    spec.reg_item = c.reg_v;
    spec.seed = c.seed;
    for (Mode m : modes) {
      const AttackDemoResult r = run_attack_demo(m, spec);
      const std::string name(to_string(m));
      {
        std::ofstream os(dir / ("capture_" + name + ".bin"), std::ios::binary);
        for (const Frame& fr : r.capture) write_frame(os, fr);
      }
      write_text(dir / ("knowledge_" + name + ".json"),
                 knowledge_json(r.knowledge).dump(2) + "\n");
      results[name] = report_json(r.report);
    }
  }

  bool leaked_all = true;
  for (const auto& [name, r] : results.items()) {
    const double e = r.at("mean_abs_error").get<double>();
    leaked_all = leaked_all && e < kLeakThreshold;
    out << name << "  " << r.at("frame_type").get<std::string>()
        << "  mean abs error " << repr(e) << "\n";
  }
  json report{{"command", "attack"},
              {"config", {{"mode", c.mode},
                          {"seed", c.seed},
                          {"items", c.items},
                          {"dim", c.dim},
                          {"reg_v", c.reg_v}}},
              {"leak_threshold", kLeakThreshold},
              {"results", results}};
  write_text(dir / "attack.json", report.dump(2) + "\n");
  if (c.expect_leak && !leaked_all) {
    err << "expected a leak: some attacked capture has mean abs error >= "
        << repr(kLeakThreshold) << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

std::vector<std::size_t> parse_list(const std::string& key,
                                    const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    out.push_back(parse_number<std::size_t>(key, text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Federated matrix factorization with additive secret sharing"};
  app.require_subcommand(1);

  TrainCmd train;
  CLI::App* train_app = app.add_subcommand("train", "train a model");
  add_train_flags(train_app, train.flags, true);
  auto* data_opt = train_app->add_option("--data", train.data, "MovieLens u.data path");
  auto* synth_opt =
      train_app->add_option("--synthetic", train.flags.synthetic,
                            "synthetic data, key=value: n m d noise fill offset seed")
          ->expected(0, -1);
  data_opt->excludes(synth_opt);
  train_app->add_option("--users", train.max_users, "keep the first N users by index");
  train_app->add_option("--items", train.max_items, "keep the first M items by index");
  train_app->add_option("--train-fraction", train.train_fraction,
                        "entry-level train share")
      ->capture_default_str();

  BenchCmd bench;
  std::string bench_sources, bench_items;
  CLI::App* bench_app = app.add_subcommand("bench", "run a benchmark scenario");
  bench_app->add_option("scenario", bench.scenario,
                        "local-vs-distributed, horizontal or vertical")
      ->required()
      ->check(CLI::IsMember({"local-vs-distributed", "horizontal", "vertical"}));
  add_train_flags(bench_app, bench.flags, false);
  bench_app->remove_option(bench_app->get_option("--sources"));
  bench_app->add_option("--sources", bench_sources, "comma-separated source counts");
  bench_app->add_option("--items", bench_items, "item count(s), comma-separated");
  bench_app->add_option("--per-source", bench.per_source,
                        "users added per source (local-vs-distributed)")
      ->capture_default_str();
  bench_app->add_option("--synthetic", bench.flags.synthetic,
                        "synthetic overrides, key=value")
      ->expected(0, -1);

  AttackCmd attack;
  CLI::App* attack_app = app.add_subcommand("attack", "gradient leakage demo");
  attack_app->add_option("--mode", attack.mode, "plain, shared or both")
      ->check(CLI::IsMember({"plain", "shared", "both"}))
      ->capture_default_str();
  attack_app->add_option("--seed", attack.seed)->capture_default_str();
  attack_app->add_option("--items", attack.items, "items rated by the target")
      ->capture_default_str();
  attack_app->add_option("--dim", attack.dim)->capture_default_str();
  attack_app->add_option("--reg-v", attack.reg_v)->capture_default_str();
  attack_app->add_option("--out", attack.out)->capture_default_str();
  attack_app->add_flag("--expect-leak", attack.expect_leak,
                       "exit 1 unless every attacked capture leaks");
  attack_app->add_option("--from-capture", attack.from_capture,
                         "attack a saved frame capture");
  attack_app->add_option("--knowledge", attack.knowledge,
                         "attacker knowledge JSON for --from-capture");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_app) return cmd_train(train, synth_opt->count() > 0, out);
    if (*bench_app) {
      if (!bench_sources.empty()) bench.source_list = parse_list("--sources", bench_sources);
      if (!bench_items.empty()) bench.item_list = parse_list("--items", bench_items);
      return cmd_bench(bench, out);
    }
    return cmd_attack(attack, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace sharedmf::cli
