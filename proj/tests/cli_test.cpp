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

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sharedmf/experiments.hpp"
#include "sharedmf/wire.hpp"

namespace sharedmf::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("sharedmf_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run_cli(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(args, out_, err_);
  }

  std::string out(const std::string& sub) const { return (dir_ / sub).string(); }

  static json read_json(const fs::path& p) {
    std::ifstream is(p);
    return json::parse(is);
  }
  static std::string read_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const std::vector<std::string> kSmallTrain{
    "train", "--synthetic", "n=60", "m=40", "d=5", "--sources", "3", "--seed", "1"};

std::vector<std::string> with(std::vector<std::string> base,
                              std::initializer_list<std::string> extra) {
  base.insert(base.end(), extra);
  return base;
}

TEST_F(CliTest, TrainWritesMetricsWithDescendingLoss) {
  ASSERT_EQ(run_cli(with(kSmallTrain, {"--mode", "shared", "--out", out("s")})),
            kExitOk)
      << err_.str();
  const json m = read_json(dir_ / "s" / "metrics.json");
  const auto& rounds = m.at("rounds");
  ASSERT_EQ(rounds.size(), 100u);
  EXPECT_LT(rounds.back().at("loss").get<double>(),
            rounds.front().at("loss").get<double>());
  EXPECT_EQ(m.at("config").at("train").at("dim"), 5);  // from --synthetic d=5
  EXPECT_TRUE(m.contains("test_rmse"));
  const std::string csv = read_bytes(dir_ / "s" / "bench.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "round,loss,wall_ms,bytes");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 101);
}

TEST_F(CliTest, PlainAndSharedFinalModelsAreByteIdentical) {
  ASSERT_EQ(run_cli(with(kSmallTrain, {"--mode", "shared", "--out", out("s")})),
            kExitOk);
  ASSERT_EQ(run_cli(with(kSmallTrain, {"--mode", "plain", "--out", out("p")})),
            kExitOk);
  const std::string s = read_bytes(dir_ / "s" / "v_final.bin");
  EXPECT_EQ(s, read_bytes(dir_ / "p" / "v_final.bin"));
  const std::vector<std::uint8_t> bytes(s.begin(), s.end());
  const std::vector<Frame> frames = parse_frames(bytes);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].type, MsgType::kModelBroadcast);
  EXPECT_EQ(frame_model(frames[0]).rows(), 5u);
  EXPECT_EQ(frame_model(frames[0]).cols(), 40u);
}

TEST_F(CliTest, ConfigEchoReproducesLossSeries) {
  ASSERT_EQ(run_cli(with(kSmallTrain, {"--epochs", "30", "--out", out("a")})), kExitOk);
  const json a = read_json(dir_ / "a" / "metrics.json");
  std::vector<std::string> args = a.at("args").get<std::vector<std::string>>();
  args.insert(args.end(), {"--out", out("b")});
  ASSERT_EQ(run_cli(args), kExitOk) << err_.str();
  const json b = read_json(dir_ / "b" / "metrics.json");
  ASSERT_EQ(a.at("rounds").size(), b.at("rounds").size());
  for (std::size_t i = 0; i < a.at("rounds").size(); ++i) {
    EXPECT_EQ(a["rounds"][i]["loss"].get<double>(), b["rounds"][i]["loss"].get<double>());
  }
  EXPECT_EQ(a.at("config"), b.at("config"));
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run_cli({"train", "--synthetic", "--sources", "1", "--mode", "shared",
                     "--out", out("x")}),
            kExitUsage);
  EXPECT_NE(err_.str().find("2 sources"), std::string::npos);
  EXPECT_EQ(run_cli({"train", "--out", out("x")}), kExitUsage);
  EXPECT_EQ(run_cli({"train", "--synthetic", "k=1", "--out", out("x")}), kExitUsage);
  EXPECT_EQ(run_cli({"train", "--synthetic", "--mode", "secret"}), kExitUsage);
  EXPECT_EQ(run_cli({"train", "--synthetic", "--data", "x"}), kExitUsage);
  EXPECT_EQ(run_cli({"train", "--data", out("missing.data")}), kExitUsage);
  EXPECT_EQ(run_cli({}), kExitUsage);
  EXPECT_EQ(run_cli({"bench", "diagonal"}), kExitUsage);
  EXPECT_EQ(run_cli({"train", "--help"}), kExitOk);
}

TEST_F(CliTest, DivergenceExitsOne) {
  EXPECT_EQ(run_cli({"train", "--synthetic", "n=20", "m=10", "--dim", "3", "--lr",
                     "10", "--out", out("d")}),
            kExitFailure);
  EXPECT_NE(err_.str().find("diverged"), std::string::npos);
}

TEST_F(CliTest, TrainOnMovieLensFile) {
  {
    std::ofstream os(dir_ / "u.data");
    for (int u = 1; u <= 12; ++u) {
      for (int i = 1; i <= 8; ++i) {
        if ((u + i) % 3) os << u << '\t' << 100 + i << '\t' << 1 + (u * i) % 5 << "\t0\n";
      }
    }
  }
  ASSERT_EQ(run_cli({"train", "--data", (dir_ / "u.data").string(), "--dim", "3",
                     "--epochs", "20", "--out", out("ml")}),
            kExitOk)
      << err_.str();
  const json m = read_json(dir_ / "ml" / "metrics.json");
  EXPECT_EQ(m.at("ratings").at("train").get<std::size_t>() +
                m.at("ratings").at("test").get<std::size_t>(),
            64u);
  EXPECT_TRUE(m.contains("baseline_rmse"));
}

TEST_F(CliTest, VerticalBenchBytesMatchClosedForm) {
  ASSERT_EQ(run_cli({"bench", "vertical", "--items", "10,30", "--sources", "3",
                     "--epochs", "6", "--dim", "4", "--out", out("v")}),
            kExitOk)
      << err_.str();
  const json m = read_json(dir_ / "v" / "metrics.json");
  ASSERT_EQ(m.at("runs").size(), 2u);
  for (const json& r : m.at("runs")) {
    const std::size_t items = r.at("items");
    EXPECT_EQ(r.at("round_bytes"), r.at("expected_round_bytes"));
    EXPECT_EQ(r.at("round_bytes").get<std::size_t>(),
              expected_round_bytes(Mode::kShared, 3, 4, items));
    EXPECT_EQ(r.at("share_payload_bytes").get<std::size_t>(), 3 * 3 * 4 * items * 8);
    EXPECT_TRUE(fs::exists(dir_ / "v" / r.at("label").get<std::string>() / "bench.csv"));
  }
  EXPECT_TRUE(fs::exists(dir_ / "v" / "summary.csv"));
}

TEST_F(CliTest, LocalVsDistributedBenchReportsEveryT) {
  ASSERT_EQ(run_cli({"bench", "local-vs-distributed", "--sources", "1,2",
                     "--per-source", "10", "--items", "20", "--epochs", "10",
                     "--out", out("l")}),
            kExitOk)
      << err_.str();
  const json m = read_json(dir_ / "l" / "metrics.json");
  ASSERT_EQ(m.at("runs").size(), 2u);
  EXPECT_EQ(m["runs"][0]["users"], 10);
  EXPECT_EQ(m["runs"][1]["users"], 20);
  EXPECT_EQ(m["runs"][1]["mode"], "shared");
}

TEST_F(CliTest, AttackDemoAndGuardFlag) {
  ASSERT_EQ(run_cli({"attack", "--out", out("a")}), kExitOk) << err_.str();
  const json m = read_json(dir_ / "a" / "attack.json");
  EXPECT_LT(m["results"]["plain"]["mean_abs_error"].get<double>(), 1e-4);
  EXPECT_GE(m["results"]["shared"]["mean_abs_error"].get<double>(), 0.5);
  EXPECT_EQ(run_cli({"attack", "--mode", "shared", "--expect-leak", "--out", out("b")}),
            kExitFailure);
  EXPECT_EQ(run_cli({"attack", "--mode", "plain", "--expect-leak", "--out", out("c")}),
            kExitOk);
}

TEST_F(CliTest, AttackFromSavedCapture) {
  ASSERT_EQ(run_cli({"attack", "--mode", "plain", "--out", out("a")}), kExitOk);
  ASSERT_EQ(run_cli({"attack", "--from-capture", out("a/capture_plain.bin"),
                     "--knowledge", out("a/knowledge_plain.json"), "--out", out("r")}),
            kExitOk)
      << err_.str();
  const json a = read_json(dir_ / "a" / "attack.json");
  const json r = read_json(dir_ / "r" / "attack.json");
  EXPECT_EQ(a["results"]["plain"]["mean_abs_error"], r["results"]["capture"]["mean_abs_error"]);
  EXPECT_EQ(run_cli({"attack", "--from-capture", out("none.bin"), "--knowledge",
                     out("a/knowledge_plain.json")}),
            kExitUsage);
  EXPECT_EQ(run_cli({"attack", "--from-capture"}), kExitUsage);
  EXPECT_EQ(run_cli({"attack", "--from-capture", out("a/capture_plain.bin")}),
            kExitUsage);
}

}  // namespace
}  // namespace sharedmf::cli
