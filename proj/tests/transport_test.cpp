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

#include "sharedmf/transport.hpp"

#include <gtest/gtest.h>

#include <thread>

#include "sharedmf/errors.hpp"

namespace sharedmf {
namespace {

using namespace std::chrono_literals;

class ChannelTest : public ::testing::TestWithParam<TransportKind> {
 protected:
  std::unique_ptr<Channel> make(std::string name) {
    return GetParam() == TransportKind::kMemory ? make_memory_channel(std::move(name))
                                                : make_socket_channel(std::move(name));
  }
};

Frame numbered(std::uint32_t k, std::size_t words = 3) {
  Frame f;
  f.type = MsgType::kPlainGradient;
  f.round = k;
  f.sender = k * 7;
  f.frac_bits = 24;
  f.rows = 1;
  f.cols = static_cast<std::uint32_t>(words);
  f.words.assign(words, k);
  return f;
}

TEST_P(ChannelTest, PreservesOrder) {
  auto ch = make("a->b");
  for (std::uint32_t k = 0; k < 50; ++k) ch->send(numbered(k));
  for (std::uint32_t k = 0; k < 50; ++k) EXPECT_EQ(ch->receive(5s), numbered(k));
  EXPECT_EQ(ch->frames_sent(), 50u);
  EXPECT_EQ(ch->bytes_sent(), 50 * frame_bytes(1, 3));
  EXPECT_EQ(ch->name(), "a->b");
}

TEST_P(ChannelTest, LargeFrameFromOneThread) {
  // Bigger than any socket buffer; send must not wait for the reader.
  auto ch = make("big");
  const Frame f = numbered(1, 1 << 20);
  ch->send(f);
  ch->send(numbered(2));
  EXPECT_EQ(ch->receive(30s), f);
  EXPECT_EQ(ch->receive(5s), numbered(2));
}

TEST_P(ChannelTest, ConcurrentSenderReceiver) {
  auto ch = make("x");
  std::thread producer([&] {
    for (std::uint32_t k = 0; k < 200; ++k) ch->send(numbered(k, 100));
  });
  for (std::uint32_t k = 0; k < 200; ++k) ASSERT_EQ(ch->receive(10s).round, k);
  producer.join();
}

TEST_P(ChannelTest, TimeoutAndClose) {
  auto ch = make("t");
  EXPECT_THROW(ch->receive(50ms), TransportError);
  std::thread closer([&] {
    std::this_thread::sleep_for(50ms);
    ch->close();
  });
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(ch->receive(20s), TransportError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 10s);
  closer.join();
  EXPECT_THROW(ch->send(numbered(0)), TransportError);
}

TEST_P(ChannelTest, TapSeesSerializedBytes) {
  auto ch = make("tap");
  std::vector<std::uint8_t> seen;
  ch->set_tap([&](std::span<const std::uint8_t> b) { seen.insert(seen.end(), b.begin(), b.end()); });
  ch->send(numbered(4));
  EXPECT_EQ(seen, serialize(numbered(4)));
}

INSTANTIATE_TEST_SUITE_P(Kinds, ChannelTest,
                         ::testing::Values(TransportKind::kMemory, TransportKind::kSocket),
                         [](const auto& info) {
                           return info.param == TransportKind::kMemory ? "Memory" : "Socket";
                         });

TEST(NetworkTest, TopologyAndNames) {
  Network net(3, TransportKind::kMemory, true);
  EXPECT_EQ(net.to_server(1).name(), "source1->server");
  EXPECT_EQ(net.from_server(2).name(), "server->source2");
  EXPECT_EQ(net.peer(0, 2).name(), "source0->source2");
  EXPECT_THROW(net.peer(1, 1), std::exception);
  EXPECT_EQ(net.channels().size(), 3u + 3u + 6u);
  EXPECT_EQ(net.find("source2->source1"), &net.peer(2, 1));
  EXPECT_EQ(net.find("nope"), nullptr);
  net.peer(0, 1).send(numbered(1));
  net.to_server(0).send(numbered(1));
  EXPECT_EQ(net.total_bytes(), 2 * frame_bytes(1, 3));
}

TEST(NetworkTest, NoMeshInPlainMode) {
  Network net(2, TransportKind::kMemory, false);
  EXPECT_EQ(net.channels().size(), 4u);
  EXPECT_THROW(net.peer(0, 1), std::exception);
}

}  // namespace
}  // namespace sharedmf
