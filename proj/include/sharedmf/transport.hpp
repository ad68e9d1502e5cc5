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

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "sharedmf/wire.hpp"

namespace sharedmf {

enum class TransportKind { kMemory, kSocket };

/// One-directional, order-preserving frame pipe between two parties.
/// send() never blocks on the receiver; receive() blocks up to a timeout.
class Channel {
 public:
  using Tap = std::function<void(std::span<const std::uint8_t>)>;

  explicit Channel(std::string name) : name_(std::move(name)) {}
  virtual ~Channel() = default;
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  void send(const Frame& f);
  // Throws TransportError on timeout or once the channel is closed and
  // drained.
  Frame receive(std::chrono::milliseconds timeout);
  // Wakes blocked receivers; later receives on an empty channel fail fast.
  virtual void close() = 0;

  const std::string& name() const noexcept { return name_; }
  std::size_t bytes_sent() const noexcept { return bytes_sent_.load(); }
  std::size_t frames_sent() const noexcept { return frames_sent_.load(); }

  // Observes the serialized bytes of every frame sent after this call.
  void set_tap(Tap tap);

 protected:
  virtual void do_send(const Frame& f) = 0;
  virtual Frame do_receive(std::chrono::milliseconds timeout) = 0;

 private:
  std::string name_;
  std::atomic<std::size_t> bytes_sent_{0};
  std::atomic<std::size_t> frames_sent_{0};
  std::mutex tap_mu_;
  Tap tap_;
};

std::unique_ptr<Channel> make_memory_channel(std::string name);
// Loopback TCP connection; frames are written in the wire format.
std::unique_ptr<Channel> make_socket_channel(std::string name);

/// All channels of one training run: server <-> each source, and a full mesh
/// between sources for share exchange.
class Network {
 public:
  Network(std::size_t sources, TransportKind kind, bool peer_mesh);

  std::size_t sources() const noexcept { return sources_; }
  Channel& to_server(std::size_t source) { return *up_.at(source); }
  Channel& from_server(std::size_t source) { return *down_.at(source); }
  // Channel carrying frames from source `from` to source `to`.
  Channel& peer(std::size_t from, std::size_t to);

  std::size_t total_bytes() const;
  std::vector<const Channel*> channels() const;
  Channel* find(const std::string& name);
  void close_all();

  static std::string up_name(std::size_t s);
  static std::string down_name(std::size_t s);
  static std::string peer_name(std::size_t from, std::size_t to);

 private:
  std::size_t sources_;
  std::vector<std::unique_ptr<Channel>> up_;
  std::vector<std::unique_ptr<Channel>> down_;
  // Row-major sources x sources; diagonal entries stay null.
  std::vector<std::unique_ptr<Channel>> mesh_;
};

}  // namespace sharedmf
