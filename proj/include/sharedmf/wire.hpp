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

// Binary frame format shared by the socket transport, capture files and the
// final model dump. All integers little-endian:
//
//   magic "SMF1" | version u8 | msg_type u8 | round u32 | sender_id u32 |
//   frac_bits u8 | rows u32 | cols u32 | rows*cols u64 words, row-major
//
// ModelBroadcast frames carry IEEE-754 binary64 bit patterns and set
// frac_bits to 0; every other payload-bearing frame carries fixed-point
// ring elements.

#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "sharedmf/fixed_point.hpp"
#include "sharedmf/matrix.hpp"

namespace sharedmf {

enum class MsgType : std::uint8_t {
  kModelBroadcast = 1,
  kShareExchange = 2,
  kHybridGradient = 3,
  kPlainGradient = 4,
  kDone = 5,
};

std::string_view to_string(MsgType t);

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 23;
inline constexpr std::uint32_t kServerId = 0xFFFFFFFFu;
inline constexpr unsigned kFloatPayloadFracBits = 0;

struct Frame {
  MsgType type = MsgType::kDone;
  std::uint32_t round = 0;
  std::uint32_t sender = 0;
  std::uint8_t frac_bits = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint64_t> words;

  std::size_t encoded_size() const noexcept {
    return kFrameHeaderBytes + 8 * words.size();
  }

  friend bool operator==(const Frame&, const Frame&) = default;
};

constexpr std::size_t frame_bytes(std::size_t rows, std::size_t cols) {
  return kFrameHeaderBytes + 8 * rows * cols;
}

struct FrameHeader {
  MsgType type;
  std::uint32_t round;
  std::uint32_t sender;
  std::uint8_t frac_bits;
  std::uint32_t rows;
  std::uint32_t cols;

  std::size_t payload_bytes() const noexcept {
    return 8 * static_cast<std::size_t>(rows) * cols;
  }
};

void append_frame(std::vector<std::uint8_t>& out, const Frame& f);
std::vector<std::uint8_t> serialize(const Frame& f);

/// Throws ProtocolError on bad magic, version or message type.
FrameHeader parse_header(std::span<const std::uint8_t> bytes);

/// Parses one frame from the front of `bytes`; sets `consumed`.
/// Throws ProtocolError on malformed or truncated input.
Frame parse_frame(std::span<const std::uint8_t> bytes, std::size_t& consumed);

/// Parses a concatenation of frames with no extra framing.
std::vector<Frame> parse_frames(std::span<const std::uint8_t> bytes);

void write_frame(std::ostream& os, const Frame& f);
std::vector<Frame> read_frames(std::istream& is);

Frame block_frame(MsgType type, std::uint32_t round, std::uint32_t sender,
                  const FixedPointBlock& block);
/// Throws ProtocolError if the frame does not hold a valid fixed-point block.
FixedPointBlock frame_block(const Frame& f);

Frame model_frame(std::uint32_t round, const FactorMatrix& items);
/// Throws ProtocolError unless f is a ModelBroadcast frame.
FactorMatrix frame_model(const Frame& f);

Frame done_frame(std::uint32_t round);

}  // namespace sharedmf
