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

#include "sharedmf/wire.hpp"

#include <bit>
#include <iterator>
#include <limits>
#include <string>

#include "sharedmf/errors.hpp"

namespace sharedmf {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'M', 'F', '1'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) v = static_cast<T>((v << 8) | p[i]);
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw ProtocolError(std::string(what) + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::kModelBroadcast: return "ModelBroadcast";
    case MsgType::kShareExchange: return "ShareExchange";
    case MsgType::kHybridGradient: return "HybridGradient";
    case MsgType::kPlainGradient: return "PlainGradient";
    case MsgType::kDone: return "Done";
  }
  return "Unknown";
}

void append_frame(std::vector<std::uint8_t>& out, const Frame& f) {
  if (f.words.size() != static_cast<std::size_t>(f.rows) * f.cols) {
    throw ProtocolError("frame payload length does not match rows x cols");
  }
  out.reserve(out.size() + f.encoded_size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kWireVersion);
  out.push_back(static_cast<std::uint8_t>(f.type));
  put_le(out, f.round);
  put_le(out, f.sender);
  out.push_back(f.frac_bits);
  put_le(out, f.rows);
  put_le(out, f.cols);
  for (std::uint64_t w : f.words) put_le(out, w);
}

std::vector<std::uint8_t> serialize(const Frame& f) {
  std::vector<std::uint8_t> out;
  append_frame(out, f);
  return out;
}

FrameHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) {
    throw ProtocolError("truncated frame header");
  }
  const std::uint8_t* p = bytes.data();
  for (int i = 0; i < 4; ++i) {
    if (p[i] != kMagic[i]) throw ProtocolError("bad frame magic");
  }
  if (p[4] != kWireVersion) {
    throw ProtocolError("unsupported frame version " + std::to_string(p[4]));
  }
  const std::uint8_t type = p[5];
  if (type < 1 || type > 5) {
    throw ProtocolError("unknown message type " + std::to_string(type));
  }
  FrameHeader h;
  h.type = static_cast<MsgType>(type);
  h.round = get_le<std::uint32_t>(p + 6);
  h.sender = get_le<std::uint32_t>(p + 10);
  h.frac_bits = p[14];
  h.rows = get_le<std::uint32_t>(p + 15);
  h.cols = get_le<std::uint32_t>(p + 19);
  return h;
}

Frame parse_frame(std::span<const std::uint8_t> bytes, std::size_t& consumed) {
  const FrameHeader h = parse_header(bytes);
  const std::size_t payload = h.payload_bytes();
  if (bytes.size() - kFrameHeaderBytes < payload) {
    throw ProtocolError("truncated frame payload");
  }
  Frame f;
  f.type = h.type;
  f.round = h.round;
  f.sender = h.sender;
  f.frac_bits = h.frac_bits;
  f.rows = h.rows;
  f.cols = h.cols;
  f.words.resize(payload / 8);
  const std::uint8_t* p = bytes.data() + kFrameHeaderBytes;
  for (std::size_t i = 0; i < f.words.size(); ++i) {
    f.words[i] = get_le<std::uint64_t>(p + 8 * i);
  }
  consumed = kFrameHeaderBytes + payload;
  return f;
}

std::vector<Frame> parse_frames(std::span<const std::uint8_t> bytes) {
  std::vector<Frame> out;
  while (!bytes.empty()) {
    std::size_t used = 0;
    out.push_back(parse_frame(bytes, used));
    bytes = bytes.subspan(used);
  }
  return out;
}

void write_frame(std::ostream& os, const Frame& f) {
  const auto bytes = serialize(f);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw TransportError("failed to write frame");
}

std::vector<Frame> read_frames(std::istream& is) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return parse_frames(bytes);
}

Frame block_frame(MsgType type, std::uint32_t round, std::uint32_t sender,
                  const FixedPointBlock& block) {
  Frame f;
  f.type = type;
  f.round = round;
  f.sender = sender;
  f.frac_bits = static_cast<std::uint8_t>(block.frac_bits());
  f.rows = checked_u32(block.rows(), "rows");
  f.cols = checked_u32(block.cols(), "cols");
  f.words.assign(block.words().begin(), block.words().end());
  return f;
}

FixedPointBlock frame_block(const Frame& f) {
  if (f.type == MsgType::kModelBroadcast || f.type == MsgType::kDone) {
    throw ProtocolError(std::string(to_string(f.type)) +
                        " frame carries no fixed-point block");
  }
  if (f.frac_bits < kMinFracBits || f.frac_bits > kMaxFracBits) {
    throw ProtocolError("frame frac_bits " + std::to_string(f.frac_bits) +
                        " out of range");
  }
  if (f.words.size() != static_cast<std::size_t>(f.rows) * f.cols) {
    throw ProtocolError("frame payload length does not match its shape");
  }
  return FixedPointBlock(f.rows, f.cols, f.frac_bits, f.words);
}

Frame model_frame(std::uint32_t round, const FactorMatrix& items) {
  Frame f;
  f.type = MsgType::kModelBroadcast;
  f.round = round;
  f.sender = kServerId;
  f.frac_bits = kFloatPayloadFracBits;
  f.rows = checked_u32(items.rows(), "rows");
  f.cols = checked_u32(items.cols(), "cols");
  f.words.reserve(items.size());
  for (double x : items.data()) f.words.push_back(std::bit_cast<std::uint64_t>(x));
  return f;
}

FactorMatrix frame_model(const Frame& f) {
  if (f.type != MsgType::kModelBroadcast) {
    throw ProtocolError("expected ModelBroadcast, got " +
                        std::string(to_string(f.type)));
  }
  if (f.frac_bits != kFloatPayloadFracBits) {
    throw ProtocolError("ModelBroadcast frame must have frac_bits 0");
  }
  if (f.words.size() != static_cast<std::size_t>(f.rows) * f.cols) {
    throw ProtocolError("frame payload length does not match its shape");
  }
  std::vector<double> data;
  data.reserve(f.words.size());
  for (std::uint64_t w : f.words) data.push_back(std::bit_cast<double>(w));
  return FactorMatrix(f.rows, f.cols, std::move(data));
}

Frame done_frame(std::uint32_t round) {
  Frame f;
  f.type = MsgType::kDone;
  f.round = round;
  f.sender = kServerId;
  return f;
}

}  // namespace sharedmf
