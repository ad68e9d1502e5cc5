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

#include "sharedmf/sharing.hpp"

#include <sodium.h>

#include <cstring>
#include <string>

#include "sharedmf/errors.hpp"

namespace sharedmf {

namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw Error("libsodium initialization failed");
}

void store_le64(unsigned char* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint64_t load_le64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

ChaChaWordSource::ChaChaWordSource() {
  ensure_sodium();
  randombytes_buf(key_.data(), key_.size());
}

ChaChaWordSource::ChaChaWordSource(std::uint64_t seed, std::uint64_t stream) {
  ensure_sodium();
  // Key = BLAKE2b(label || seed || stream), so distinct (seed, stream) pairs
  // give unrelated keystreams.
  static constexpr char kLabel[] = "sharedmf-share-rng-v1";
  unsigned char material[sizeof(kLabel) + 16];
  std::memcpy(material, kLabel, sizeof(kLabel));
  store_le64(material + sizeof(kLabel), seed);
  store_le64(material + sizeof(kLabel) + 8, stream);
  crypto_generichash(key_.data(), key_.size(), material, sizeof(material),
                     nullptr, 0);
}

void ChaChaWordSource::fill(std::span<std::uint64_t> out) {
  if (out.empty()) return;
  std::vector<unsigned char> bytes(out.size() * 8);
  unsigned char nonce[crypto_stream_chacha20_NONCEBYTES];
  store_le64(nonce, nonce_++);
  crypto_stream_chacha20(bytes.data(), bytes.size(), nonce, key_.data());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = load_le64(bytes.data() + 8 * i);
  }
}

ShareSet split_shares(const FixedPointBlock& plain, std::size_t parties,
                      WordSource& rng) {
  if (parties < 2) {
    throw ConfigError("secret sharing needs at least 2 parties, got " +
                      std::to_string(parties));
  }
  ShareSet set;
  set.shares.reserve(parties);
  FixedPointBlock last = plain;
  for (std::size_t p = 0; p + 1 < parties; ++p) {
    FixedPointBlock share(plain.rows(), plain.cols(), plain.frac_bits());
    rng.fill(share.words());
    auto l = last.words();
    auto s = share.words();
    for (std::size_t i = 0; i < l.size(); ++i) l[i] -= s[i];
    set.shares.push_back(std::move(share));
  }
  set.shares.push_back(std::move(last));
  return set;
}

ShareSet split_shares(const FixedPointBlock& plain, std::size_t parties,
                      std::uint64_t rng_seed) {
  ChaChaWordSource rng(rng_seed);
  return split_shares(plain, parties, rng);
}

FixedPointBlock combine_shares(std::span<const FixedPointBlock> blocks) {
  if (blocks.empty()) throw DegenerateInputError("no shares to combine");
  FixedPointBlock acc = blocks.front();
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    ring_add_into(acc, blocks[i]);
  }
  return acc;
}

}  // namespace sharedmf
