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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sharedmf/fixed_point.hpp"

namespace sharedmf {

/// Source of uniformly random 64-bit ring elements.
class WordSource {
 public:
  virtual ~WordSource() = default;
  virtual void fill(std::span<std::uint64_t> out) = 0;
};

/// ChaCha20 keystream (libsodium). Seeded instances are reproducible, which
/// the tests rely on; the default constructor keys from OS entropy.
///
/// One instance belongs to one party and is not thread-safe.
class ChaChaWordSource final : public WordSource {
 public:
  ChaChaWordSource();
  explicit ChaChaWordSource(std::uint64_t seed, std::uint64_t stream = 0);

  void fill(std::span<std::uint64_t> out) override;

 private:
  std::array<unsigned char, 32> key_{};
  std::uint64_t nonce_ = 0;
};

/// T blocks whose ring sum is the plaintext encoding.
struct ShareSet {
  std::vector<FixedPointBlock> shares;

  std::size_t parties() const noexcept { return shares.size(); }
};

/// Shares 0..T-2 are uniform over the ring; share T-1 is plain minus their
/// sum. Throws ConfigError when T < 2.
ShareSet split_shares(const FixedPointBlock& plain, std::size_t parties,
                      WordSource& rng);
ShareSet split_shares(const FixedPointBlock& plain, std::size_t parties,
                      std::uint64_t rng_seed);

/// Elementwise ring sum. Throws ShapeError on mismatched shape or f, and
/// DegenerateInputError on an empty list.
FixedPointBlock combine_shares(std::span<const FixedPointBlock> blocks);
inline FixedPointBlock combine_shares(const ShareSet& set) {
  return combine_shares(std::span<const FixedPointBlock>(set.shares));
}

}  // namespace sharedmf
