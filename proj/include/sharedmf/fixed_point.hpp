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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sharedmf/matrix.hpp"

namespace sharedmf {

inline constexpr unsigned kMinFracBits = 8;
inline constexpr unsigned kMaxFracBits = 40;
inline constexpr unsigned kDefaultFracBits = 24;

// Encoded magnitudes must stay strictly below 2^62 so that sums of a few
// blocks cannot wrap past the sign bit unnoticed.
inline constexpr std::uint64_t kHeadroomLimit = std::uint64_t{1} << 62;

/// Grid of ring elements (integers mod 2^64) holding reals scaled by 2^f.
/// Negative values use the two's-complement embedding.
class FixedPointBlock {
 public:
  FixedPointBlock() = default;
  FixedPointBlock(std::size_t rows, std::size_t cols, unsigned frac_bits);
  FixedPointBlock(std::size_t rows, std::size_t cols, unsigned frac_bits,
                  std::vector<std::uint64_t> words);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  unsigned frac_bits() const noexcept { return frac_bits_; }
  std::size_t size() const noexcept { return words_.size(); }

  std::span<std::uint64_t> words() noexcept { return words_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool same_layout(const FixedPointBlock& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_ && frac_bits_ == o.frac_bits_;
  }

  friend bool operator==(const FixedPointBlock&,
                         const FixedPointBlock&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  unsigned frac_bits_ = kDefaultFracBits;
  std::vector<std::uint64_t> words_;
};

// Throws ConfigError unless f lies in [kMinFracBits, kMaxFracBits].
void check_frac_bits(unsigned frac_bits);

std::uint64_t encode_value(double x, unsigned frac_bits);
double decode_value(std::uint64_t word, unsigned frac_bits);

/// round(x * 2^f) per cell. Throws OverflowError naming the first cell whose
/// scaled magnitude reaches 2^62 (or that is not finite).
FixedPointBlock encode(const FactorMatrix& x, unsigned frac_bits);

/// Inverse of encode. Throws OverflowError if any word, read as a signed
/// integer, has magnitude >= 2^62.
FactorMatrix decode(const FixedPointBlock& block);

/// Decodes without the headroom check. Every word maps to a finite real;
/// used where the words are not trusted to be a valid encoding.
FactorMatrix decode_unchecked(const FixedPointBlock& block);

/// Largest per-entry magnitude that T sources may each contribute without
/// their encoded sum crossing the headroom limit.
double contribution_bound(unsigned frac_bits, std::size_t sources);

/// Clamps every entry of g into [-bound, bound]; returns how many changed.
std::size_t clamp_to_bound(FactorMatrix& g, double bound);

/// Elementwise ring addition (wrapping mod 2^64) of b into acc.
void ring_add_into(FixedPointBlock& acc, const FixedPointBlock& b);

}  // namespace sharedmf
