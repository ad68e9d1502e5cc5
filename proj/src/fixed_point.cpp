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

#include "sharedmf/fixed_point.hpp"

#include <cmath>
#include <string>

#include "sharedmf/errors.hpp"

namespace sharedmf {

namespace {

// 2^62 as a double; exactly representable.
constexpr double kHeadroomReal = 4611686018427387904.0;

std::string cell_str(std::size_t idx, std::size_t cols) {
  return "(" + std::to_string(idx / cols) + ", " + std::to_string(idx % cols) +
         ")";
}

bool within_headroom(std::uint64_t word) {
  const auto s = static_cast<std::int64_t>(word);
  // -2^62 itself is excluded along with everything further out.
  return s > -static_cast<std::int64_t>(kHeadroomLimit) &&
         s < static_cast<std::int64_t>(kHeadroomLimit);
}

}  // namespace

void check_frac_bits(unsigned frac_bits) {
  if (frac_bits < kMinFracBits || frac_bits > kMaxFracBits) {
    throw ConfigError("frac_bits " + std::to_string(frac_bits) +
                      " outside [" + std::to_string(kMinFracBits) + ", " +
                      std::to_string(kMaxFracBits) + "]");
  }
}

FixedPointBlock::FixedPointBlock(std::size_t rows, std::size_t cols,
                                 unsigned frac_bits)
    : rows_(rows), cols_(cols), frac_bits_(frac_bits), words_(rows * cols) {
  check_frac_bits(frac_bits);
}

FixedPointBlock::FixedPointBlock(std::size_t rows, std::size_t cols,
                                 unsigned frac_bits,
                                 std::vector<std::uint64_t> words)
    : rows_(rows),
      cols_(cols),
      frac_bits_(frac_bits),
      words_(std::move(words)) {
  check_frac_bits(frac_bits);
  if (words_.size() != rows_ * cols_) {
    throw ShapeError("block word count " + std::to_string(words_.size()) +
                     " != " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

std::uint64_t encode_value(double x, unsigned frac_bits) {
  const double scaled = std::ldexp(x, static_cast<int>(frac_bits));
  if (!std::isfinite(scaled) || std::fabs(scaled) >= kHeadroomReal) {
    throw OverflowError("value " + std::to_string(x) +
                        " exceeds fixed-point headroom at f=" +
                        std::to_string(frac_bits));
  }
  return static_cast<std::uint64_t>(std::llround(scaled));
}

double decode_value(std::uint64_t word, unsigned frac_bits) {
  if (!within_headroom(word)) {
    throw OverflowError("word exceeds fixed-point headroom");
  }
  return std::ldexp(static_cast<double>(static_cast<std::int64_t>(word)),
                    -static_cast<int>(frac_bits));
}

FixedPointBlock encode(const FactorMatrix& x, unsigned frac_bits) {
  check_frac_bits(frac_bits);
  FixedPointBlock out(x.rows(), x.cols(), frac_bits);
  auto src = x.data();
  auto dst = out.words();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double scaled = std::ldexp(src[i], static_cast<int>(frac_bits));
    if (!std::isfinite(scaled) || std::fabs(scaled) >= kHeadroomReal) {
      throw OverflowError("cell " + cell_str(i, x.cols()) + " value " +
                          std::to_string(src[i]) +
                          " exceeds fixed-point headroom at f=" +
                          std::to_string(frac_bits));
    }
    dst[i] = static_cast<std::uint64_t>(std::llround(scaled));
  }
  return out;
}

FactorMatrix decode(const FixedPointBlock& block) {
  auto src = block.words();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!within_headroom(src[i])) {
      throw OverflowError("cell " + cell_str(i, block.cols()) +
                          " exceeds fixed-point headroom");
    }
  }
  return decode_unchecked(block);
}

FactorMatrix decode_unchecked(const FixedPointBlock& block) {
  FactorMatrix out(block.rows(), block.cols());
  auto src = block.words();
  auto dst = out.data();
  const int shift = -static_cast<int>(block.frac_bits());
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = std::ldexp(static_cast<double>(static_cast<std::int64_t>(src[i])),
                        shift);
  }
  return out;
}

double contribution_bound(unsigned frac_bits, std::size_t sources) {
  check_frac_bits(frac_bits);
  if (sources == 0) throw ConfigError("contribution bound needs >= 1 source");
  // Largest B with B * 2^f * T < 2^62, rounded down by one unit in the
  // last place so the strict inequality survives the llround in encode.
  const double limit = std::ldexp(1.0, 62 - static_cast<int>(frac_bits)) /
                       static_cast<double>(sources);
  return std::nextafter(limit - std::ldexp(1.0, -static_cast<int>(frac_bits)),
                        0.0);
}

std::size_t clamp_to_bound(FactorMatrix& g, double bound) {
  std::size_t changed = 0;
  for (double& x : g.data()) {
    if (x > bound) {
      x = bound;
      ++changed;
    } else if (x < -bound) {
      x = -bound;
      ++changed;
    }
  }
  return changed;
}

void ring_add_into(FixedPointBlock& acc, const FixedPointBlock& b) {
  if (!acc.same_layout(b)) {
    throw ShapeError("ring add of blocks with different shape or frac_bits");
  }
  auto a = acc.words();
  auto w = b.words();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += w[i];
}

}  // namespace sharedmf
