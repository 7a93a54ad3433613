// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pashape/rng.hpp"

namespace pashape {

// Ordered binary payload with exact length accounting. No hidden padding:
// size() is always the number of information bits the caller put in.
struct BitStream {
  std::vector<std::uint8_t> bits;

  BitStream() = default;
  explicit BitStream(std::size_t n) : bits(n, 0) {}

  std::size_t size() const { return bits.size(); }
  bool empty() const { return bits.empty(); }
  int operator[](std::size_t i) const { return bits[i]; }
  void push_back(int b) { bits.push_back(static_cast<std::uint8_t>(b & 1)); }
  bool operator==(const BitStream& o) const { return bits == o.bits; }

  // value packed MSB-first into width bits
  static BitStream from_u64(std::uint64_t value, int width) {
    if (width < 0 || width > 64) throw std::invalid_argument("BitStream width out of range");
    BitStream s(static_cast<std::size_t>(width));
    for (int i = 0; i < width; ++i)
      s.bits[static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>((value >> (width - 1 - i)) & 1u);
    return s;
  }

  std::uint64_t to_u64() const {
    if (bits.size() > 64) throw std::invalid_argument("BitStream too wide for u64");
    std::uint64_t v = 0;
    for (auto b : bits) v = (v << 1) | b;
    return v;
  }
};

inline BitStream random_bits(Rng& rng, std::size_t n) {
  BitStream s(n);
  for (auto& b : s.bits) b = static_cast<std::uint8_t>(rng.bit());
  return s;
}

}  // namespace pashape
