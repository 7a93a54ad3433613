// SPDX-License-Identifier: Apache-2.0
//
// Enumerative sphere shaping: a fixed-length bijection between k-bit indices
// and lexicographically ranked amplitude sequences whose total energy stays
// within E_max. Amplitude levels are odd integers so energies are exact
// integers and the count trellis needs no floating point. Counts use 128-bit
// integers; the usable index width is capped at 63 bits.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pashape/bits.hpp"

namespace pashape {

class EssCoder {
 public:
  using u128 = unsigned __int128;

  EssCoder(int block_len, std::vector<int> levels, std::int64_t max_energy, double unit = 1.0)
      : n_(block_len), levels_(std::move(levels)), unit_(unit) {
    if (n_ < 1) throw std::invalid_argument("EssCoder: block length must be >= 1");
    if (levels_.empty()) throw std::invalid_argument("EssCoder: no amplitude levels");
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      if (levels_[i] < 1 || levels_[i] % 2 == 0)
        throw std::invalid_argument("EssCoder: levels must be positive odd integers");
      if (i > 0 && levels_[i] <= levels_[i - 1])
        throw std::invalid_argument("EssCoder: levels must be strictly ascending");
    }
    const std::int64_t min_energy =
        static_cast<std::int64_t>(n_) * levels_.front() * levels_.front();
    const std::int64_t full_energy =
        static_cast<std::int64_t>(n_) * levels_.back() * levels_.back();
    if (max_energy < min_energy)
      throw std::domain_error("EssCoder: E_max below the minimum feasible energy");
    emax_ = std::min(max_energy, full_energy);

    // T(n, e) = number of length-n sequences with energy <= e
    counts_.assign(static_cast<std::size_t>(n_ + 1) * static_cast<std::size_t>(emax_ + 1), 0);
    for (std::int64_t e = 0; e <= emax_; ++e) at(0, e) = 1;
    for (int len = 1; len <= n_; ++len)
      for (std::int64_t e = 0; e <= emax_; ++e) {
        u128 acc = 0;
        for (int a : levels_) {
          const std::int64_t ea = static_cast<std::int64_t>(a) * a;
          if (ea > e) break;
          acc = sat_add(acc, at(len - 1, e - ea));
        }
        at(len, e) = acc;
      }

    const u128 total = at(n_, emax_);
    int bits = -1;
    for (u128 t = total; t > 0; t >>= 1) ++bits;
    k_ = bits;  // may exceed 63; the index interfaces below then refuse
  }

  int block_len() const { return n_; }
  int index_bits() const { return k_; }
  std::int64_t max_energy() const { return emax_; }
  const std::vector<int>& levels() const { return levels_; }
  double unit() const { return unit_; }
  double shaping_rate_bits_per_amp() const { return static_cast<double>(k_) / n_; }
  u128 total_sequences() const { return at(n_, emax_); }
  u128 count(int len, std::int64_t energy_budget) const {
    if (len < 0 || len > n_) throw std::invalid_argument("EssCoder::count: bad length");
    if (energy_budget < 0) return 0;
    return at(len, std::min(energy_budget, emax_));
  }

  // index -> lexicographic-rank amplitude sequence (integer levels)
  std::vector<int> encode(std::uint64_t index) const {
    require_indexable();
    if (static_cast<u128>(index) >= total_sequences())
      throw std::domain_error("ess_encode: index out of range");
    u128 rank = index;
    std::int64_t budget = emax_;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n_));
    for (int pos = n_; pos >= 1; --pos) {
      bool placed = false;
      for (int a : levels_) {
        const std::int64_t ea = static_cast<std::int64_t>(a) * a;
        if (ea > budget) break;
        const u128 c = at(pos - 1, budget - ea);
        if (rank < c) {
          out.push_back(a);
          budget -= ea;
          placed = true;
          break;
        }
        rank -= c;
      }
      if (!placed) throw std::logic_error("ess_encode: trellis walk failed");
    }
    return out;
  }

  std::vector<int> encode(const BitStream& index_bits) const {
    if (static_cast<int>(index_bits.size()) != k_)
      throw std::invalid_argument("ess_encode: expected exactly " + std::to_string(k_) +
                                  " index bits");
    return encode(index_bits.to_u64());
  }

  std::uint64_t decode_index(std::span<const int> seq) const {
    require_indexable();
    if (static_cast<int>(seq.size()) != n_)
      throw std::invalid_argument("ess_decode: sequence length mismatch");
    u128 rank = 0;
    std::int64_t budget = emax_;
    for (int pos = n_; pos >= 1; --pos) {
      const int a_t = seq[static_cast<std::size_t>(n_ - pos)];
      bool found = false;
      for (int a : levels_) {
        const std::int64_t ea = static_cast<std::int64_t>(a) * a;
        if (ea > budget)
          throw std::domain_error("ess_decode: sequence violates the energy bound");
        if (a == a_t) {
          budget -= ea;
          found = true;
          break;
        }
        rank += at(pos - 1, budget - ea);
      }
      if (!found) throw std::invalid_argument("ess_decode: symbol is not an amplitude level");
    }
    if (rank >> 63) throw std::logic_error("ess_decode: rank exceeds 63 bits");
    return static_cast<std::uint64_t>(rank);
  }

  BitStream decode(std::span<const int> seq) const {
    return BitStream::from_u64(decode_index(seq), k_);
  }

 private:
  void require_indexable() const {
    if (k_ > 63)
      throw std::domain_error("EssCoder: index width " + std::to_string(k_) +
                              " exceeds the supported 63 bits");
  }

  static u128 sat_add(u128 a, u128 b) {
    const u128 cap = static_cast<u128>(1) << 126;
    const u128 s = a + b;
    return s > cap ? cap : s;
  }

  u128& at(int len, std::int64_t e) {
    return counts_[static_cast<std::size_t>(len) * static_cast<std::size_t>(emax_ + 1) +
                   static_cast<std::size_t>(e)];
  }
  const u128& at(int len, std::int64_t e) const {
    return counts_[static_cast<std::size_t>(len) * static_cast<std::size_t>(emax_ + 1) +
                   static_cast<std::size_t>(e)];
  }

  int n_ = 0;
  int k_ = 0;
  std::int64_t emax_ = 0;
  std::vector<int> levels_;
  double unit_ = 1.0;
  std::vector<u128> counts_;
};

// Build from physical amplitude levels (e.g. a constellation's amp_alphabet):
// levels are mapped to odd integers by the smallest level and the energy
// bound is quantized in the same unit.
inline EssCoder ess_build(int block_len, std::span<const double> amp_levels, double e_max) {
  if (amp_levels.empty()) throw std::invalid_argument("ess_build: no amplitude levels");
  const double unit = amp_levels[0];
  if (unit <= 0.0) throw std::invalid_argument("ess_build: levels must be positive");
  std::vector<int> ints;
  ints.reserve(amp_levels.size());
  for (double a : amp_levels) {
    const double r = a / unit;
    const int i = static_cast<int>(std::lround(r));
    if (std::abs(r - i) > 1e-9 || i % 2 == 0)
      throw std::invalid_argument("ess_build: levels are not odd-integer multiples of the base");
    ints.push_back(i);
  }
  const std::int64_t emax_int = static_cast<std::int64_t>(std::floor(e_max / (unit * unit) + 1e-9));
  return EssCoder(block_len, std::move(ints), emax_int, unit);
}

struct EssRatePoint {
  std::int64_t emax = 0;
  int index_bits = 0;
  double rate_bits_per_amp = 0.0;
};

struct EssRateScan {
  EssRatePoint best;
  std::vector<EssRatePoint> table;
};

// Scan integer energy bounds for the one whose shaping rate k/N is closest
// to the target (bits per 1D amplitude). One trellis at the loosest bound
// provides T(N, e) for every e.
inline EssRateScan ess_find_emax(int block_len, std::span<const int> levels,
                                 double target_bits_per_amp, double tol = 0.02) {
  std::vector<int> lv(levels.begin(), levels.end());
  const std::int64_t full =
      static_cast<std::int64_t>(block_len) * lv.back() * lv.back();
  EssCoder probe(block_len, lv, full);
  EssRateScan scan;
  double best_gap = 1e300;
  const std::int64_t min_e = static_cast<std::int64_t>(block_len) * lv.front() * lv.front();
  for (std::int64_t e = min_e; e <= full; ++e) {
    const EssCoder::u128 t = probe.count(block_len, e);
    int bits = -1;
    for (EssCoder::u128 x = t; x > 0; x >>= 1) ++bits;
    if (bits < 0 || bits > 63) continue;
    const double rate = static_cast<double>(bits) / block_len;
    if (scan.table.empty() || scan.table.back().index_bits != bits)
      scan.table.push_back({e, bits, rate});
    const double gap = std::abs(rate - target_bits_per_amp);
    if (gap < best_gap) {
      best_gap = gap;
      scan.best = {e, bits, rate};
    }
  }
  if (best_gap > tol)
    throw std::domain_error("ess_find_emax: no energy bound reaches the target rate within " +
                            std::to_string(tol));
  return scan;
}

}  // namespace pashape
