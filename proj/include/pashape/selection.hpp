// SPDX-License-Identifier: Apache-2.0
//
// Sequence-selection baseline on top of ESS: generate candidate orderings of
// one shaped block, score each with a nonlinearity metric, transmit the
// argmin. The candidate index costs log2(C)/blocklength bits/symbol of side
// information, charged to the scheme's rate loss by the experiment layer.
//
// The metric is a kernel-based proxy: the sign-marginalized energy of the
// first-order perturbation term keeping the surviving (diagonal and
// transposed) pairings, i.e. sum_{k,l} w_kl |C_kl|^2 e_{t+k} e_{t+l}
// e_{t+k+l} with w = 1 on the diagonal and 2 off it. The additive-
// multiplicative metric of the literature is out of scope here; outputs are
// labeled as proxy-scored.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pashape/bits.hpp"
#include "pashape/ess.hpp"
#include "pashape/perturbation.hpp"
#include "pashape/rng.hpp"

namespace pashape {

struct SelectionConfig {
  int block_len_symbols = 64;  // 2D symbols per selection block
  int candidates = 16;         // power of two

  void validate() const {
    if (candidates < 2 || (candidates & (candidates - 1)) != 0)
      throw std::invalid_argument("SelectionConfig: candidates must be a power of two >= 2");
    if (block_len_symbols < 2)
      throw std::invalid_argument("SelectionConfig: block length too small");
  }
  double side_info_bits_per_symbol() const {
    return std::log2(static_cast<double>(candidates)) / block_len_symbols;
  }
};

// Proxy nonlinearity metric over per-symbol energies (cyclic block).
// Nonnegative; scaling amplitudes by s scales the metric by s^6.
inline double nlin_metric(std::span<const double> symbol_energies,
                          const PerturbationKernel& ker) {
  const int n = static_cast<int>(symbol_energies.size());
  if (n <= 2 * ker.k_mem) throw std::domain_error("nlin_metric: block shorter than 2*k_mem");
  auto wrap = [n](int i) { return ((i % n) + n) % n; };
  double total = 0.0;
  for (int t = 0; t < n; ++t) {
    for (int k = -ker.k_mem; k <= ker.k_mem; ++k) {
      for (int l = k; l <= ker.k_mem; ++l) {
        const double c2 = std::norm(ker.at(k, l));
        if (c2 == 0.0) continue;
        const double w = (k == l) ? 1.0 : 2.0;
        total += w * c2 * symbol_energies[static_cast<std::size_t>(wrap(t + k))] *
                 symbol_energies[static_cast<std::size_t>(wrap(t + l))] *
                 symbol_energies[static_cast<std::size_t>(wrap(t + k + l))];
      }
    }
  }
  return total / n;
}

struct SelectionResult {
  std::vector<int> amplitudes;  // integer levels, chosen candidate
  int chosen_candidate = 0;
  double metric = 0.0;
  std::vector<double> candidate_metrics;
};

namespace selection_detail {

// Candidate c permutes positions within each ESS block, so every block keeps
// its composition and therefore its energy bound.
inline std::vector<int> scramble(std::span<const int> base, int ess_block, int candidate,
                                 std::uint64_t seed) {
  std::vector<int> out(base.begin(), base.end());
  const int blocks = static_cast<int>(base.size()) / ess_block;
  for (int b = 0; b < blocks; ++b) {
    Rng rng(seed, "sel/cand=" + std::to_string(candidate) + "/block=" + std::to_string(b));
    int* p = out.data() + static_cast<std::ptrdiff_t>(b) * ess_block;
    for (int i = ess_block - 1; i > 0; --i)
      std::swap(p[i], p[rng.below(static_cast<std::uint64_t>(i + 1))]);
  }
  return out;
}

}  // namespace selection_detail

// payload -> ESS blocks -> C scrambled candidates -> argmin proxy metric.
// Ties break toward the lowest candidate index; fully deterministic.
inline SelectionResult select_sequence(const BitStream& payload, const SelectionConfig& cfg,
                                       const EssCoder& coder, const PerturbationKernel& kernel,
                                       std::uint64_t seed) {
  cfg.validate();
  const int amps_per_block = 2 * cfg.block_len_symbols;
  if (amps_per_block % coder.block_len() != 0)
    throw std::invalid_argument("select_sequence: selection block is not a whole number of ESS blocks");
  const int ess_blocks = amps_per_block / coder.block_len();
  const std::size_t bits_needed =
      static_cast<std::size_t>(ess_blocks) * static_cast<std::size_t>(coder.index_bits());
  if (payload.size() != bits_needed)
    throw std::invalid_argument("select_sequence: payload must carry " +
                                std::to_string(bits_needed) + " bits");

  std::vector<int> base;
  base.reserve(static_cast<std::size_t>(amps_per_block));
  for (int b = 0; b < ess_blocks; ++b) {
    std::uint64_t idx = 0;
    for (int i = 0; i < coder.index_bits(); ++i)
      idx = (idx << 1) |
            payload[static_cast<std::size_t>(b) * static_cast<std::size_t>(coder.index_bits()) +
                    static_cast<std::size_t>(i)];
    const auto block = coder.encode(idx);
    base.insert(base.end(), block.begin(), block.end());
  }

  SelectionResult result;
  result.candidate_metrics.resize(static_cast<std::size_t>(cfg.candidates));
  double best = 0.0;
  std::vector<int> best_amps;
  std::vector<double> energies(static_cast<std::size_t>(cfg.block_len_symbols));
  for (int cand = 0; cand < cfg.candidates; ++cand) {
    const auto amps = selection_detail::scramble(base, coder.block_len(), cand, seed);
    for (int t = 0; t < cfg.block_len_symbols; ++t) {
      const double ai = amps[static_cast<std::size_t>(2 * t)] * coder.unit();
      const double aq = amps[static_cast<std::size_t>(2 * t + 1)] * coder.unit();
      energies[static_cast<std::size_t>(t)] = ai * ai + aq * aq;
    }
    const double m = nlin_metric(energies, kernel);
    result.candidate_metrics[static_cast<std::size_t>(cand)] = m;
    if (cand == 0 || m < best) {
      best = m;
      best_amps = amps;
      result.chosen_candidate = cand;
    }
  }
  result.amplitudes = std::move(best_amps);
  result.metric = best;
  return result;
}

}  // namespace pashape
