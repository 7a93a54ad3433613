// SPDX-License-Identifier: Apache-2.0
//
// Square M-QAM constellations with binary-reflected Gray labeling and the
// sign/amplitude factorization used by probabilistic amplitude shaping:
// every point splits into a sign quadrant (two uniform FEC-driven bits) and
// an unsigned amplitude pair (the shaped part). Per dimension the Gray label
// is one sign bit (MSB) plus amplitude bits that depend only on |level|, so
// points of equal magnitude share their amplitude bits.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pashape {

using cdouble = std::complex<double>;

struct SignAmp {
  int sign_quadrant;    // 2*sign_bit_I + sign_bit_Q, bit 0 = positive
  int amplitude_index;  // iI + L*iQ over the per-dimension amplitude alphabet
};

class Constellation {
 public:
  int order = 0;            // M
  int bits_per_symbol = 0;  // m = log2 M
  std::vector<cdouble> points;        // unit average energy under uniform input
  std::vector<std::uint32_t> labels;  // Gray label of points[i]
  std::vector<double> amp_alphabet;   // positive per-dimension levels, ascending

  int levels_per_dim() const { return static_cast<int>(amp_alphabet.size()); }
  int num_amp_pairs() const { return levels_per_dim() * levels_per_dim(); }

  double amp_i_of_pair(int pair) const { return amp_alphabet[pair % levels_per_dim()]; }
  double amp_q_of_pair(int pair) const { return amp_alphabet[pair / levels_per_dim()]; }
  // |x|^2 of any point carrying this amplitude pair (signs do not change it)
  double pair_energy(int pair) const {
    const double ai = amp_i_of_pair(pair), aq = amp_q_of_pair(pair);
    return ai * ai + aq * aq;
  }
};

namespace detail {

inline std::uint32_t gray_encode(std::uint32_t i) { return i ^ (i >> 1); }

}  // namespace detail

// order in {16, 64, 256}
inline Constellation build_qam(int order) {
  if (order != 16 && order != 64 && order != 256)
    throw std::invalid_argument("build_qam: unsupported order " + std::to_string(order));
  Constellation c;
  c.order = order;
  c.bits_per_symbol = static_cast<int>(std::lround(std::log2(static_cast<double>(order))));
  const int side = 1 << (c.bits_per_symbol / 2);  // 2L points per dimension
  const int num_levels = side / 2;                // L positive levels

  // unit average energy: per-dimension mean square of {1,3,...,2L-1} is (4L^2-1)/3
  const double mean_sq =
      2.0 * (4.0 * num_levels * num_levels - 1.0) / 3.0;
  const double scale = 1.0 / std::sqrt(mean_sq);

  c.amp_alphabet.resize(num_levels);
  for (int j = 0; j < num_levels; ++j) c.amp_alphabet[j] = scale * (2 * j + 1);

  // per-dimension index i in [0, side): level(i) = (side-1-2i)*scale, so the
  // first half of the reflected Gray code covers the positive levels and the
  // MSB is the sign bit with 0 = positive.
  const int half_bits = c.bits_per_symbol / 2;
  c.points.resize(order);
  c.labels.resize(order);
  for (int ii = 0; ii < side; ++ii) {
    for (int iq = 0; iq < side; ++iq) {
      const int idx = ii * side + iq;
      const double re = (side - 1 - 2 * ii) * scale;
      const double im = (side - 1 - 2 * iq) * scale;
      c.points[idx] = cdouble(re, im);
      c.labels[idx] = (detail::gray_encode(static_cast<std::uint32_t>(ii)) << half_bits) |
                      detail::gray_encode(static_cast<std::uint32_t>(iq));
    }
  }
  return c;
}

inline SignAmp decompose(int symbol_index, const Constellation& c) {
  if (symbol_index < 0 || symbol_index >= c.order)
    throw std::invalid_argument("decompose: symbol index out of range");
  const cdouble p = c.points[symbol_index];
  const int sign_i = p.real() < 0.0 ? 1 : 0;
  const int sign_q = p.imag() < 0.0 ? 1 : 0;
  const int num_levels = c.levels_per_dim();
  auto level_of = [&](double v) {
    const double mag = std::abs(v);
    int best = 0;
    double bestd = std::abs(c.amp_alphabet[0] - mag);
    for (int j = 1; j < num_levels; ++j) {
      const double d = std::abs(c.amp_alphabet[j] - mag);
      if (d < bestd) {
        bestd = d;
        best = j;
      }
    }
    return best;
  };
  SignAmp sa;
  sa.sign_quadrant = 2 * sign_i + sign_q;
  sa.amplitude_index = level_of(p.real()) + num_levels * level_of(p.imag());
  return sa;
}

inline int recompose(const SignAmp& sa, const Constellation& c) {
  const int num_levels = c.levels_per_dim();
  if (sa.sign_quadrant < 0 || sa.sign_quadrant > 3 || sa.amplitude_index < 0 ||
      sa.amplitude_index >= c.num_amp_pairs())
    throw std::invalid_argument("recompose: component out of range");
  const int li = sa.amplitude_index % num_levels;
  const int lq = sa.amplitude_index / num_levels;
  const int sign_i = (sa.sign_quadrant >> 1) & 1;
  const int sign_q = sa.sign_quadrant & 1;
  const int side = 2 * num_levels;
  // positive level j sits at per-dimension index (L-1-j); negative at (L+j)
  const int ii = sign_i ? num_levels + li : num_levels - 1 - li;
  const int iq = sign_q ? num_levels + lq : num_levels - 1 - lq;
  return ii * side + iq;
}

// --- Maxwell-Boltzmann marginal over the per-dimension amplitude alphabet ---

struct MbDistribution {
  double nu = 0.0;            // shaping exponent
  std::vector<double> probs;  // per amplitude level, sums to 1
};

inline double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return h;
}

inline MbDistribution mb_distribution(const Constellation& c, double nu) {
  MbDistribution d;
  d.nu = nu;
  d.probs.resize(c.amp_alphabet.size());
  double z = 0.0;
  for (std::size_t j = 0; j < d.probs.size(); ++j) {
    const double a = c.amp_alphabet[j];
    d.probs[j] = std::exp(-nu * a * a);
    z += d.probs[j];
  }
  for (auto& p : d.probs) p /= z;
  return d;
}

// Bisection on nu; entropy is strictly decreasing in nu so the bracket
// [0, 50] is safe for every supported alphabet.
inline MbDistribution mb_fit_entropy(const Constellation& c, double target_entropy_bits_per_1d,
                                     double tol = 1e-9) {
  if (tol <= 0.0) throw std::invalid_argument("mb_fit_entropy: tol must be positive");
  const double h_max = std::log2(static_cast<double>(c.amp_alphabet.size()));
  constexpr double kNuMax = 50.0;
  const double h_min = entropy_bits(mb_distribution(c, kNuMax).probs);
  if (target_entropy_bits_per_1d > h_max + tol || target_entropy_bits_per_1d < h_min - tol)
    throw std::domain_error("mb_fit_entropy: target entropy outside achievable range");
  double lo = 0.0, hi = kNuMax;
  MbDistribution best = mb_distribution(c, 0.0);
  if (std::abs(entropy_bits(best.probs) - target_entropy_bits_per_1d) <= tol) return best;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    MbDistribution d = mb_distribution(c, mid);
    const double h = entropy_bits(d.probs);
    best = d;
    if (std::abs(h - target_entropy_bits_per_1d) <= tol) return best;
    if (h > target_entropy_bits_per_1d)
      lo = mid;
    else
      hi = mid;
  }
  return best;
}

// 2D amplitude-pair distribution as the product of two independent 1D laws
inline std::vector<double> pair_probs_from_1d(const Constellation& c,
                                              std::span<const double> probs_1d) {
  const int num_levels = c.levels_per_dim();
  if (static_cast<int>(probs_1d.size()) != num_levels)
    throw std::invalid_argument("pair_probs_from_1d: size mismatch");
  std::vector<double> out(static_cast<std::size_t>(c.num_amp_pairs()));
  for (int pair = 0; pair < c.num_amp_pairs(); ++pair)
    out[static_cast<std::size_t>(pair)] =
        probs_1d[static_cast<std::size_t>(pair % num_levels)] *
        probs_1d[static_cast<std::size_t>(pair / num_levels)];
  return out;
}

// Per-point prior induced by an amplitude-pair marginal with uniform signs.
inline std::vector<double> point_prior_from_pair_probs(const Constellation& c,
                                                       std::span<const double> pair_probs) {
  std::vector<double> prior(static_cast<std::size_t>(c.order));
  for (int i = 0; i < c.order; ++i) {
    const SignAmp sa = decompose(i, c);
    prior[static_cast<std::size_t>(i)] =
        0.25 * pair_probs[static_cast<std::size_t>(sa.amplitude_index)];
  }
  return prior;
}

// Average symbol energy under an amplitude-pair marginal (signs preserve it).
inline double average_energy_under(const Constellation& c, std::span<const double> pair_probs) {
  double e = 0.0;
  for (int pair = 0; pair < c.num_amp_pairs(); ++pair)
    e += pair_probs[static_cast<std::size_t>(pair)] * c.pair_energy(pair);
  return e;
}

// Launch-power bookkeeping keeps the constellation at unit average energy
// under whatever marginal is currently transmitted.
inline Constellation scaled_for_marginal(const Constellation& c,
                                         std::span<const double> pair_probs) {
  const double g = 1.0 / std::sqrt(average_energy_under(c, pair_probs));
  Constellation out = c;
  for (auto& p : out.points) p *= g;
  for (auto& a : out.amp_alphabet) a *= g;
  return out;
}

inline void write_constellation_csv(std::ostream& os, const Constellation& c) {
  os << "index,re,im,label\n";
  for (int i = 0; i < c.order; ++i)
    os << i << ',' << c.points[static_cast<std::size_t>(i)].real() << ','
       << c.points[static_cast<std::size_t>(i)].imag() << ','
       << c.labels[static_cast<std::size_t>(i)] << '\n';
}

}  // namespace pashape
