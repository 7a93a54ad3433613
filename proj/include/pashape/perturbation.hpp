// SPDX-License-Identifier: Apache-2.0
//
// First-order regular-perturbation model of the span's Kerr nonlinearity.
// The coefficient table C[k,l] comes from the standard single-span integral
// with a Gaussian-pulse closed form for the time overlap:
//
//   C(k,l) = integral_0^L  e^{-alpha z} * tau^2 / (sqrt(2) |s(z)|)
//            * exp( -(T^2/4) [ (k-l)^2 / s(z) + (k+l)^2 / conj(s(z)) ] ) dz,
//   s(z) = tau^2 + i beta2 z,
//
// in km, with gamma kept outside. In physical units the received field is
//   u_t + j gamma P^{3/2} sum_{k,l} C[k,l] x_{t+k} x_{t+l} conj(x_{t+k+l})
// for unit-energy symbols x; the channel API normalizes back to unit scale.
// Frames are circular, matching the split-step reference.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pashape/autodiff.hpp"
#include "pashape/channel.hpp"
#include "pashape/rng.hpp"

namespace pashape {

struct PerturbationKernel {
  int k_mem = 0;
  double gamma_per_w_km = 0.0;
  std::vector<std::complex<double>> c;  // (2K+1)^2, row-major over (k+K, l+K)

  int side() const { return 2 * k_mem + 1; }
  const std::complex<double>& at(int k, int l) const {
    return c[static_cast<std::size_t>((k + k_mem) * side() + (l + k_mem))];
  }
  std::complex<double>& at(int k, int l) {
    return c[static_cast<std::size_t>((k + k_mem) * side() + (l + k_mem))];
  }
  double energy() const {
    double e = 0.0;
    for (const auto& v : c) e += std::norm(v);
    return e;
  }
};

inline PerturbationKernel kernel_from_fiber(const FiberConfig& cfg, int k_mem,
                                            double pulse_width_factor = 0.0) {
  if (k_mem < 1) throw std::invalid_argument("kernel_from_fiber: k_mem must be >= 1");
  cfg.validate();
  PerturbationKernel ker;
  ker.k_mem = k_mem;
  ker.gamma_per_w_km = cfg.gamma_per_w_km;
  ker.c.assign(static_cast<std::size_t>(ker.side()) * static_cast<std::size_t>(ker.side()),
               {0.0, 0.0});

  const double t_sym_ps = 1e3 / cfg.symbol_rate_gbd;
  // Gaussian stand-in for the RRC pulse; the default width puts the
  // intensity FWHM at one symbol period, tau = T / (2 sqrt(2 ln 2))
  if (pulse_width_factor <= 0.0) pulse_width_factor = 1.0 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const double tau = t_sym_ps * pulse_width_factor;
  const double tau2 = tau * tau;
  const double beta2 = cfg.beta2_ps2_per_km();
  const double alpha = cfg.alpha_per_km();
  const double t2_4 = 0.25 * t_sym_ps * t_sym_ps;

  // composite Simpson in z; the integrand varies on the attenuation and
  // dispersion scales, both well resolved by this grid
  const int nz = 4001;
  const double dz = cfg.span_length_km / (nz - 1);
  for (int k = -k_mem; k <= k_mem; ++k) {
    for (int l = k; l <= k_mem; ++l) {
      std::complex<double> acc(0.0, 0.0);
      for (int iz = 0; iz < nz; ++iz) {
        const double z = iz * dz;
        const double w = (iz == 0 || iz == nz - 1) ? 1.0 : (iz % 2 ? 4.0 : 2.0);
        const std::complex<double> s(tau2, beta2 * z);
        const std::complex<double> expo =
            -t2_4 * (static_cast<double>((k - l) * (k - l)) / s +
                     static_cast<double>((k + l) * (k + l)) / std::conj(s));
        acc += w * std::exp(-alpha * z) * tau2 / (std::sqrt(2.0) * std::abs(s)) * std::exp(expo);
      }
      const std::complex<double> val = acc * (dz / 3.0);
      ker.at(k, l) = val;
      ker.at(l, k) = val;  // C is symmetric in (k, l) by construction
    }
  }
  return ker;
}

// Smallest K such that coefficients with max(|k|,|l|) <= K hold the given
// fraction of total kernel energy.
inline int kernel_effective_memory(const PerturbationKernel& ker, double fraction = 0.99) {
  const double total = ker.energy();
  for (int k = 0; k <= ker.k_mem; ++k) {
    double e = 0.0;
    for (int i = -k; i <= k; ++i)
      for (int j = -k; j <= k; ++j) e += std::norm(ker.at(i, j));
    if (e >= fraction * total) return k;
  }
  return ker.k_mem;
}

// Physical-field nonlinear distortion for unit-energy symbols x at launch
// power P: j gamma P^{3/2} sum C[k,l] x_{t+k} x_{t+l} conj(x_{t+k+l}).
// Scaling the launch power by g scales this term by g^{3/2}. Indices wrap.
template <class T>
std::vector<ad::Cplx<T>> perturbation_distortion(std::span<const ad::Cplx<T>> x,
                                                 const PerturbationKernel& ker,
                                                 double power_w) {
  const int n = static_cast<int>(x.size());
  if (n <= 2 * ker.k_mem)
    throw std::domain_error("perturbation_distortion: sequence shorter than 2*k_mem");
  const double scale = ker.gamma_per_w_km * std::pow(power_w, 1.5);
  std::vector<ad::Cplx<T>> out(x.size(), ad::Cplx<T>(T(0.0), T(0.0)));
  auto wrap = [n](int i) { return ((i % n) + n) % n; };
  for (int t = 0; t < n; ++t) {
    ad::Cplx<T> acc(T(0.0), T(0.0));
    for (int k = -ker.k_mem; k <= ker.k_mem; ++k) {
      for (int l = -ker.k_mem; l <= ker.k_mem; ++l) {
        const std::complex<double> ckl = ker.at(k, l) * scale;
        const ad::Cplx<T> triple =
            x[static_cast<std::size_t>(wrap(t + k))] *
            x[static_cast<std::size_t>(wrap(t + l))] *
            conj(x[static_cast<std::size_t>(wrap(t + k + l))]);
        acc = acc + ad::Cplx<T>(ckl) * triple;
      }
    }
    out[static_cast<std::size_t>(t)] = rot90(acc);  // the leading j
  }
  return out;
}

// Unit-normalized received symbols: y = x + distortion/sqrt(P) + noise.
// noise_variance is the per-symbol complex variance in the normalized
// domain; gradients flow through x, the noise is a fixed draw.
template <class T>
std::vector<ad::Cplx<T>> perturbation_channel(std::span<const ad::Cplx<T>> x,
                                              const PerturbationKernel& ker, double power_dbm,
                                              double noise_variance, Rng& rng) {
  const double p_w = FiberConfig::dbm_to_watt(power_dbm);
  auto dist = perturbation_distortion<T>(x, ker, p_w);
  const double inv_sqrt_p = 1.0 / std::sqrt(p_w);
  const double s_amp = std::sqrt(0.5 * std::max(noise_variance, 0.0));
  std::vector<ad::Cplx<T>> y(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double nr = s_amp > 0.0 ? s_amp * rng.gaussian() : 0.0;
    const double ni = s_amp > 0.0 ? s_amp * rng.gaussian() : 0.0;
    y[t] = x[t] + dist[t] * inv_sqrt_p + ad::Cplx<T>(T(nr), T(ni));
  }
  return y;
}

// Normalized-domain ASE-equivalent noise variance for the surrogate channel.
inline double surrogate_noise_variance(const FiberConfig& cfg, double power_dbm) {
  return 1.0 / cfg.predicted_ase_snr_linear(power_dbm);
}

inline std::vector<ad::Cplx<double>> to_cplx(std::span<const std::complex<double>> v) {
  std::vector<ad::Cplx<double>> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = ad::Cplx<double>(v[i]);
  return out;
}

inline std::vector<std::complex<double>> from_cplx(std::span<const ad::Cplx<double>> v) {
  std::vector<std::complex<double>> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = {v[i].re, v[i].im};
  return out;
}

}  // namespace pashape
