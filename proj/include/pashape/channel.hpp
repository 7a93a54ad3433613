// SPDX-License-Identifier: Apache-2.0
//
// Transmission media: root-raised-cosine pulse shaping, a symmetric
// split-step Fourier reference channel for a single amplified span, and
// receiver-side chromatic-dispersion compensation. Frames are circular
// (frequency-domain filtering), which is the usual fiber-simulation
// convention and keeps the matched-filter cascade exactly Nyquist.
//
// Units: time ps, distance km, power W, beta2 ps^2/km, gamma 1/(W km).

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pashape/fft.hpp"
#include "pashape/rng.hpp"

namespace pashape {

struct FiberConfig {
  double span_length_km = 205.0;
  double attenuation_db_per_km = 0.2;
  double dispersion_ps_nm_km = 17.0;
  double gamma_per_w_km = 1.3;
  double amp_noise_figure_db = 5.0;
  double center_wavelength_nm = 1550.0;
  double symbol_rate_gbd = 50.0;
  double rrc_rolloff = 0.1;
  int oversampling = 4;
  int step_count = 0;                  // 0 = automatic, phase-capped log steps
  double max_step_phase_rad = 3e-3;    // target nonlinear phase per step
  bool edfa_enabled = true;            // lumped gain equal to the span loss
  bool ase_enabled = true;

  void validate() const {
    if (span_length_km <= 0 || attenuation_db_per_km < 0 || gamma_per_w_km < 0 ||
        symbol_rate_gbd <= 0 || center_wavelength_nm <= 0 || oversampling < 2 ||
        rrc_rolloff < 0 || rrc_rolloff > 1 || max_step_phase_rad <= 0)
      throw std::invalid_argument("FiberConfig: parameter out of range");
    if (static_cast<double>(oversampling) < 2.0 * (1.0 + rrc_rolloff))
      throw std::invalid_argument("FiberConfig: oversampling below 2*(1+rolloff)");
  }

  // beta2 = -D lambda^2 / (2 pi c), in ps^2/km
  double beta2_ps2_per_km() const {
    const double c_km_per_ps = 2.99792458e-7;  // speed of light, km/ps
    const double lambda_km = center_wavelength_nm * 1e-12;
    // D in ps/nm/km = ps/(1e-12 km)/km
    return -dispersion_ps_nm_km * 1e12 * lambda_km * lambda_km / (2.0 * M_PI * c_km_per_ps);
  }
  double alpha_per_km() const { return attenuation_db_per_km * std::log(10.0) / 10.0; }
  double sample_rate_ghz() const { return symbol_rate_gbd * oversampling; }
  double span_gain_linear() const {
    return std::pow(10.0, attenuation_db_per_km * span_length_km / 10.0);
  }
  // single-polarization ASE PSD at the amplifier output, W/Hz
  double ase_psd_w_per_hz() const {
    const double h = 6.62607015e-34;
    const double nu_hz = 2.99792458e8 / (center_wavelength_nm * 1e-9);
    const double f_lin = std::pow(10.0, amp_noise_figure_db / 10.0);
    return 0.5 * f_lin * h * nu_hz * (span_gain_linear() - 1.0);
  }
  // SNR after matched filtering at the given launch power, linear scale
  double predicted_ase_snr_linear(double launch_power_dbm) const {
    const double p_w = dbm_to_watt(launch_power_dbm);
    return p_w / (ase_psd_w_per_hz() * symbol_rate_gbd * 1e9);
  }

  static double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
  static double watt_to_dbm(double w) { return 10.0 * std::log10(w / 1e-3); }
};

struct ComplexFrame {
  std::vector<std::complex<double>> samples;  // field, sqrt(W)
  double sample_rate_ghz = 0.0;
  double launch_power_dbm = 0.0;

  double mean_power_w() const {
    double p = 0.0;
    for (const auto& s : samples) p += std::norm(s);
    return samples.empty() ? 0.0 : p / static_cast<double>(samples.size());
  }
};

namespace dsp {

// sqrt(os * RC(f)) gains on the FFT grid; the tx/rx pair then cascades to an
// exactly Nyquist raised cosine on circular frames.
inline std::vector<double> rrc_bin_gains(std::size_t n, int oversampling, double rolloff) {
  std::vector<double> g(n);
  const double rs = 1.0 / static_cast<double>(oversampling);  // symbol rate in cycles/sample
  const double f1 = 0.5 * rs * (1.0 - rolloff);
  const double f2 = 0.5 * rs * (1.0 + rolloff);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = std::abs(fft_bin_freq(k, n));
    double rc;
    if (f <= f1)
      rc = 1.0;
    else if (f >= f2)
      rc = 0.0;
    else
      rc = 0.5 * (1.0 + std::cos(M_PI / (rolloff * rs) * (f - f1)));
    g[k] = std::sqrt(static_cast<double>(oversampling) * rc);
  }
  return g;
}

}  // namespace dsp

// Zero-stuff, RRC-filter and scale to the requested launch power.
inline ComplexFrame rrc_shape(std::span<const std::complex<double>> symbols,
                              const FiberConfig& cfg, double launch_power_dbm) {
  cfg.validate();
  const std::size_t n_sym = symbols.size();
  if (n_sym == 0 || (n_sym & (n_sym - 1)) != 0)
    throw std::invalid_argument("rrc_shape: symbol count must be a power of two");
  const std::size_t n = n_sym * static_cast<std::size_t>(cfg.oversampling);
  std::vector<std::complex<double>> buf(n, {0.0, 0.0});
  for (std::size_t i = 0; i < n_sym; ++i)
    buf[i * static_cast<std::size_t>(cfg.oversampling)] = symbols[i];
  fft_inplace(buf, false);
  const auto gains = dsp::rrc_bin_gains(n, cfg.oversampling, cfg.rrc_rolloff);
  for (std::size_t k = 0; k < n; ++k) buf[k] *= gains[k];
  fft_inplace(buf, true);

  ComplexFrame frame;
  frame.samples = std::move(buf);
  frame.sample_rate_ghz = cfg.sample_rate_ghz();
  frame.launch_power_dbm = launch_power_dbm;
  const double target_w = FiberConfig::dbm_to_watt(launch_power_dbm);
  const double cur = frame.mean_power_w();
  if (cur <= 0.0) throw std::invalid_argument("rrc_shape: zero-power frame");
  const double g = std::sqrt(target_w / cur);
  for (auto& s : frame.samples) s *= g;
  return frame;
}

// Matched RRC filter and symbol-rate downsampling. Returns raw symbol-domain
// samples (still carrying the physical scale).
inline std::vector<std::complex<double>> matched_filter_downsample(const ComplexFrame& frame,
                                                                   const FiberConfig& cfg) {
  const std::size_t n = frame.samples.size();
  std::vector<std::complex<double>> buf = frame.samples;
  fft_inplace(buf, false);
  const auto gains = dsp::rrc_bin_gains(n, cfg.oversampling, cfg.rrc_rolloff);
  for (std::size_t k = 0; k < n; ++k) buf[k] *= gains[k];
  fft_inplace(buf, true);
  // the tx/rx RRC pair cascades to unity gain at the symbol instants
  const std::size_t n_sym = n / static_cast<std::size_t>(cfg.oversampling);
  std::vector<std::complex<double>> out(n_sym);
  for (std::size_t i = 0; i < n_sym; ++i)
    out[i] = buf[i * static_cast<std::size_t>(cfg.oversampling)];
  return out;
}

// Symmetric split-step Fourier propagation over one amplified span: linear
// half-step in frequency, nonlinear phase rotation in time, linear
// half-step; EDFA gain equal to the span loss at the end, with ASE added
// there when enabled. Explicit step_count is refused if it implies more
// nonlinear phase per step than 10x the configured cap.
inline ComplexFrame ssfm_propagate(const ComplexFrame& input, const FiberConfig& cfg,
                                   std::uint64_t seed) {
  cfg.validate();
  if (std::abs(input.sample_rate_ghz - cfg.sample_rate_ghz()) > 1e-9)
    throw std::invalid_argument("ssfm_propagate: frame sample rate does not match config");
  const std::size_t n = input.samples.size();
  const double alpha = cfg.alpha_per_km();
  const double gamma = cfg.gamma_per_w_km;
  const double beta2 = cfg.beta2_ps2_per_km();
  const double length = cfg.span_length_km;
  const double p0 = input.mean_power_w();

  // step boundaries
  std::vector<double> edges;
  edges.push_back(0.0);
  if (cfg.step_count > 0) {
    for (int i = 1; i <= cfg.step_count; ++i)
      edges.push_back(length * i / cfg.step_count);
    const double first_phase = gamma * p0 * (edges[1] - edges[0]);
    if (first_phase > 10.0 * cfg.max_step_phase_rad)
      throw std::invalid_argument(
          "ssfm_propagate: step too coarse, nonlinear phase per step " +
          std::to_string(first_phase) + " rad exceeds " +
          std::to_string(10.0 * cfg.max_step_phase_rad) + " rad");
  } else {
    // constant nonlinear phase per step under the attenuation profile
    const double phi_cap = cfg.max_step_phase_rad;
    double z = 0.0;
    while (z < length) {
      double dz;
      if (gamma * p0 <= 0.0) {
        dz = length;  // linear fiber: one step is exact
      } else if (alpha <= 0.0) {
        dz = phi_cap / (gamma * p0);
      } else {
        const double local = gamma * p0 * std::exp(-alpha * z);  // rad/km at z
        const double r = alpha * phi_cap / local;
        dz = r < 1.0 ? -std::log(1.0 - r) / alpha : length - z;
      }
      dz = std::max(dz, 1e-4);
      z = std::min(z + dz, length);
      edges.push_back(z);
    }
    if (edges.size() < 2) edges.push_back(length);
  }

  // frequency grid, rad/ps
  std::vector<double> omega_sq(n);
  const double fs_thz = input.sample_rate_ghz * 1e-3;  // cycles/ps
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 2.0 * M_PI * fft_bin_freq(k, n) * fs_thz;
    omega_sq[k] = w * w;
  }

  std::vector<std::complex<double>> u = input.samples;
  auto linear_half = [&](double dz) {
    fft_inplace(u, false);
    const double att = std::exp(-0.5 * alpha * dz * 0.5);
    for (std::size_t k = 0; k < n; ++k) {
      const double phase = 0.5 * beta2 * omega_sq[k] * (dz * 0.5);
      u[k] *= std::polar(att, phase);
    }
    fft_inplace(u, true);
  };
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double dz = edges[s + 1] - edges[s];
    linear_half(dz);
    if (gamma != 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        const double phi = gamma * std::norm(u[i]) * dz;
        u[i] *= std::polar(1.0, phi);
      }
    }
    linear_half(dz);
  }

  // EDFA: restore span loss, then lumped ASE
  if (cfg.edfa_enabled) {
    const double g_field = std::sqrt(cfg.span_gain_linear());
    for (auto& s : u) s *= g_field;
  }
  if (cfg.edfa_enabled && cfg.ase_enabled) {
    Rng rng(seed);
    const double sigma2 = cfg.ase_psd_w_per_hz() * input.sample_rate_ghz * 1e9;
    const double s_amp = std::sqrt(0.5 * sigma2);
    for (auto& s : u) s += std::complex<double>(s_amp * rng.gaussian(), s_amp * rng.gaussian());
  }

  ComplexFrame out;
  out.samples = std::move(u);
  out.sample_rate_ghz = input.sample_rate_ghz;
  out.launch_power_dbm = input.launch_power_dbm;
  return out;
}

// Exact inverse of the span's dispersion transfer function (phase only).
inline ComplexFrame cd_compensate(const ComplexFrame& input, const FiberConfig& cfg) {
  const std::size_t n = input.samples.size();
  const double beta2 = cfg.beta2_ps2_per_km();
  const double fs_thz = input.sample_rate_ghz * 1e-3;
  std::vector<std::complex<double>> buf = input.samples;
  fft_inplace(buf, false);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 2.0 * M_PI * fft_bin_freq(k, n) * fs_thz;
    buf[k] *= std::polar(1.0, -0.5 * beta2 * w * w * cfg.span_length_km);
  }
  fft_inplace(buf, true);
  ComplexFrame out;
  out.samples = std::move(buf);
  out.sample_rate_ghz = input.sample_rate_ghz;
  out.launch_power_dbm = input.launch_power_dbm;
  return out;
}

struct DspResult {
  std::vector<std::complex<double>> symbols;  // unit-normalized
  std::complex<double> gain{1.0, 0.0};        // removed complex gain
};

// Receiver chain: CD compensation, matched filter, symbol-rate sampling,
// then a single complex least-squares gain. With a reference (the AIR
// estimator knows the transmitted symbols anyway) the gain also absorbs the
// deterministic mean nonlinear phase; without one it only normalizes power.
inline DspResult dsp_receive(const ComplexFrame& rx, const FiberConfig& cfg,
                             std::span<const std::complex<double>> reference = {}) {
  const ComplexFrame eq = cd_compensate(rx, cfg);
  DspResult out;
  out.symbols = matched_filter_downsample(eq, cfg);
  if (!reference.empty()) {
    if (reference.size() != out.symbols.size())
      throw std::invalid_argument("dsp_receive: reference length mismatch");
    std::complex<double> num(0.0, 0.0);
    double den = 0.0;
    for (std::size_t i = 0; i < out.symbols.size(); ++i) {
      num += std::conj(reference[i]) * out.symbols[i];
      den += std::norm(reference[i]);
    }
    out.gain = num / den;
  } else {
    double p = 0.0;
    for (const auto& s : out.symbols) p += std::norm(s);
    out.gain = std::sqrt(p / static_cast<double>(out.symbols.size()));
  }
  for (auto& s : out.symbols) s /= out.gain;
  return out;
}

// Error-vector magnitude in dB relative to the reference's mean power.
inline double evm_db(std::span<const std::complex<double>> actual,
                     std::span<const std::complex<double>> reference) {
  if (actual.size() != reference.size()) throw std::invalid_argument("evm_db: length mismatch");
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    err += std::norm(actual[i] - reference[i]);
    ref += std::norm(reference[i]);
  }
  return 10.0 * std::log10(err / ref);
}

// Binary frame export: magic, sample count, rate, power, interleaved re/im.
inline void write_frame_binary(const std::string& path, const ComplexFrame& frame) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open frame file for write: " + path);
  const char magic[8] = {'P', 'S', 'H', 'F', 'R', 'M', '0', '1'};
  f.write(magic, 8);
  const std::uint64_t count = frame.samples.size();
  f.write(reinterpret_cast<const char*>(&count), sizeof(count));
  f.write(reinterpret_cast<const char*>(&frame.sample_rate_ghz), sizeof(double));
  f.write(reinterpret_cast<const char*>(&frame.launch_power_dbm), sizeof(double));
  for (const auto& s : frame.samples) {
    const double re = s.real(), im = s.imag();
    f.write(reinterpret_cast<const char*>(&re), sizeof(double));
    f.write(reinterpret_cast<const char*>(&im), sizeof(double));
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline ComplexFrame read_frame_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open frame file: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != "PSHFRM01")
    throw std::runtime_error("bad frame binary magic in " + path);
  std::uint64_t count = 0;
  ComplexFrame frame;
  f.read(reinterpret_cast<char*>(&count), sizeof(count));
  f.read(reinterpret_cast<char*>(&frame.sample_rate_ghz), sizeof(double));
  f.read(reinterpret_cast<char*>(&frame.launch_power_dbm), sizeof(double));
  frame.samples.resize(count);
  for (auto& s : frame.samples) {
    double re = 0, im = 0;
    f.read(reinterpret_cast<char*>(&re), sizeof(double));
    f.read(reinterpret_cast<char*>(&im), sizeof(double));
    s = {re, im};
  }
  if (!f) throw std::runtime_error("truncated frame binary: " + path);
  return frame;
}

}  // namespace pashape
