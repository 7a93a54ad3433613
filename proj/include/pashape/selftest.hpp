// SPDX-License-Identifier: Apache-2.0
//
// Fast invariant gate: one line per check, nonzero exit on any failure.
// These are the cheap structural checks of every module; the statistical
// checks live in the test suite.

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "pashape/adm.hpp"
#include "pashape/channel.hpp"
#include "pashape/constellation.hpp"
#include "pashape/ess.hpp"
#include "pashape/experiment.hpp"
#include "pashape/fft.hpp"
#include "pashape/metrics.hpp"
#include "pashape/perturbation.hpp"
#include "pashape/selection.hpp"
#include "pashape/source_model.hpp"
#include "pashape/training.hpp"

namespace pashape {

class SelfTest {
 public:
  explicit SelfTest(std::ostream& os) : os_(os) {}

  bool run() {
    check("constellation/unit-energy", [] {
      for (int order : {16, 64, 256}) {
        const Constellation c = build_qam(order);
        double e = 0.0;
        for (const auto& p : c.points) e += std::norm(p);
        if (std::abs(e / c.order - 1.0) > 1e-12) return false;
      }
      return true;
    });
    check("constellation/gray-neighbors", [] {
      const Constellation c = build_qam(64);
      const int side = 8;
      auto pop = [](std::uint32_t v) { int n = 0; for (; v; v >>= 1) n += v & 1u; return n; };
      for (int i = 0; i < side; ++i)
        for (int q = 0; q < side; ++q) {
          if (i + 1 < side &&
              pop(c.labels[std::size_t(i * side + q)] ^ c.labels[std::size_t((i + 1) * side + q)]) != 1)
            return false;
          if (q + 1 < side &&
              pop(c.labels[std::size_t(i * side + q)] ^ c.labels[std::size_t(i * side + q + 1)]) != 1)
            return false;
        }
      return true;
    });
    check("constellation/decompose-bijection", [] {
      const Constellation c = build_qam(64);
      for (int i = 0; i < c.order; ++i)
        if (recompose(decompose(i, c), c) != i) return false;
      const SignAmp sa = decompose(0, c);  // point (+7,+7): both signs positive
      return sa.sign_quadrant == 0;
    });
    check("constellation/mb-fit", [] {
      const Constellation c = build_qam(64);
      const MbDistribution flat = mb_fit_entropy(c, 2.0, 1e-9);
      if (std::abs(flat.probs[0] - 0.25) > 1e-6) return false;
      const MbDistribution d = mb_fit_entropy(c, 1.93, 1e-9);
      return std::abs(entropy_bits(d.probs) - 1.93) <= 1e-6;
    });
    check("source-model/iid-rate-loss-zero", [] {
      const TableModel m = TableModel::iid(std::vector<double>{0.1, 0.2, 0.3, 0.4});
      return std::abs(rate_loss_theoretical(m)) <= 1e-12;
    });
    check("source-model/uniform-softmax", [] {
      const TableModel m = TableModel::uniform(8, 1);
      for (std::size_t ctx = 0; ctx < m.num_contexts(); ++ctx)
        for (double p : m.row(ctx))
          if (std::abs(p - 0.125) > 1e-12) return false;
      return true;
    });
    check("source-model/sample-determinism", [] {
      const TableModel m = TableModel::uniform(4, 1);
      return sample_sequence(m, 64, 5) == sample_sequence(m, 64, 5);
    });
    check("adm/binary-identity", [] {
      const AdmCoder coder(TableModel::uniform(2, 0));
      Rng rng(1);
      const BitStream p = random_bits(rng, 128);
      const auto sym = coder.encode(p);
      if (sym.size() != p.size()) return false;
      for (std::size_t i = 0; i < sym.size(); ++i)
        if (sym[i] != p[i]) return false;
      return coder.decode(sym, p.size()) == p;
    });
    check("adm/round-trip", [] {
      const Constellation c = build_qam(64);
      const MbDistribution d = mb_fit_entropy(c, 1.93, 1e-9);
      const TableModel m = TableModel::iid(pair_probs_from_1d(c, d.probs));
      const AdmCoder coder(m);
      Rng rng(2);
      for (int t = 0; t < 25; ++t) {
        const BitStream p = random_bits(rng, 96);
        if (!(coder.decode(coder.encode(p), p.size()) == p)) return false;
      }
      return true;
    });
    check("ess/tiny-enumeration", [] {
      const EssCoder coder(2, {1, 3}, 10);
      return static_cast<std::uint64_t>(coder.total_sequences()) == 3 &&
             coder.index_bits() == 1 && coder.encode(std::uint64_t(0)) == std::vector<int>{1, 1};
    });
    check("ess/unconstrained-count", [] {
      const EssCoder coder(5, {1, 3}, 5 * 9);
      return static_cast<std::uint64_t>(coder.total_sequences()) == 32;
    });
    check("fft/round-trip", [] {
      Rng rng(3);
      std::vector<std::complex<double>> v(256);
      for (auto& x : v) x = {rng.gaussian(), rng.gaussian()};
      auto w = v;
      fft_inplace(w, false);
      fft_inplace(w, true);
      for (std::size_t i = 0; i < v.size(); ++i)
        if (std::abs(w[i] - v[i]) > 1e-12) return false;
      return true;
    });
    check("channel/rrc-transparent-evm", [] {
      FiberConfig cfg;
      Rng rng(4);
      const Constellation c = build_qam(64);
      std::vector<std::complex<double>> sym(256);
      for (auto& s : sym) s = c.points[rng.below(64)];
      const ComplexFrame tx = rrc_shape(sym, cfg, 0.0);
      const auto rx = matched_filter_downsample(tx, cfg);
      // remove the launch-power scaling with an LS gain, then compare
      std::complex<double> num(0.0, 0.0);
      double den = 0.0;
      for (std::size_t i = 0; i < rx.size(); ++i) {
        num += std::conj(sym[i]) * rx[i];
        den += std::norm(sym[i]);
      }
      std::vector<std::complex<double>> norm_rx(rx.size());
      for (std::size_t i = 0; i < rx.size(); ++i) norm_rx[i] = rx[i] * (den / num);
      return evm_db(norm_rx, sym) < -50.0;
    });
    check("channel/rrc-spectrum-confined", [] {
      FiberConfig cfg;
      Rng rng(5);
      const Constellation c = build_qam(64);
      std::vector<std::complex<double>> sym(256);
      for (auto& s : sym) s = c.points[rng.below(64)];
      ComplexFrame tx = rrc_shape(sym, cfg, 0.0);
      auto spec = tx.samples;
      fft_inplace(spec, false);
      const double half_bw = 0.5 * (1.0 + cfg.rrc_rolloff) / cfg.oversampling;
      double inside = 0.0, outside = 0.0;
      for (std::size_t k = 0; k < spec.size(); ++k) {
        const double f = std::abs(fft_bin_freq(k, spec.size()));
        (f <= half_bw + 1e-12 ? inside : outside) += std::norm(spec[k]);
      }
      return outside <= 1e-20 * inside;
    });
    check("channel/ssfm-lossless-energy", [] {
      FiberConfig cfg;
      cfg.attenuation_db_per_km = 0.0;
      cfg.amp_noise_figure_db = 0.0;
      cfg.ase_enabled = false;
      Rng rng(6);
      const Constellation c = build_qam(64);
      std::vector<std::complex<double>> sym(256);
      for (auto& s : sym) s = c.points[rng.below(64)];
      const ComplexFrame tx = rrc_shape(sym, cfg, 3.0);
      const ComplexFrame rx = ssfm_propagate(tx, cfg, 1);
      return std::abs(rx.mean_power_w() / tx.mean_power_w() - 1.0) <= 1e-9;
    });
    check("channel/attenuation-budget", [] {
      FiberConfig cfg;
      cfg.edfa_enabled = false;
      cfg.ase_enabled = false;
      Rng rng(7);
      const Constellation c = build_qam(64);
      std::vector<std::complex<double>> sym(256);
      for (auto& s : sym) s = c.points[rng.below(64)];
      const ComplexFrame tx = rrc_shape(sym, cfg, 0.0);
      const ComplexFrame rx = ssfm_propagate(tx, cfg, 1);
      const double drop_db = 10.0 * std::log10(tx.mean_power_w() / rx.mean_power_w());
      return std::abs(drop_db - 0.2 * 205.0) <= 0.01;
    });
    check("channel/cdc-inverse-not-idempotent", [] {
      FiberConfig cfg;
      cfg.gamma_per_w_km = 0.0;
      cfg.attenuation_db_per_km = 0.0;
      cfg.ase_enabled = false;
      Rng rng(8);
      const Constellation c = build_qam(64);
      std::vector<std::complex<double>> sym(256);
      for (auto& s : sym) s = c.points[rng.below(64)];
      const ComplexFrame tx = rrc_shape(sym, cfg, 0.0);
      const ComplexFrame rx = ssfm_propagate(tx, cfg, 1);
      const ComplexFrame once = cd_compensate(rx, cfg);
      const ComplexFrame twice = cd_compensate(once, cfg);
      std::vector<std::complex<double>> a(once.samples), b(tx.samples);
      if (evm_db(a, b) >= -60.0) return false;
      return evm_db(twice.samples, tx.samples) > -20.0;  // phase doubled, far from identity
    });
    check("perturbation/kernel-symmetry", [] {
      FiberConfig cfg;
      const PerturbationKernel ker = kernel_from_fiber(cfg, 4);
      for (int k = -4; k <= 4; ++k)
        for (int l = -4; l <= 4; ++l)
          if (std::abs(ker.at(k, l) - ker.at(l, k)) > 1e-15) return false;
      double c00 = std::abs(ker.at(0, 0));
      for (const auto& v : ker.c)
        if (std::abs(v) > c00 + 1e-15) return false;
      return true;
    });
    check("perturbation/cubic-homogeneity", [] {
      FiberConfig cfg;
      const PerturbationKernel ker = kernel_from_fiber(cfg, 2);
      Rng rng(9);
      std::vector<ad::Cplx<double>> x(32);
      for (auto& v : x) v = ad::Cplx<double>(rng.gaussian(), rng.gaussian());
      const auto d1 = perturbation_distortion<double>(x, ker, 1e-3);
      const auto d2 = perturbation_distortion<double>(x, ker, 2e-3);
      const double want = std::pow(2.0, 1.5);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = std::abs(std::complex<double>(d2[i].re, d2[i].im)) /
                         std::abs(std::complex<double>(d1[i].re, d1[i].im));
        if (std::abs(r - want) > 1e-9) return false;
      }
      return true;
    });
    check("metrics/bpsk-closed-form", [] {
      Constellation bpsk;
      bpsk.order = 2;
      bpsk.bits_per_symbol = 1;
      bpsk.points = {{1.0, 0.0}, {-1.0, 0.0}};
      bpsk.labels = {0u, 1u};
      bpsk.amp_alphabet = {1.0};
      const double nv = 0.37;
      std::vector<double> prior{0.5, 0.5};
      std::vector<std::complex<double>> y{{0.41, -0.3}};
      std::vector<std::uint32_t> tx{0u};
      const LlrFrame f = gaussian_demap(y, bpsk, prior, nv, tx);
      return std::abs(f.llrs[0] - 4.0 * y[0].real() / nv) <= 1e-12;
    });
    check("metrics/on-point-llr-signs", [] {
      const Constellation c = build_qam(64);
      std::vector<double> prior(64, 1.0 / 64);
      for (int i = 0; i < c.order; ++i) {
        std::vector<std::complex<double>> y{c.points[std::size_t(i)]};
        std::vector<std::uint32_t> tx{c.labels[std::size_t(i)]};
        const LlrFrame f = gaussian_demap(y, c, prior, 1e-4, tx);
        for (int b = 0; b < c.bits_per_symbol; ++b) {
          const bool bit = (c.labels[std::size_t(i)] >> b) & 1u;
          if (bit && f.llrs[std::size_t(b)] >= 0) return false;
          if (!bit && f.llrs[std::size_t(b)] <= 0) return false;
        }
      }
      return true;
    });
    check("metrics/noiseless-air-is-entropy", [] {
      const Constellation c = build_qam(64);
      std::vector<double> prior(64, 1.0 / 64);
      Rng rng(10);
      std::vector<std::complex<double>> y(512);
      std::vector<std::uint32_t> tx(512);
      for (std::size_t i = 0; i < y.size(); ++i) {
        const int idx = static_cast<int>(rng.below(64));
        y[i] = c.points[std::size_t(idx)];
        tx[i] = c.labels[std::size_t(idx)];
      }
      const LlrFrame f = gaussian_demap(y, c, prior, 1e-4, tx);
      const AirReport r = estimate_air(std::vector<LlrFrame>{f}, 6.0, 0.0,
                                       RateLossSource::theoretical, 1);
      return std::abs(r.r_bmd - 6.0) <= 1e-6 && r.net_air <= r.marginal_entropy_bits_per_2d;
    });
    check("training/gumbel-determinism", [] {
      std::vector<double> logits{0.3, -0.2, 0.9};
      const GumbelSample a = gumbel_softmax_sample(logits, 0.7, 42);
      const GumbelSample b = gumbel_softmax_sample(logits, 0.7, 42);
      if (a.hard != b.hard || a.soft != b.soft) return false;
      const GumbelSample cold = gumbel_softmax_sample(logits, 1e-4, 42);
      return cold.soft[std::size_t(cold.hard)] > 0.999;
    });
    check("training/straight-through-contract", [] {
      ad::Tape tape;
      ad::TapeScope scope(tape);
      std::vector<ad::Var> leaves{ad::Var::leaf(0.4), ad::Var::leaf(-0.1)};
      std::vector<ad::Var> soft(2);
      model_math::softmax_row<ad::Var>(leaves, soft);
      const int hard = soft[0].value() > soft[1].value() ? 0 : 1;
      // forward exactly one-hot
      const ad::Var st0 = soft[0] + ((hard == 0 ? 1.0 : 0.0) - soft[0].value());
      const ad::Var st1 = soft[1] + ((hard == 1 ? 1.0 : 0.0) - soft[1].value());
      if (st0.value() != (hard == 0 ? 1.0 : 0.0)) return false;
      if (st1.value() != (hard == 1 ? 1.0 : 0.0)) return false;
      // backward sensitivities equal the soft sample's
      const ad::Var out = st0 * 3.0 + st1 * -2.0;
      const auto g_st = ad::gradient(tape, out, leaves);
      const ad::Var out_soft = soft[0] * 3.0 + soft[1] * -2.0;
      const auto g_soft = ad::gradient(tape, out_soft, leaves);
      for (std::size_t i = 0; i < 2; ++i)
        if (std::abs(g_st[i] - g_soft[i]) > 1e-15) return false;
      return true;
    });
    check("selection/argmin-and-tiebreak", [] {
      FiberConfig cfg;
      const PerturbationKernel ker = kernel_from_fiber(cfg, 2);
      PerturbationKernel zero = ker;
      for (auto& v : zero.c) v = {0.0, 0.0};
      const Constellation c = build_qam(64);
      const EssCoder coder = ess_build(8, c.amp_alphabet, 8.0 * c.pair_energy(15) / 2.0);
      SelectionConfig sel;
      sel.block_len_symbols = 8;
      sel.candidates = 2;
      Rng rng(11);
      const BitStream payload = random_bits(rng, 2 * std::size_t(coder.index_bits()));
      const SelectionResult z = select_sequence(payload, sel, coder, zero, 3);
      if (z.chosen_candidate != 0 || z.metric != 0.0) return false;  // constant metric tie-break
      const SelectionResult r = select_sequence(payload, sel, coder, ker, 3);
      for (double m : r.candidate_metrics)
        if (r.metric > m) return false;  // argmin contract
      return true;
    });
    check("selection/metric-s6-scaling", [] {
      FiberConfig cfg;
      const PerturbationKernel ker = kernel_from_fiber(cfg, 2);
      Rng rng(12);
      std::vector<double> e(16), e2(16);
      for (std::size_t i = 0; i < e.size(); ++i) {
        e[i] = 0.5 + rng.uniform01();
        e2[i] = 4.0 * e[i];  // amplitudes scaled by 2 -> energies by 4
      }
      const double m1 = nlin_metric(e, ker);
      const double m2 = nlin_metric(e2, ker);
      return std::abs(m2 / m1 - 64.0) <= 1e-9;  // s^6 with s = 2
    });
    check("config/round-trip-idempotent", [] {
      const std::string text = "[a]\nx = 1\ny = two\n\n[b]\nz = 3.5\n";
      const std::string once = Config::parse(text).dump();
      return Config::parse(once).dump() == once;
    });
    os_ << (failures_ == 0 ? "selftest: all checks passed (" : "selftest: FAILURES (")
        << passed_ << "/" << passed_ + failures_ << ")\n";
    return failures_ == 0;
  }

 private:
  void check(const std::string& name, const std::function<bool()>& fn) {
    bool ok = false;
    std::string err;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      err = e.what();
    }
    if (ok) {
      ++passed_;
      os_ << "ok   " << name << "\n";
    } else {
      ++failures_;
      os_ << "FAIL " << name << (err.empty() ? "" : ": " + err) << "\n";
    }
  }

  std::ostream& os_;
  int passed_ = 0;
  int failures_ = 0;
};

}  // namespace pashape
