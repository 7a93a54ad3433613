// SPDX-License-Identifier: Apache-2.0
//
// Gradient training of the table source model against the rate-loss-aware
// objective: binary cross entropy of demapper LLRs through the differentiable
// perturbation channel, plus the exact matcher rate loss of the table and a
// KL pull toward the Maxwell-Boltzmann marginal. Sampling uses the
// Gumbel-Softmax trick with a straight-through estimator: hard one-hot
// symbols forward, soft-sample sensitivities backward. The rate-loss and KL
// terms are computed in closed form from the table (power iteration unrolled
// on the tape), never sampled.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pashape/autodiff.hpp"
#include "pashape/constellation.hpp"
#include "pashape/metrics.hpp"
#include "pashape/perturbation.hpp"
#include "pashape/rng.hpp"
#include "pashape/source_model.hpp"

namespace pashape {

// Order-1 init table with Boltzmann energy repulsion around a target
// marginal: p(a | ctx) proportional to target(a) exp(-theta E(a) E(ctx)).
// Temporal energy smoothing is the classic structure that lowers nonlinear
// interference; starting the optimizer there avoids the near-iid plateau.
inline TableModel repulsion_init(const Constellation& c, std::span<const double> pair_target,
                                 double theta) {
  const int a_size = c.num_amp_pairs();
  if (static_cast<int>(pair_target.size()) != a_size)
    throw std::invalid_argument("repulsion_init: target size mismatch");
  std::vector<double> table(static_cast<std::size_t>(a_size) * static_cast<std::size_t>(a_size));
  for (int ctx = 0; ctx < a_size; ++ctx) {
    double z = 0.0;
    for (int a = 0; a < a_size; ++a) {
      const double v = pair_target[static_cast<std::size_t>(a)] *
                       std::exp(-theta * c.pair_energy(a) * c.pair_energy(ctx));
      table[static_cast<std::size_t>(ctx * a_size + a)] = v;
      z += v;
    }
    for (int a = 0; a < a_size; ++a) table[static_cast<std::size_t>(ctx * a_size + a)] /= z;
  }
  return TableModel::from_probability_table(a_size, 1, table);
}

struct GumbelSample {
  std::vector<double> soft;  // softmax((logits + gumbel)/temperature)
  int hard = 0;              // argmax category
};

inline GumbelSample gumbel_softmax_sample(std::span<const double> logits, double temperature,
                                          std::uint64_t seed) {
  if (temperature <= 0.0)
    throw std::invalid_argument("gumbel_softmax_sample: temperature must be positive");
  Rng rng(seed);
  GumbelSample out;
  out.soft.resize(logits.size());
  std::vector<double> z(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i)
    z[i] = (logits[i] + rng.gumbel()) / temperature;
  model_math::softmax_row<double>(z, out.soft);
  out.hard = static_cast<int>(std::max_element(out.soft.begin(), out.soft.end()) -
                              out.soft.begin());
  return out;
}

struct TrainConfig {
  enum class Objective { L, Lpp };
  Objective objective = Objective::Lpp;
  double lambda = 10.0;       // KL weight in the rate-aware objective
  double tau_start = 1.0;     // Gumbel-Softmax temperature, geometric decay
  double tau_end = 0.3;
  int batch = 8;              // sequences per step
  int seq_len = 64;           // symbols per sequence
  double learning_rate = 2.0;
  double momentum = 0.9;
  int steps = 200;
  std::uint64_t seed = 1;
  double launch_power_dbm = 8.0;
  double noise_variance = -1.0;  // < 0: ASE-equivalent at the launch power
  double mb_entropy_target_bits_1d = 1.93;
  // Fraction of the nonlinear distortion power the training demapper folds
  // into its variance. 1 mirrors the receiver's blind estimate; smaller
  // values price nonlinearity higher, buying more temporal structure.
  double demapper_nlin_fraction = 0.35;
  int stationary_iters = 300;    // fixed unroll of the stationary-law iteration

  double temperature_at(int step) const {
    if (steps <= 1) return tau_start;
    const double f = static_cast<double>(step) / (steps - 1);
    return tau_start * std::pow(tau_end / tau_start, f);
  }
};

struct TrainTraceRow {
  int step = 0;
  double loss = 0.0;
  double r_bmd_est = 0.0;   // H(b) - mean BCE, bits/2D
  double r_loss = 0.0;      // exact table rate loss, bits/symbol
  double kl = 0.0;          // KL(marginal || MB), bits
  double grad_norm = 0.0;
  double temperature = 0.0;
};

struct TrainResult {
  TableModel model;
  std::vector<TrainTraceRow> trace;
  bool diverged = false;
};

namespace train_detail {

// Everything the templated rollout needs from the table, derived once per
// evaluation: conditional rows, stationary law, marginal, entropies, the
// marginal-dependent energy rescale.
template <class T>
struct TableView {
  std::vector<T> probs;
  std::vector<T> ctx_law;
  std::vector<T> marginal;
  T h_marginal{};
  T h_rate{};
  T r_loss{};
  T g_scale{};  // 1/sqrt(average pair energy under the marginal)

  static TableView compute(int a_size, int mu, std::span<const T> logits,
                           const Constellation& c, int stationary_iters) {
    using std::sqrt;
    TableView v;
    v.probs = model_math::table_probs<T>(a_size, mu, logits);
    v.ctx_law = model_math::stationary_context_law<T>(a_size, mu, v.probs, 1e-14, 20000,
                                                      mu > 0 ? stationary_iters : 0);
    v.marginal = model_math::stationary_marginal<T>(a_size, mu, v.probs, v.ctx_law);
    v.h_marginal = model_math::entropy_bits_t<T>(v.marginal);
    v.h_rate = model_math::entropy_rate_bits<T>(a_size, mu, v.probs, v.ctx_law);
    v.r_loss = v.h_marginal - v.h_rate;
    T energy = T(0.0);
    for (int a = 0; a < a_size; ++a)
      energy = energy + v.marginal[static_cast<std::size_t>(a)] * c.pair_energy(a);
    v.g_scale = T(1.0) / sqrt(energy);
    return v;
  }
};

// one straight-through sampled symbol: hard forward, soft backward
inline ad::Var straight_through(const ad::Var& soft, double hard_value) {
  return soft + (hard_value - soft.value());
}

// Demapper inputs shared across a batch evaluation.
template <class T>
struct DemapView {
  std::vector<ad::Cplx<T>> points;  // marginal-rescaled constellation
  std::vector<T> log_prior;         // log(marginal(pair)/4) per point

  static DemapView compute(const Constellation& c, const TableView<T>& tv) {
    using std::log;
    DemapView d;
    d.points.resize(c.points.size());
    d.log_prior.resize(c.points.size());
    for (int i = 0; i < c.order; ++i) {
      const SignAmp sa = decompose(i, c);
      const auto& p = c.points[static_cast<std::size_t>(i)];
      d.points[static_cast<std::size_t>(i)] =
          ad::Cplx<T>(tv.g_scale * p.real(), tv.g_scale * p.imag());
      d.log_prior[static_cast<std::size_t>(i)] =
          log(tv.marginal[static_cast<std::size_t>(sa.amplitude_index)]) - std::log(4.0);
    }
    return d;
  }
};

}  // namespace train_detail

// Loss terms of one evaluation; values live on the active tape when T = Var.
template <class T>
struct LossTerms {
  T bce_mean{};   // mean over symbols of the per-symbol bit BCE sum, bits/2D
  T h_bits{};     // H(b) = 2 + marginal entropy, bits/2D
  T loss_l{};     // bce_mean - h_bits
  T r_loss{};     // exact table rate loss
  T kl{};         // KL(marginal || MB pair target)
  T loss{};       // selected objective
};

class Trainer {
 public:
  Trainer(const Constellation& c, const PerturbationKernel& kernel, TrainConfig cfg,
          double fallback_noise_variance = 0.0)
      : c_(c), kernel_(kernel), cfg_(cfg) {
    if (cfg_.batch < 1 || cfg_.seq_len < 1 || cfg_.steps < 1)
      throw std::invalid_argument("TrainConfig: batch, seq_len, steps must be >= 1");
    if (cfg_.seq_len <= 2 * kernel.k_mem)
      throw std::invalid_argument("TrainConfig: seq_len must exceed 2*kernel memory");
    noise_var_ = cfg_.noise_variance >= 0.0 ? cfg_.noise_variance : fallback_noise_variance;
    const MbDistribution mb = mb_fit_entropy(c_, cfg_.mb_entropy_target_bits_1d, 1e-9);
    mb_pair_ = pair_probs_from_1d(c_, mb.probs);
    // The demapper assumes ASE plus the nonlinear distortion power at this
    // launch power, mirroring the receiver's blind variance estimate. With
    // ASE alone the training loss prices nonlinearity several times above
    // its evaluation cost and the optimizer overbuys temporal structure.
    demap_var_ = noise_var_ + cfg_.demapper_nlin_fraction * estimate_nlin_variance();
  }

  const std::vector<double>& mb_pair_target() const { return mb_pair_; }
  double noise_variance() const { return noise_var_; }
  double demapper_variance() const { return demap_var_; }

  // Monte Carlo loss of one batch at the given step, with straight-through
  // sampling. T = ad::Var trains; T = double replays the identical values.
  template <class T>
  LossTerms<T> loss_on_batch(std::span<const T> logits, int a_size, int mu, int step) const {
    const train_detail::TableView<T> tv = train_detail::TableView<T>::compute(
        a_size, mu, logits, c_, cfg_.stationary_iters);
    const train_detail::DemapView<T> dv = train_detail::DemapView<T>::compute(c_, tv);
    const double tau = cfg_.temperature_at(step);
    const T inv_nv = T(1.0) / T(demap_var_);

    T bce_total = T(0.0);
    std::vector<T> llr(static_cast<std::size_t>(c_.bits_per_symbol));
    for (int item = 0; item < cfg_.batch; ++item) {
      Rng rng(cfg_.seed, "train/step=" + std::to_string(step) + "/item=" + std::to_string(item));
      // stationary boot context (values only; gradients of the boot law are
      // a boundary term the Monte Carlo objective drops)
      std::size_t ctx = 0;
      if (mu > 0) {
        std::vector<double> law_values(tv.ctx_law.size());
        for (std::size_t i = 0; i < law_values.size(); ++i)
          law_values[i] = scalar_value(tv.ctx_law[i]);
        ctx = static_cast<std::size_t>(rng.categorical(law_values));
      }
      std::vector<ad::Cplx<T>> x(static_cast<std::size_t>(cfg_.seq_len));
      std::vector<std::uint32_t> labels(static_cast<std::size_t>(cfg_.seq_len));
      const std::size_t roll_mod =
          model_math::pow_size(a_size, mu) / (mu > 0 ? static_cast<std::size_t>(a_size) : 1);
      for (int t = 0; t < cfg_.seq_len; ++t) {
        const std::size_t base = ctx * static_cast<std::size_t>(a_size);
        // soft = softmax((logits + gumbel)/tau) on the tape
        std::vector<T> z(static_cast<std::size_t>(a_size));
        for (int a = 0; a < a_size; ++a)
          z[static_cast<std::size_t>(a)] =
              (logits[base + static_cast<std::size_t>(a)] + rng.gumbel()) * (1.0 / tau);
        std::vector<T> soft(static_cast<std::size_t>(a_size));
        model_math::softmax_row<T>(z, soft);
        int hard = 0;
        for (int a = 1; a < a_size; ++a)
          if (scalar_value(soft[static_cast<std::size_t>(a)]) >
              scalar_value(soft[static_cast<std::size_t>(hard)]))
            hard = a;
        // straight-through amplitude pair
        T amp_i = T(0.0), amp_q = T(0.0);
        for (int a = 0; a < a_size; ++a) {
          const T st = st_combine(soft[static_cast<std::size_t>(a)], a == hard ? 1.0 : 0.0);
          amp_i = amp_i + st * c_.amp_i_of_pair(a);
          amp_q = amp_q + st * c_.amp_q_of_pair(a);
        }
        const int sign_i = rng.bit() ? 1 : -1;
        const int sign_q = rng.bit() ? 1 : -1;
        x[static_cast<std::size_t>(t)] =
            ad::Cplx<T>(tv.g_scale * (amp_i * static_cast<double>(sign_i)),
                        tv.g_scale * (amp_q * static_cast<double>(sign_q)));
        const int quadrant = 2 * (sign_i < 0) + (sign_q < 0);
        labels[static_cast<std::size_t>(t)] =
            c_.labels[static_cast<std::size_t>(recompose({quadrant, hard}, c_))];
        ctx = mu > 0 ? (ctx % roll_mod) * static_cast<std::size_t>(a_size) +
                           static_cast<std::size_t>(hard)
                     : 0;
      }
      auto y = perturbation_channel<T>(x, kernel_, cfg_.launch_power_dbm, noise_var_, rng);
      for (int t = 0; t < cfg_.seq_len; ++t) {
        demap_detail::demap_symbol<T>(dv.points, dv.log_prior, c_.labels, c_.bits_per_symbol,
                                      y[static_cast<std::size_t>(t)], inv_nv, llr, nullptr);
        for (int i = 0; i < c_.bits_per_symbol; ++i) {
          const double sign =
              ((labels[static_cast<std::size_t>(t)] >> i) & 1u) ? -1.0 : 1.0;
          bce_total = bce_total + bce_bits<T>(llr[static_cast<std::size_t>(i)] * sign);
        }
      }
    }

    LossTerms<T> terms;
    terms.bce_mean = bce_total * (1.0 / static_cast<double>(cfg_.batch * cfg_.seq_len));
    terms.h_bits = tv.h_marginal + 2.0;
    terms.loss_l = terms.bce_mean - terms.h_bits;
    terms.r_loss = tv.r_loss;
    terms.kl = model_math::kl_bits<T>(tv.marginal, mb_pair_);
    terms.loss = cfg_.objective == TrainConfig::Objective::L
                     ? terms.loss_l
                     : terms.loss_l + terms.r_loss + cfg_.lambda * terms.kl;
    return terms;
  }

  TrainResult run(const TableModel& init) const {
    const int a_size = init.alphabet_size();
    const int mu = init.memory();
    if (a_size != c_.num_amp_pairs())
      throw std::invalid_argument("Trainer: model alphabet must match the amplitude pairs");
    std::vector<double> logits(init.logits().begin(), init.logits().end());
    std::vector<double> velocity(logits.size(), 0.0);

    TrainResult result;
    ad::Tape tape;
    for (int step = 0; step < cfg_.steps; ++step) {
      tape.clear();
      ad::TapeScope scope(tape);
      std::vector<ad::Var> leaves(logits.size());
      for (std::size_t i = 0; i < logits.size(); ++i) {
        leaves[i] = ad::Var::leaf(logits[i]);
      }
      const LossTerms<ad::Var> terms =
          loss_on_batch<ad::Var>(leaves, a_size, mu, step);
      const auto grad = ad::gradient(tape, terms.loss, leaves);

      TrainTraceRow row;
      row.step = step;
      row.loss = terms.loss.value();
      row.r_bmd_est = terms.h_bits.value() - terms.bce_mean.value();
      row.r_loss = terms.r_loss.value();
      row.kl = terms.kl.value();
      row.temperature = cfg_.temperature_at(step);
      double g2 = 0.0;
      for (double g : grad) g2 += g * g;
      row.grad_norm = std::sqrt(g2);
      result.trace.push_back(row);
      if (!std::isfinite(row.loss) || !std::isfinite(row.grad_norm)) {
        result.diverged = true;
        break;
      }
      for (std::size_t i = 0; i < logits.size(); ++i) {
        velocity[i] = cfg_.momentum * velocity[i] - cfg_.learning_rate * grad[i];
        logits[i] += velocity[i];
      }
    }
    result.model = TableModel(a_size, mu, logits);
    return result;
  }

 private:
  static ad::Var st_combine(const ad::Var& soft, double hard) {
    return train_detail::straight_through(soft, hard);
  }
  static double st_combine(double soft, double hard) {
    (void)soft;
    return hard;  // double replay: forward values use the hard sample
  }

  // mean nonlinear distortion power (normalized domain) under the MB target
  double estimate_nlin_variance() const {
    Rng rng(cfg_.seed, "trainer/nlin-var");
    const Constellation sc = scaled_for_marginal(c_, mb_pair_);
    const std::size_t n = 512;
    std::vector<ad::Cplx<double>> x(n);
    for (auto& v : x) {
      const int pair = rng.categorical(mb_pair_);
      const double si = rng.bit() ? 1.0 : -1.0;
      const double sq = rng.bit() ? 1.0 : -1.0;
      v = ad::Cplx<double>(si * sc.amp_i_of_pair(pair), sq * sc.amp_q_of_pair(pair));
    }
    const double p_w = FiberConfig::dbm_to_watt(cfg_.launch_power_dbm);
    const auto dist = perturbation_distortion<double>(x, kernel_, p_w);
    double acc = 0.0;
    for (const auto& d : dist) acc += norm(d);
    return acc / (static_cast<double>(n) * p_w);
  }

  const Constellation& c_;
  const PerturbationKernel& kernel_;
  TrainConfig cfg_;
  double noise_var_ = 0.0;
  double demap_var_ = 0.0;
  std::vector<double> mb_pair_;
};

// --- gradient check ---------------------------------------------------------
//
// On a tiny instance the Monte Carlo expectation is replaced by the exact
// one: every length-N sequence is enumerated with its model probability
// (boot segment included, differentiably), each passing through the
// deterministic pipeline with frozen signs and noise. The result is a smooth
// function of the logits, so central finite differences validate the
// analytic gradients of the full objective and of the exact rate-loss and
// KL terms alone.

struct GradCheckConfig {
  int seq_len = 4;
  double lambda = 5.0;
  double launch_power_dbm = 6.0;
  double noise_variance = 0.05;
  double mb_entropy_target_bits_1d = 0.8;
  int stationary_iters = 400;
  double fd_step = 1e-5;
};

struct GradCheckReport {
  double max_rel_full = 0.0;
  double max_rel_r_loss = 0.0;
  double max_rel_kl = 0.0;
  std::size_t worst_coordinate = 0;
};

namespace train_detail {

struct GcSetup {
  const Constellation* c = nullptr;
  const PerturbationKernel* kernel = nullptr;
  GradCheckConfig cfg;
  std::vector<double> mb_pair;
  std::vector<int> signs_i, signs_q;              // per (sequence, position)
  std::vector<std::complex<double>> noise;        // per (sequence, position)
  int a_size = 0, mu = 0;
  std::size_t num_sequences = 0;
};

enum class GcTerm { full, r_loss_only, kl_only };

template <class T>
T gc_objective(std::span<const T> logits, const GcSetup& s, GcTerm term) {
  const TableView<T> tv =
      TableView<T>::compute(s.a_size, s.mu, logits, *s.c, s.cfg.stationary_iters);
  if (term == GcTerm::r_loss_only) return tv.r_loss;
  if (term == GcTerm::kl_only) return model_math::kl_bits<T>(tv.marginal, s.mb_pair);

  const DemapView<T> dv = DemapView<T>::compute(*s.c, tv);
  const auto starts = model_math::start_conditionals_t<T>(s.a_size, s.mu, tv.ctx_law);
  const int n = s.cfg.seq_len;
  const T inv_nv = T(1.0) / T(s.cfg.noise_variance);
  const double p_w = FiberConfig::dbm_to_watt(s.cfg.launch_power_dbm);
  const double inv_sqrt_p = 1.0 / std::sqrt(p_w);
  const std::size_t roll_mod =
      model_math::pow_size(s.a_size, s.mu) / (s.mu > 0 ? static_cast<std::size_t>(s.a_size) : 1);

  std::vector<int> seq(static_cast<std::size_t>(n));
  std::vector<ad::Cplx<T>> x(static_cast<std::size_t>(n));
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(n));
  std::vector<T> llr(static_cast<std::size_t>(s.c->bits_per_symbol));
  T expected_bce = T(0.0);
  for (std::size_t si = 0; si < s.num_sequences; ++si) {
    std::size_t rem = si;
    for (int t = n - 1; t >= 0; --t) {
      seq[static_cast<std::size_t>(t)] = static_cast<int>(rem % s.a_size);
      rem /= static_cast<std::size_t>(s.a_size);
    }
    T weight = T(1.0);
    std::size_t ctx = 0, prefix = 0;
    for (int t = 0; t < n; ++t) {
      const int a = seq[static_cast<std::size_t>(t)];
      if (t < s.mu) {
        weight = weight * starts[static_cast<std::size_t>(t)]
                                [prefix * static_cast<std::size_t>(s.a_size) +
                                 static_cast<std::size_t>(a)];
        prefix = prefix * static_cast<std::size_t>(s.a_size) + static_cast<std::size_t>(a);
        ctx = prefix;
      } else {
        weight = weight * tv.probs[ctx * static_cast<std::size_t>(s.a_size) +
                                   static_cast<std::size_t>(a)];
        ctx = (ctx % roll_mod) * static_cast<std::size_t>(s.a_size) + static_cast<std::size_t>(a);
      }
      const std::size_t fi = si * static_cast<std::size_t>(n) + static_cast<std::size_t>(t);
      x[static_cast<std::size_t>(t)] =
          ad::Cplx<T>(tv.g_scale * (s.c->amp_i_of_pair(a) * s.signs_i[fi]),
                      tv.g_scale * (s.c->amp_q_of_pair(a) * s.signs_q[fi]));
      const int quadrant = 2 * (s.signs_i[fi] < 0) + (s.signs_q[fi] < 0);
      labels[static_cast<std::size_t>(t)] =
          s.c->labels[static_cast<std::size_t>(recompose({quadrant, a}, *s.c))];
    }
    auto dist = perturbation_distortion<T>(x, *s.kernel, p_w);
    T bce = T(0.0);
    for (int t = 0; t < n; ++t) {
      const std::size_t fi = si * static_cast<std::size_t>(n) + static_cast<std::size_t>(t);
      const ad::Cplx<T> y = x[static_cast<std::size_t>(t)] +
                            dist[static_cast<std::size_t>(t)] * inv_sqrt_p +
                            ad::Cplx<T>(s.noise[fi]);
      demap_detail::demap_symbol<T>(dv.points, dv.log_prior, s.c->labels, s.c->bits_per_symbol,
                                    y, inv_nv, llr, nullptr);
      for (int i = 0; i < s.c->bits_per_symbol; ++i) {
        const double sign = ((labels[static_cast<std::size_t>(t)] >> i) & 1u) ? -1.0 : 1.0;
        bce = bce + bce_bits<T>(llr[static_cast<std::size_t>(i)] * sign);
      }
    }
    expected_bce = expected_bce + weight * bce;
  }
  const T loss_l = expected_bce * (1.0 / n) - (tv.h_marginal + 2.0);
  return loss_l + tv.r_loss + s.cfg.lambda * model_math::kl_bits<T>(tv.marginal, s.mb_pair);
}

inline double gc_max_rel_error(const GcSetup& s, std::span<const double> base, GcTerm term,
                               std::size_t* worst) {
  // analytic gradient
  ad::Tape tape;
  std::vector<double> analytic;
  {
    ad::TapeScope scope(tape);
    std::vector<ad::Var> leaves(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) leaves[i] = ad::Var::leaf(base[i]);
    const ad::Var out = gc_objective<ad::Var>(leaves, s, term);
    analytic = ad::gradient(tape, out, leaves);
  }
  // central finite differences on the double path
  std::vector<double> point(base.begin(), base.end());
  std::vector<double> fd(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double h = s.cfg.fd_step;
    point[i] = base[i] + h;
    const double up = gc_objective<double>(point, s, term);
    point[i] = base[i] - h;
    const double dn = gc_objective<double>(point, s, term);
    point[i] = base[i];
    fd[i] = (up - dn) / (2.0 * h);
  }
  double gmax = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i)
    gmax = std::max(gmax, std::max(std::abs(analytic[i]), std::abs(fd[i])));
  double worst_rel = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-6 * gmax, 1e-12});
    const double rel = std::abs(analytic[i] - fd[i]) / denom;
    if (rel > worst_rel) {
      worst_rel = rel;
      if (worst) *worst = i;
    }
  }
  return worst_rel;
}

}  // namespace train_detail

inline GradCheckReport gradient_check(const TableModel& model, const Constellation& c,
                                      const PerturbationKernel& kernel,
                                      const GradCheckConfig& cfg = {}) {
  if (model.alphabet_size() > 4 || model.memory() > 1)
    throw std::invalid_argument("gradient_check: instance too large (need A <= 4, mu <= 1)");
  if (model.alphabet_size() != c.num_amp_pairs())
    throw std::invalid_argument("gradient_check: model alphabet must match the amplitude pairs");
  if (cfg.seq_len <= 2 * kernel.k_mem)
    throw std::invalid_argument("gradient_check: seq_len must exceed 2*kernel memory");

  train_detail::GcSetup s;
  s.c = &c;
  s.kernel = &kernel;
  s.cfg = cfg;
  s.a_size = model.alphabet_size();
  s.mu = model.memory();
  s.mb_pair = pair_probs_from_1d(c, mb_fit_entropy(c, cfg.mb_entropy_target_bits_1d, 1e-9).probs);
  s.num_sequences = model_math::pow_size(s.a_size, cfg.seq_len);
  const std::size_t cells = s.num_sequences * static_cast<std::size_t>(cfg.seq_len);
  s.signs_i.resize(cells);
  s.signs_q.resize(cells);
  s.noise.resize(cells);
  Rng rng(97, "gradient_check/frozen-draws");
  const double namp = std::sqrt(0.5 * cfg.noise_variance);
  for (std::size_t i = 0; i < cells; ++i) {
    s.signs_i[i] = rng.bit() ? 1 : -1;
    s.signs_q[i] = rng.bit() ? 1 : -1;
    s.noise[i] = {namp * rng.gaussian(), namp * rng.gaussian()};
  }

  const std::vector<double> base(model.logits().begin(), model.logits().end());
  GradCheckReport report;
  report.max_rel_r_loss =
      train_detail::gc_max_rel_error(s, base, train_detail::GcTerm::r_loss_only, nullptr);
  report.max_rel_kl =
      train_detail::gc_max_rel_error(s, base, train_detail::GcTerm::kl_only, nullptr);
  report.max_rel_full = train_detail::gc_max_rel_error(s, base, train_detail::GcTerm::full,
                                                       &report.worst_coordinate);
  return report;
}

}  // namespace pashape
