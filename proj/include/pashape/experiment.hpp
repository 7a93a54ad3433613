// SPDX-License-Identifier: Apache-2.0
//
// Experiment harness: builds transmit schemes (uniform, ESS, ESS+selection,
// ADM-driven source models), runs the full chain through the split-step
// channel and the DSP/demapper stack, and accumulates bit-metric AIR
// reports. All randomness derives from one root seed through named streams;
// channel noise streams are keyed by (power, frame) only, so every scheme
// sees the same noise realizations and scheme comparisons are paired.

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pashape/adm.hpp"
#include "pashape/channel.hpp"
#include "pashape/config.hpp"
#include "pashape/constellation.hpp"
#include "pashape/csv.hpp"
#include "pashape/ess.hpp"
#include "pashape/metrics.hpp"
#include "pashape/perturbation.hpp"
#include "pashape/selection.hpp"
#include "pashape/source_model.hpp"
#include "pashape/training.hpp"

namespace pashape {

struct InvariantFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline FiberConfig fiber_from_config(const Config& cfg) {
  FiberConfig f;
  f.span_length_km = cfg.get_double("fiber", "span_length_km", f.span_length_km);
  f.attenuation_db_per_km = cfg.get_double("fiber", "attenuation_db_per_km", f.attenuation_db_per_km);
  f.dispersion_ps_nm_km = cfg.get_double("fiber", "dispersion_ps_nm_km", f.dispersion_ps_nm_km);
  f.gamma_per_w_km = cfg.get_double("fiber", "gamma_per_w_km", f.gamma_per_w_km);
  f.amp_noise_figure_db = cfg.get_double("fiber", "amp_noise_figure_db", f.amp_noise_figure_db);
  f.center_wavelength_nm = cfg.get_double("fiber", "center_wavelength_nm", f.center_wavelength_nm);
  f.symbol_rate_gbd = cfg.get_double("fiber", "symbol_rate_gbd", f.symbol_rate_gbd);
  f.rrc_rolloff = cfg.get_double("fiber", "rrc_rolloff", f.rrc_rolloff);
  f.oversampling = static_cast<int>(cfg.get_int("fiber", "oversampling", f.oversampling));
  f.step_count = static_cast<int>(cfg.get_int("fiber", "step_count", f.step_count));
  f.max_step_phase_rad = cfg.get_double("fiber", "max_step_phase_rad", f.max_step_phase_rad);
  f.validate();
  return f;
}

inline void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min<int>(jobs, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

// One transmit scheme, fully calibrated: marginal-rescaled constellation,
// demapper prior, entropy and rate-loss accounting, and a frame generator.
struct SchemeSetup {
  std::string name;
  Constellation scaled;
  std::vector<double> point_prior;
  double h_bits_per_2d = 0.0;
  double r_loss_bits_per_2d = 0.0;
  RateLossSource source = RateLossSource::theoretical;
  int sel_candidates = 0;
  int sel_block_len = 0;
  // (frame seed) -> unit-scale symbols + tx labels
  std::function<void(std::uint64_t, std::vector<std::complex<double>>&,
                     std::vector<std::uint32_t>&)>
      generate;
};

namespace scheme_detail {

inline int pair_index_of_levels(const Constellation& c, int level_i, int level_q) {
  const int li = (level_i - 1) / 2;
  const int lq = (level_q - 1) / 2;
  return li + c.levels_per_dim() * lq;
}

inline void emit_symbol(const Constellation& scaled, int pair, int sign_i, int sign_q,
                        std::vector<std::complex<double>>& symbols,
                        std::vector<std::uint32_t>& labels) {
  const int quadrant = 2 * (sign_i < 0) + (sign_q < 0);
  const int idx = recompose({quadrant, pair}, scaled);
  symbols.push_back(scaled.points[static_cast<std::size_t>(idx)]);
  labels.push_back(scaled.labels[static_cast<std::size_t>(idx)]);
}

// empirical amplitude-pair law of the ESS output, Jeffreys-smoothed
inline std::vector<double> calibrate_ess_pair_marginal(const EssCoder& coder,
                                                       const Constellation& base,
                                                       int blocks, std::uint64_t seed) {
  std::vector<double> counts(static_cast<std::size_t>(base.num_amp_pairs()), 0.5);
  Rng rng(seed, "ess/calibration");
  const std::uint64_t top = 1ull << coder.index_bits();
  for (int b = 0; b < blocks; ++b) {
    const auto amps = coder.encode(rng.below(top));
    for (std::size_t i = 0; i + 1 < amps.size(); i += 2)
      counts[static_cast<std::size_t>(
          pair_index_of_levels(base, amps[i], amps[i + 1]))] += 1.0;
  }
  double total = 0.0;
  for (double c : counts) total += c;
  for (double& c : counts) c /= total;
  return counts;
}

}  // namespace scheme_detail

class SchemeFactory {
 public:
  SchemeFactory(const Config& cfg, std::uint64_t root_seed)
      : cfg_(cfg),
        root_(root_seed),
        base_(build_qam(static_cast<int>(cfg.get_int("system", "qam_order", 64)))),
        frame_symbols_(static_cast<std::size_t>(cfg.get_int("system", "frame_symbols", 512))) {
    if ((frame_symbols_ & (frame_symbols_ - 1)) != 0)
      throw ConfigError("frame_symbols must be a power of two");
  }

  const Constellation& base() const { return base_; }
  std::size_t frame_symbols() const { return frame_symbols_; }

  SchemeSetup make(const std::string& name) const {
    if (name == "uniform") return make_uniform();
    if (name == "ess") return make_ess(false);
    if (name == "ess+sel") return make_ess(true);
    if (name == "seq-npas") return make_adm(name, cfg_.get_str("models", "seq_npas"));
    if (name == "seq-npas++") return make_adm(name, cfg_.get_str("models", "seq_npaspp"));
    throw ConfigError("unknown scheme '" + name + "'");
  }

 private:
  SchemeSetup make_uniform() const {
    SchemeSetup s;
    s.name = "uniform";
    s.scaled = base_;
    s.point_prior.assign(static_cast<std::size_t>(base_.order), 1.0 / base_.order);
    s.h_bits_per_2d = static_cast<double>(base_.bits_per_symbol);
    s.r_loss_bits_per_2d = 0.0;
    s.source = RateLossSource::theoretical;
    const Constellation sc = s.scaled;  // by value into the closure
    const std::size_t count = frame_symbols_;
    s.generate = [sc, count](std::uint64_t seed, std::vector<std::complex<double>>& symbols,
                             std::vector<std::uint32_t>& labels) {
      Rng rng(seed, "gen/uniform");
      symbols.clear();
      labels.clear();
      for (std::size_t i = 0; i < count; ++i) {
        const int idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(sc.order)));
        symbols.push_back(sc.points[static_cast<std::size_t>(idx)]);
        labels.push_back(sc.labels[static_cast<std::size_t>(idx)]);
      }
    };
    return s;
  }

  SchemeSetup make_ess(bool with_selection) const {
    const int ess_n = static_cast<int>(cfg_.get_int("ess", "block_len", 32));
    const double target = cfg_.get_double("ess", "target_rate_bits_1d", 1.93);
    const double tol = cfg_.get_double("ess", "rate_tolerance", 0.02);
    std::vector<int> levels(static_cast<std::size_t>(base_.levels_per_dim()));
    for (std::size_t j = 0; j < levels.size(); ++j) levels[j] = static_cast<int>(2 * j + 1);
    const auto scan = ess_find_emax(ess_n, levels, target, tol);
    auto coder = std::make_shared<EssCoder>(ess_n, levels, scan.best.emax, base_.amp_alphabet[0]);

    const int cal_blocks = static_cast<int>(cfg_.get_int("ess", "calibration_blocks", 16384));
    const auto pair_marginal =
        scheme_detail::calibrate_ess_pair_marginal(*coder, base_, cal_blocks, root_);

    SchemeSetup s;
    s.name = with_selection ? "ess+sel" : "ess";
    s.scaled = scaled_for_marginal(base_, pair_marginal);
    s.point_prior = point_prior_from_pair_probs(s.scaled, pair_marginal);
    s.h_bits_per_2d = 2.0 + entropy_bits(pair_marginal);
    s.r_loss_bits_per_2d =
        s.h_bits_per_2d - 2.0 - 2.0 * coder->shaping_rate_bits_per_amp();
    s.source = RateLossSource::empirical;

    SelectionConfig sel;
    std::shared_ptr<PerturbationKernel> sel_kernel;
    if (with_selection) {
      sel.block_len_symbols = static_cast<int>(cfg_.get_int("selection", "block_len_symbols", 64));
      sel.candidates = static_cast<int>(cfg_.get_int("selection", "candidates", 16));
      sel.validate();
      s.r_loss_bits_per_2d += sel.side_info_bits_per_symbol();
      s.sel_candidates = sel.candidates;
      s.sel_block_len = sel.block_len_symbols;
      const FiberConfig fiber = fiber_from_config(cfg_);
      sel_kernel = std::make_shared<PerturbationKernel>(kernel_from_fiber(
          fiber, static_cast<int>(cfg_.get_int("selection", "kernel_memory", 6))));
    }

    const Constellation base = base_;  // by value into the closure
    const Constellation scaled = s.scaled;
    const std::size_t count = frame_symbols_;
    s.generate = [coder, sel, sel_kernel, with_selection, base, scaled, count](
                     std::uint64_t seed, std::vector<std::complex<double>>& symbols,
                     std::vector<std::uint32_t>& labels) {
      Rng rng(seed, "gen/ess");
      symbols.clear();
      labels.clear();
      std::vector<int> amps;
      amps.reserve(2 * count);
      if (!with_selection) {
        const int blocks = static_cast<int>(2 * count) / coder->block_len();
        const std::uint64_t top = 1ull << coder->index_bits();
        for (int b = 0; b < blocks; ++b) {
          const auto block = coder->encode(rng.below(top));
          amps.insert(amps.end(), block.begin(), block.end());
        }
      } else {
        const int sel_blocks = static_cast<int>(count) / sel.block_len_symbols;
        const int ess_per_sel = 2 * sel.block_len_symbols / coder->block_len();
        for (int b = 0; b < sel_blocks; ++b) {
          const BitStream payload = random_bits(
              rng, static_cast<std::size_t>(ess_per_sel) *
                       static_cast<std::size_t>(coder->index_bits()));
          const auto res = select_sequence(payload, sel, *coder, *sel_kernel,
                                           seed ^ (0x5e1ec7ull + static_cast<std::uint64_t>(b)));
          amps.insert(amps.end(), res.amplitudes.begin(), res.amplitudes.end());
        }
      }
      for (std::size_t i = 0; i + 1 < amps.size(); i += 2) {
        const int pair = scheme_detail::pair_index_of_levels(base, amps[i], amps[i + 1]);
        scheme_detail::emit_symbol(scaled, pair, rng.bit() ? 1 : -1, rng.bit() ? 1 : -1,
                                   symbols, labels);
      }
    };
    return s;
  }

  SchemeSetup make_adm(const std::string& name, const std::string& model_path) const {
    auto model = std::make_shared<TableModel>(TableModel::load(model_path));
    if (model->alphabet_size() != base_.num_amp_pairs())
      throw ConfigError("model '" + model_path + "' alphabet does not match the constellation");
    auto coder = std::make_shared<AdmCoder>(*model);
    const auto law = stationary_law(*model);

    SchemeSetup s;
    s.name = name;
    s.scaled = scaled_for_marginal(base_, law.marginal);
    s.point_prior = point_prior_from_pair_probs(s.scaled, law.marginal);
    s.h_bits_per_2d = 2.0 + marginal_entropy(law);

    const std::size_t adm_bits = static_cast<std::size_t>(cfg_.get_int("adm", "input_bits", 2048));
    const int trials = static_cast<int>(cfg_.get_int("adm", "rate_loss_trials", 300));
    const auto rl = measure_rate_loss_adm(*coder, *model, adm_bits, trials,
                                          derive_seed(root_, "adm/rateloss/" + name));
    s.r_loss_bits_per_2d = rl.rate_loss_bits_per_symbol;
    s.source = RateLossSource::empirical;

    const Constellation scaled = s.scaled;
    const std::size_t count = frame_symbols_;
    s.generate = [coder, scaled, adm_bits, count](std::uint64_t seed,
                                                  std::vector<std::complex<double>>& symbols,
                                                  std::vector<std::uint32_t>& labels) {
      Rng rng(seed, "gen/adm");
      symbols.clear();
      labels.clear();
      std::vector<int> pairs;
      pairs.reserve(count + 600);
      while (pairs.size() < count) {
        const BitStream payload = random_bits(rng, adm_bits);
        const auto out = coder->encode(payload);
        pairs.insert(pairs.end(), out.begin(), out.end());
      }
      pairs.resize(count);
      for (int pair : pairs)
        scheme_detail::emit_symbol(scaled, pair, rng.bit() ? 1 : -1, rng.bit() ? 1 : -1,
                                   symbols, labels);
    };
    return s;
  }

  const Config& cfg_;
  std::uint64_t root_;
  Constellation base_;
  std::size_t frame_symbols_;
};

// --- AIR sweep ---------------------------------------------------------------

struct SweepPoint {
  std::string scheme;
  double power_dbm = 0.0;
  AirReport report;
  int sel_candidates = 0;
  int sel_block_len = 0;
  std::uint64_t seed = 0;
};

struct AirSweepResult {
  std::vector<SweepPoint> points;
  std::vector<std::string> failures;  // "<scheme>: <error>"
};

inline SweepPoint run_sweep_point(const SchemeSetup& s, const FiberConfig& fiber,
                                  double power_dbm, std::size_t frames,
                                  std::uint64_t root_seed) {
  std::vector<LlrFrame> llr_frames;
  llr_frames.reserve(frames);
  std::vector<std::complex<double>> symbols;
  std::vector<std::uint32_t> labels;
  for (std::size_t f = 0; f < frames; ++f) {
    const std::string key = "/p=" + format_double(power_dbm) + "/f=" + std::to_string(f);
    s.generate(derive_seed(root_seed, "gen/" + s.name + key), symbols, labels);
    const ComplexFrame tx = rrc_shape(symbols, fiber, power_dbm);
    // channel stream keyed without the scheme: paired noise across schemes
    const ComplexFrame rx = ssfm_propagate(tx, fiber, derive_seed(root_seed, "chan" + key));
    const DspResult dsp = dsp_receive(rx, fiber, symbols);
    const double sigma2 = estimate_noise_var(dsp.symbols, s.scaled, s.point_prior);
    llr_frames.push_back(gaussian_demap(dsp.symbols, s.scaled, s.point_prior, sigma2, labels));
  }
  SweepPoint point;
  point.scheme = s.name;
  point.power_dbm = power_dbm;
  point.sel_candidates = s.sel_candidates;
  point.sel_block_len = s.sel_block_len;
  point.seed = root_seed;
  point.report = estimate_air(llr_frames, s.h_bits_per_2d, s.r_loss_bits_per_2d, s.source,
                              derive_seed(root_seed, "bootstrap/" + s.name + "/p=" +
                                                         format_double(power_dbm)));
  return point;
}

inline AirSweepResult run_airsweep(const Config& cfg, std::uint64_t root_seed, int jobs) {
  const FiberConfig fiber = fiber_from_config(cfg);
  const auto scheme_names = cfg.get_str_list("sweep", "schemes");
  const auto powers = cfg.get_double_list("sweep", "powers_dbm");
  const std::size_t frames =
      static_cast<std::size_t>(cfg.get_int("sweep", "frames_per_point", 24));

  const SchemeFactory factory(cfg, root_seed);
  AirSweepResult result;
  std::vector<SchemeSetup> setups;
  std::vector<std::string> ok_names;
  for (const auto& name : scheme_names) {
    try {
      setups.push_back(factory.make(name));
      ok_names.push_back(name);
    } catch (const std::exception& e) {
      result.failures.push_back(name + ": " + e.what());
    }
  }

  const std::size_t tasks = setups.size() * powers.size();
  std::vector<SweepPoint> points(tasks);
  std::vector<std::string> errors(tasks);
  parallel_for(tasks, jobs, [&](std::size_t task) {
    const std::size_t si = task / powers.size();
    const std::size_t pi = task % powers.size();
    try {
      points[task] = run_sweep_point(setups[si], fiber, powers[pi], frames, root_seed);
    } catch (const std::exception& e) {
      errors[task] = setups[si].name + ": " + e.what();
    }
  });
  for (std::size_t t = 0; t < tasks; ++t) {
    if (!errors[t].empty())
      result.failures.push_back(errors[t]);
    else
      result.points.push_back(points[t]);
  }
  return result;
}

inline std::string airsweep_csv(const AirSweepResult& sweep) {
  CsvWriter w({"scheme", "launch_power_dbm", "r_bmd", "r_loss", "net_air", "ci", "seed",
               "rate_loss_source", "sel_candidates", "sel_block_len"});
  for (const auto& p : sweep.points) {
    w.append(CsvWriter::Row(10)
                 .add(p.scheme)
                 .add(p.power_dbm)
                 .add(p.report.r_bmd)
                 .add(p.report.r_loss)
                 .add(p.report.net_air)
                 .add(p.report.confidence_halfwidth)
                 .add(p.seed)
                 .add(std::string(p.report.rate_loss_source == RateLossSource::empirical
                                      ? "empirical"
                                      : "theoretical"))
                 .add(p.sel_candidates)
                 .add(p.sel_block_len));
  }
  return w.str();
}

// --- matcher rate-loss sweep -------------------------------------------------

struct RateLossRow {
  std::size_t n = 0;
  double l_bar = 0.0;
  double r_loss_adm = 0.0;
  double r_loss_theory = 0.0;
};

inline std::vector<RateLossRow> run_rateloss(const Config& cfg, std::uint64_t root_seed) {
  const std::string model_path = cfg.get_str("rateloss", "model");
  const TableModel model = TableModel::load(model_path);
  const AdmCoder coder(model);
  const double theory = rate_loss_theoretical(model);
  const int trials = static_cast<int>(cfg.get_int("rateloss", "trials", 400));
  std::vector<RateLossRow> rows;
  for (double nd : cfg.get_double_list("rateloss", "n_grid")) {
    const std::size_t n = static_cast<std::size_t>(nd);
    const auto r = measure_rate_loss_adm(coder, model, n, trials,
                                         derive_seed(root_seed, "rateloss/n=" + std::to_string(n)));
    rows.push_back({n, r.mean_output_length, r.rate_loss_bits_per_symbol, theory});
  }
  return rows;
}

inline std::string rateloss_csv(std::span<const RateLossRow> rows) {
  CsvWriter w({"n", "l_bar", "r_loss_adm", "r_loss_theory"});
  for (const auto& r : rows)
    w.append(CsvWriter::Row(4)
                 .add(static_cast<std::uint64_t>(r.n))
                 .add(r.l_bar)
                 .add(r.r_loss_adm)
                 .add(r.r_loss_theory));
  return w.str();
}

// Net AIR of a source model on the perturbation surrogate itself: sample the
// stationary process, pass it through the kernel channel at the given power,
// demap with the blind variance estimate, charge the exact table rate loss.
inline AirReport surrogate_net_air(const TableModel& model, const Constellation& base,
                                   const PerturbationKernel& kernel, double power_dbm,
                                   double noise_variance, std::size_t num_symbols,
                                   std::uint64_t seed) {
  const auto law = stationary_law(model);
  const Constellation sc = scaled_for_marginal(base, law.marginal);
  const auto prior = point_prior_from_pair_probs(sc, law.marginal);
  const auto pairs = sample_sequence(model, num_symbols, derive_seed(seed, "surrogate/pairs"));
  Rng rng(seed, "surrogate/signs-noise");
  std::vector<ad::Cplx<double>> x(num_symbols);
  std::vector<std::uint32_t> labels(num_symbols);
  for (std::size_t t = 0; t < num_symbols; ++t) {
    const int pair = pairs[t];
    const int sign_i = rng.bit() ? 1 : -1;
    const int sign_q = rng.bit() ? 1 : -1;
    x[t] = ad::Cplx<double>(sign_i * sc.amp_i_of_pair(pair), sign_q * sc.amp_q_of_pair(pair));
    const int quadrant = 2 * (sign_i < 0) + (sign_q < 0);
    labels[t] = sc.labels[static_cast<std::size_t>(recompose({quadrant, pair}, sc))];
  }
  const auto y = perturbation_channel<double>(x, kernel, power_dbm, noise_variance, rng);
  const auto ys = from_cplx(y);
  const double sigma2 = estimate_noise_var(ys, sc, prior);
  const LlrFrame frame = gaussian_demap(ys, sc, prior, sigma2, labels);
  return estimate_air(std::vector<LlrFrame>{frame}, 2.0 + marginal_entropy(law),
                      rate_loss_theoretical(model, law), RateLossSource::theoretical,
                      derive_seed(seed, "surrogate/bootstrap"));
}

// --- training entry ----------------------------------------------------------

struct TrainRun {
  TrainResult result;
  std::string model_path;
  std::string trace_csv;
};

inline TrainRun run_train(const Config& cfg, std::uint64_t root_seed,
                          const std::string& out_override = "") {
  TrainConfig tc;
  const std::string obj = cfg.get_str("training", "objective", "lpp");
  if (obj == "lpp" || obj == "Lpp" || obj == "L++")
    tc.objective = TrainConfig::Objective::Lpp;
  else if (obj == "l" || obj == "L")
    tc.objective = TrainConfig::Objective::L;
  else
    throw ConfigError("training objective must be 'l' or 'lpp'");
  tc.lambda = cfg.get_double("training", "lambda", tc.lambda);
  tc.tau_start = cfg.get_double("training", "tau_start", tc.tau_start);
  tc.tau_end = cfg.get_double("training", "tau_end", tc.tau_end);
  tc.batch = static_cast<int>(cfg.get_int("training", "batch", tc.batch));
  tc.seq_len = static_cast<int>(cfg.get_int("training", "seq_len", tc.seq_len));
  tc.learning_rate = cfg.get_double("training", "learning_rate", tc.learning_rate);
  tc.momentum = cfg.get_double("training", "momentum", tc.momentum);
  tc.steps = static_cast<int>(cfg.get_int("training", "steps", tc.steps));
  tc.launch_power_dbm = cfg.get_double("training", "launch_power_dbm", tc.launch_power_dbm);
  tc.mb_entropy_target_bits_1d =
      cfg.get_double("training", "mb_entropy_target_bits_1d", tc.mb_entropy_target_bits_1d);
  tc.demapper_nlin_fraction =
      cfg.get_double("training", "demapper_nlin_fraction", tc.demapper_nlin_fraction);
  tc.stationary_iters =
      static_cast<int>(cfg.get_int("training", "stationary_iters", tc.stationary_iters));
  tc.seed = derive_seed(root_seed, "train");

  const FiberConfig fiber = fiber_from_config(cfg);
  const Constellation base = build_qam(static_cast<int>(cfg.get_int("system", "qam_order", 64)));
  const int k_mem = static_cast<int>(cfg.get_int("training", "kernel_memory", 4));
  const PerturbationKernel kernel = kernel_from_fiber(fiber, k_mem);
  const double fallback_nv = surrogate_noise_variance(fiber, tc.launch_power_dbm);

  const int mu = static_cast<int>(cfg.get_int("training", "mu", 1));
  TableModel init = TableModel::uniform(base.num_amp_pairs(), mu);
  const std::string init_kind = cfg.get_str("training", "init", "uniform");
  if (init_kind == "repulsion") {
    if (mu != 1) throw ConfigError("repulsion init requires mu = 1");
    const double theta = cfg.get_double("training", "init_repulsion_theta", 1.6);
    const double h1d = cfg.get_double("training", "init_marginal_bits_1d", 1.93);
    init = repulsion_init(base, pair_probs_from_1d(base, mb_fit_entropy(base, h1d, 1e-9).probs),
                          theta);
  } else if (init_kind == "file") {
    init = TableModel::load(cfg.get_str("training", "init_model"));
  } else if (init_kind != "uniform") {
    throw ConfigError("training init must be uniform, repulsion, or file");
  }

  const Trainer trainer(base, kernel, tc, fallback_nv);
  TrainRun run;
  run.result = trainer.run(init);

  CsvWriter w({"step", "loss", "r_bmd_est", "r_loss", "kl", "grad_norm", "temperature"});
  for (const auto& row : run.result.trace)
    w.append(CsvWriter::Row(7)
                 .add(row.step)
                 .add(row.loss)
                 .add(row.r_bmd_est)
                 .add(row.r_loss)
                 .add(row.kl)
                 .add(row.grad_norm)
                 .add(row.temperature));
  run.trace_csv = w.str();
  const std::string trace_path = cfg.get_str("training", "trace_out", "");
  if (!trace_path.empty()) w.write_file(trace_path);
  run.model_path = !out_override.empty()
                       ? out_override
                       : cfg.get_str("training", "model_out", "trained_model.psm");
  // a divergence aborts after the trace is persisted
  if (run.result.diverged)
    throw InvariantFailure("training diverged (non-finite loss); trace retained" +
                           (trace_path.empty() ? std::string() : " in " + trace_path));
  run.result.model.save(run.model_path);
  return run;
}

}  // namespace pashape
