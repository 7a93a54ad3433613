// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner. Subcommands: rateloss, airsweep, train, gradcheck,
// selftest, ess-info, adm-roundtrip. Every run is deterministic under a
// fixed --seed; CSV outputs are byte-stable.
// Exit codes: 0 success, 2 config error, 3 invariant failure.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "pashape/pashape.hpp"

namespace {

using namespace pashape;

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file: " + path);
  f << text;
}

Config load_config(const std::string& path) {
  if (path.empty()) throw ConfigError("--config is required for this subcommand");
  return Config::load(path);
}

std::uint64_t resolve_seed(const Config* cfg, std::uint64_t flag_seed, bool flag_given) {
  if (flag_given) return flag_seed;
  if (cfg && cfg->has("run", "seed"))
    return static_cast<std::uint64_t>(cfg->get_int("run", "seed"));
  return 1;
}

int cmd_rateloss(const std::string& config_path, std::uint64_t seed, bool seed_given,
                 const std::string& out) {
  const Config cfg = load_config(config_path);
  const auto rows = run_rateloss(cfg, resolve_seed(&cfg, seed, seed_given));
  write_text(out, rateloss_csv(rows));
  return 0;
}

int cmd_airsweep(const std::string& config_path, std::uint64_t seed, bool seed_given,
                 const std::string& out, int jobs) {
  const Config cfg = load_config(config_path);
  const AirSweepResult sweep = run_airsweep(cfg, resolve_seed(&cfg, seed, seed_given), jobs);
  for (const auto& f : sweep.failures) std::cerr << "scheme failed: " << f << "\n";
  write_text(out, airsweep_csv(sweep));
  if (sweep.points.empty()) throw ConfigError("no scheme produced results");
  return 0;
}

int cmd_train(const std::string& config_path, std::uint64_t seed, bool seed_given,
              const std::string& out) {
  const Config cfg = load_config(config_path);
  const TrainRun run = run_train(cfg, resolve_seed(&cfg, seed, seed_given), out);
  const auto& trace = run.result.trace;
  std::cout << "trained " << run.model_path << ": steps=" << trace.size()
            << " r_loss_first=" << format_double(trace.front().r_loss)
            << " r_loss_last=" << format_double(trace.back().r_loss)
            << " r_bmd_last=" << format_double(trace.back().r_bmd_est) << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& config_path, std::uint64_t seed, bool seed_given) {
  // tiny fixed instance: 16-QAM pairs (A=4), mu=1, short sequences
  FiberConfig fiber;
  GradCheckConfig gc;
  double max_full = 1e-4, max_exact = 1e-6;
  if (!config_path.empty()) {
    const Config cfg = Config::load(config_path);
    fiber = fiber_from_config(cfg);
    gc.seq_len = static_cast<int>(cfg.get_int("gradcheck", "seq_len", gc.seq_len));
    gc.lambda = cfg.get_double("gradcheck", "lambda", gc.lambda);
    gc.launch_power_dbm = cfg.get_double("gradcheck", "launch_power_dbm", gc.launch_power_dbm);
    gc.noise_variance = cfg.get_double("gradcheck", "noise_variance", gc.noise_variance);
  }
  const std::uint64_t s = resolve_seed(nullptr, seed, seed_given);
  const Constellation tiny = build_qam(16);
  const PerturbationKernel kernel = kernel_from_fiber(fiber, 1);
  Rng rng(s, "gradcheck/init");
  std::vector<double> logits(16);
  for (auto& l : logits) l = 0.4 * rng.gaussian();
  const TableModel model(4, 1, logits);
  const GradCheckReport rep = gradient_check(model, tiny, kernel, gc);
  std::cout << "gradcheck: max_rel_full=" << format_double(rep.max_rel_full)
            << " max_rel_r_loss=" << format_double(rep.max_rel_r_loss)
            << " max_rel_kl=" << format_double(rep.max_rel_kl)
            << " worst_coordinate=" << rep.worst_coordinate << "\n";
  if (rep.max_rel_full >= max_full || rep.max_rel_r_loss >= max_exact ||
      rep.max_rel_kl >= max_exact)
    throw InvariantFailure("gradient check exceeded tolerance");
  return 0;
}

int cmd_selftest() {
  SelfTest st(std::cout);
  if (!st.run()) throw InvariantFailure("selftest failed");
  return 0;
}

int cmd_ess_info(const std::string& config_path, const std::string& out) {
  int block_len = 32;
  double target = 1.93, tol = 0.02;
  int qam = 64;
  if (!config_path.empty()) {
    const Config cfg = Config::load(config_path);
    block_len = static_cast<int>(cfg.get_int("ess", "block_len", block_len));
    target = cfg.get_double("ess", "target_rate_bits_1d", target);
    tol = cfg.get_double("ess", "rate_tolerance", tol);
    qam = static_cast<int>(cfg.get_int("system", "qam_order", qam));
  }
  const Constellation c = build_qam(qam);
  std::vector<int> levels(static_cast<std::size_t>(c.levels_per_dim()));
  for (std::size_t j = 0; j < levels.size(); ++j) levels[j] = static_cast<int>(2 * j + 1);
  const EssRateScan scan = ess_find_emax(block_len, levels, target, tol);
  CsvWriter w({"emax", "index_bits", "rate_bits_per_amp"});
  for (const auto& p : scan.table)
    w.append(CsvWriter::Row(3).add(static_cast<std::int64_t>(p.emax)).add(p.index_bits).add(
        p.rate_bits_per_amp));
  write_text(out, w.str());
  std::cerr << "best: emax=" << scan.best.emax << " k=" << scan.best.index_bits
            << " rate=" << format_double(scan.best.rate_bits_per_amp) << " bits/1D\n";
  return 0;
}

int cmd_adm_roundtrip(const std::string& config_path, std::uint64_t seed, bool seed_given,
                      const std::string& out, std::size_t n, int trials) {
  TableModel model = [&]() {
    if (!config_path.empty()) {
      const Config cfg = Config::load(config_path);
      if (cfg.has("adm", "model")) return TableModel::load(cfg.get_str("adm", "model"));
    }
    const Constellation c = build_qam(64);
    const MbDistribution d = mb_fit_entropy(c, 1.93, 1e-9);
    return TableModel::iid(pair_probs_from_1d(c, d.probs));
  }();
  const AdmCoder coder(model);
  Rng rng(resolve_seed(nullptr, seed, seed_given), "adm-roundtrip");
  std::vector<int> last_symbols;
  for (int t = 0; t < trials; ++t) {
    const BitStream payload = random_bits(rng, n);
    last_symbols = coder.encode(payload);
    if (!(coder.decode(last_symbols, n) == payload))
      throw InvariantFailure("adm round-trip mismatch at trial " + std::to_string(t));
  }
  if (!out.empty())
    write_matched_frame(out, "adm-roundtrip", n, seed, last_symbols);
  std::cout << "adm-roundtrip: " << trials << " trials at n=" << n << " all inverted exactly\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probabilistic amplitude shaping experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::size_t adm_n = 2048;
  int adm_trials = 1000;

  auto add_common = [&](CLI::App* sub, bool with_jobs = false) {
    sub->add_option("--config", config_path, "experiment config file");
    sub->add_option("--seed", seed, "root seed for every random stream");
    sub->add_option("--out", out_path, "output path (default: stdout)");
    if (with_jobs) sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* rateloss = app.add_subcommand("rateloss", "matcher rate loss vs ADM input length");
  add_common(rateloss);
  CLI::App* airsweep = app.add_subcommand("airsweep", "AIR vs launch power over schemes");
  add_common(airsweep, true);
  CLI::App* train = app.add_subcommand("train", "train a source model on the surrogate channel");
  add_common(train);
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient validation");
  add_common(gradcheck);
  CLI::App* selftest = app.add_subcommand("selftest", "fast invariant checks");
  (void)selftest;
  CLI::App* essinfo = app.add_subcommand("ess-info", "sphere-shaping rate scan");
  add_common(essinfo);
  CLI::App* admrt = app.add_subcommand("adm-roundtrip", "arithmetic matcher inversion check");
  add_common(admrt);
  admrt->add_option("--bits", adm_n, "payload bits per trial");
  admrt->add_option("--trials", adm_trials, "number of round-trips");

  CLI11_PARSE(app, argc, argv);

  try {
    const bool seed_given = app.count_all() && (rateloss->count("--seed") || airsweep->count("--seed") ||
                                                train->count("--seed") || gradcheck->count("--seed") ||
                                                essinfo->count("--seed") || admrt->count("--seed"));
    if (rateloss->parsed()) return cmd_rateloss(config_path, seed, seed_given, out_path);
    if (airsweep->parsed()) return cmd_airsweep(config_path, seed, seed_given, out_path, jobs);
    if (train->parsed()) return cmd_train(config_path, seed, seed_given, out_path);
    if (gradcheck->parsed()) return cmd_gradcheck(config_path, seed, seed_given);
    if (selftest->parsed()) return cmd_selftest();
    if (essinfo->parsed()) return cmd_ess_info(config_path, out_path);
    if (admrt->parsed())
      return cmd_adm_roundtrip(config_path, seed, seed_given, out_path, adm_n, adm_trials);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantFailure& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
