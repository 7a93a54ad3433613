// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <fstream>

#include "pashape/experiment.hpp"

using namespace pashape;

namespace {

std::string tiny_sweep_config(const std::string& extra_schemes = "") {
  return
      "[run]\n"
      "seed = 1\n"
      "[system]\n"
      "qam_order = 64\n"
      "frame_symbols = 128\n"
      "[fiber]\n"
      "span_length_km = 205\n"
      "oversampling = 4\n"
      "[sweep]\n"
      "schemes = uniform, ess" + extra_schemes + "\n"
      "powers_dbm = 4, 8\n"
      "frames_per_point = 3\n"
      "[ess]\n"
      "block_len = 32\n"
      "target_rate_bits_1d = 1.93\n"
      "calibration_blocks = 2000\n"
      "[selection]\n"
      "block_len_symbols = 32\n"
      "candidates = 4\n"
      "kernel_memory = 3\n"
      "[adm]\n"
      "input_bits = 512\n"
      "rate_loss_trials = 120\n";
}

std::string save_mb_model() {
  const Constellation c = build_qam(64);
  const MbDistribution d = mb_fit_entropy(c, 1.93, 1e-9);
  const TableModel m = TableModel::iid(pair_probs_from_1d(c, d.probs));
  const std::string path = "exp_mb_model.psm";
  m.save(path);
  return path;
}

}  // namespace

TEST_CASE("fiber config parsing applies defaults and validation") {
  const Config cfg = Config::parse("[fiber]\nspan_length_km = 100\n");
  const FiberConfig f = fiber_from_config(cfg);
  CHECK(f.span_length_km == doctest::Approx(100.0));
  CHECK(f.symbol_rate_gbd == doctest::Approx(50.0));  // default retained
  const Config bad = Config::parse("[fiber]\noversampling = 1\n");
  CHECK_THROWS_AS(fiber_from_config(bad), std::invalid_argument);
}

TEST_CASE("parallel_for covers every index exactly once") {
  std::vector<std::atomic<int>> hits(257);
  for (auto& h : hits) h = 0;
  parallel_for(hits.size(), 3, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("scheme setups are internally consistent") {
  const Config cfg = Config::parse(tiny_sweep_config());
  const SchemeFactory factory(cfg, 1);

  const SchemeSetup uni = factory.make("uniform");
  double sum = 0.0;
  for (double p : uni.point_prior) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(uni.h_bits_per_2d == doctest::Approx(6.0));
  CHECK(uni.r_loss_bits_per_2d == doctest::Approx(0.0));

  const SchemeSetup ess = factory.make("ess");
  CHECK(ess.r_loss_bits_per_2d > 0.0);
  CHECK(ess.r_loss_bits_per_2d < 0.2);
  CHECK(ess.h_bits_per_2d > 5.5);
  CHECK(ess.h_bits_per_2d < 6.0);

  const Config scfg = Config::parse(tiny_sweep_config(", ess+sel"));
  const SchemeFactory sfactory(scfg, 1);
  const SchemeSetup sel = sfactory.make("ess+sel");
  CHECK(sel.r_loss_bits_per_2d ==
        doctest::Approx(ess.r_loss_bits_per_2d + 2.0 / 32.0).epsilon(1e-9));
  CHECK(sel.sel_candidates == 4);

  // generated frames have unit-ish power and matching labels
  std::vector<std::complex<double>> symbols;
  std::vector<std::uint32_t> labels;
  ess.generate(42, symbols, labels);
  REQUIRE(symbols.size() == 128);
  REQUIRE(labels.size() == 128);
  double e = 0.0;
  for (const auto& s : symbols) e += std::norm(s);
  CHECK(e / 128.0 == doctest::Approx(1.0).epsilon(0.2));
  CHECK_THROWS_AS(factory.make("nonesuch"), ConfigError);
}

TEST_CASE("airsweep is deterministic and isolates per-scheme failures") {
  const std::string model = save_mb_model();
  std::string text = tiny_sweep_config(", seq-npas++, seq-npas");
  text += "[models]\nseq_npaspp = " + model + "\nseq_npas = missing_model_file.psm\n";
  const Config cfg = Config::parse(text);

  const AirSweepResult a = run_airsweep(cfg, 7, 2);
  const AirSweepResult b = run_airsweep(cfg, 7, 1);
  CHECK(airsweep_csv(a) == airsweep_csv(b));  // jobs do not affect bytes

  // seq-npas fails (missing file) but the others report
  CHECK(a.failures.size() == 1);
  CHECK(a.points.size() == 3 * 2);  // uniform, ess, seq-npas++ at two powers
  for (const auto& p : a.points) {
    CHECK(std::isfinite(p.report.net_air));
    CHECK(p.report.r_bmd <= p.report.marginal_entropy_bits_per_2d);
  }
  const AirSweepResult c = run_airsweep(cfg, 8, 1);
  CHECK(airsweep_csv(a) != airsweep_csv(c));  // seed matters
  std::remove(model.c_str());
}

TEST_CASE("rateloss runner produces the expected trend and errors") {
  const std::string model = save_mb_model();
  const std::string text =
      "[rateloss]\nmodel = " + model + "\nn_grid = 128, 1024\ntrials = 150\n";
  const Config cfg = Config::parse(text);
  const auto rows = run_rateloss(cfg, 5);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].n == 128);
  CHECK(rows[1].n == 1024);
  CHECK(rows[1].r_loss_adm < rows[0].r_loss_adm);
  CHECK(rows[0].r_loss_theory == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rows[1].r_loss_adm >= -1e-9);
  const std::string csv = rateloss_csv(rows);
  CHECK(csv.substr(0, 32) == "n,l_bar,r_loss_adm,r_loss_theory");

  const Config missing = Config::parse("[rateloss]\nmodel = nope.psm\nn_grid = 64\n");
  CHECK_THROWS(run_rateloss(missing, 5));
  std::remove(model.c_str());
}

TEST_CASE("train runner writes a loadable model and a full trace") {
  const std::string text =
      "[system]\nqam_order = 16\n"
      "[fiber]\nspan_length_km = 205\n"
      "[training]\n"
      "objective = lpp\nmu = 1\nsteps = 5\nbatch = 2\nseq_len = 12\n"
      "learning_rate = 0.3\nkernel_memory = 1\nlaunch_power_dbm = 6\n"
      "mb_entropy_target_bits_1d = 0.8\n"
      "model_out = exp_train_model.psm\n";
  const Config cfg = Config::parse(text);
  const TrainRun a = run_train(cfg, 3);
  const TrainRun b = run_train(cfg, 3);
  CHECK(a.trace_csv == b.trace_csv);  // deterministic bytes
  CHECK(a.result.trace.size() == 5);
  const TableModel m = TableModel::load(a.model_path);
  CHECK(m.alphabet_size() == 4);
  CHECK(m.memory() == 1);
  std::remove(a.model_path.c_str());

  const Config bad = Config::parse("[training]\nobjective = bogus\n");
  CHECK_THROWS_AS(run_train(bad, 3), ConfigError);
}

TEST_CASE("surrogate net air helper is deterministic and sane") {
  const Constellation c = build_qam(64);
  const FiberConfig fiber;
  const PerturbationKernel kernel = kernel_from_fiber(fiber, 4);
  const MbDistribution d = mb_fit_entropy(c, 1.93, 1e-9);
  const TableModel m = TableModel::iid(pair_probs_from_1d(c, d.probs));
  const AirReport a = surrogate_net_air(m, c, kernel, 6.0, 0.02, 4000, 11);
  const AirReport b = surrogate_net_air(m, c, kernel, 6.0, 0.02, 4000, 11);
  CHECK(a.r_bmd == b.r_bmd);
  CHECK(a.r_bmd > 2.0);
  CHECK(a.r_bmd < 5.9);
  CHECK(a.r_loss == doctest::Approx(0.0).epsilon(1e-9));
}
