// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "pashape/adm.hpp"
#include "pashape/constellation.hpp"

using namespace pashape;

namespace {

TableModel mb_pair_model() {
  const Constellation c = build_qam(64);
  const MbDistribution d = mb_fit_entropy(c, 1.93, 1e-9);
  return TableModel::iid(pair_probs_from_1d(c, d.probs));
}

TableModel order1_model() {
  // mild repulsion of repeated symbols
  const int a = 4;
  std::vector<double> table;
  for (int ctx = 0; ctx < a; ++ctx)
    for (int s = 0; s < a; ++s) table.push_back(s == ctx ? 0.10 : 0.30);
  return TableModel::from_probability_table(a, 1, table);
}

}  // namespace

TEST_CASE("binary uniform adm is the identity map") {
  const AdmCoder coder(TableModel::uniform(2, 0));
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const BitStream payload = random_bits(rng, 64);
    const auto symbols = coder.encode(payload);
    REQUIRE(symbols.size() == payload.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) CHECK(symbols[i] == payload[i]);
    CHECK(coder.decode(symbols, payload.size()) == payload);
  }
}

TEST_CASE("round-trips across models and payload lengths") {
  const TableModel models[] = {mb_pair_model(), order1_model(), TableModel::uniform(3, 0)};
  Rng rng(2);
  for (const auto& m : models) {
    const AdmCoder coder(m);
    for (std::size_t n : {std::size_t(1), std::size_t(17), std::size_t(64), std::size_t(256)}) {
      for (int trial = 0; trial < 50; ++trial) {
        const BitStream payload = random_bits(rng, n);
        const auto symbols = coder.encode(payload);
        CHECK(coder.decode(symbols, n) == payload);
      }
    }
  }
}

TEST_CASE("a flipped symbol never silently yields the original payload") {
  const AdmCoder coder(mb_pair_model());
  Rng rng(3);
  int diverged = 0, threw = 0;
  const int trials = 30;
  for (int trial = 0; trial < trials; ++trial) {
    const BitStream payload = random_bits(rng, 256);
    auto symbols = coder.encode(payload);
    const std::size_t j = symbols.size() / 2;
    symbols[j] = (symbols[j] + 1) % coder.alphabet_size();
    try {
      const BitStream decoded = coder.decode(symbols, payload.size());
      if (!(decoded == payload)) ++diverged;
    } catch (const CoderError&) {
      ++threw;
    }
  }
  CHECK(diverged + threw == trials);
  CHECK(diverged > 0);  // corruption shows up as payload divergence, not silence
}

TEST_CASE("empty payload is rejected, n=1 round-trips") {
  const AdmCoder coder(mb_pair_model());
  CHECK_THROWS_AS(coder.encode(BitStream{}), std::invalid_argument);
  for (int b : {0, 1}) {
    BitStream p;
    p.push_back(b);
    CHECK(coder.decode(coder.encode(p), 1) == p);
  }
}

TEST_CASE("uniform binary rate loss is exactly zero") {
  const TableModel m = TableModel::uniform(2, 0);
  const AdmCoder coder(m);
  const auto r = measure_rate_loss_adm(coder, m, 512, 100, 11);
  CHECK(r.mean_output_length == doctest::Approx(512.0).epsilon(1e-12));
  CHECK(r.rate_loss_bits_per_symbol == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("measured rate loss decreases with n and dominates the theoretical bound") {
  const TableModel mb = mb_pair_model();
  const AdmCoder coder(mb);
  const auto short_n = measure_rate_loss_adm(coder, mb, 256, 150, 21);
  const auto long_n = measure_rate_loss_adm(coder, mb, 2048, 150, 22);
  CHECK(long_n.rate_loss_bits_per_symbol < short_n.rate_loss_bits_per_symbol);
  CHECK(long_n.rate_loss_bits_per_symbol >= -1e-9);  // iid: theoretical loss is 0

  const TableModel dep = order1_model();
  const double theory = rate_loss_theoretical(dep);
  CHECK(theory > 0.0);
  const AdmCoder dep_coder(dep);
  for (std::size_t n : {std::size_t(256), std::size_t(1024)}) {
    const auto r = measure_rate_loss_adm(dep_coder, dep, n, 150, 33);
    CHECK(r.rate_loss_bits_per_symbol >= theory - 0.01);
  }
  CHECK_THROWS_AS(measure_rate_loss_adm(coder, mb, 256, 50, 1), std::invalid_argument);
}

TEST_CASE("emitted symbols follow the model law") {
  const TableModel mb = mb_pair_model();
  const AdmCoder coder(mb);
  const auto law = stationary_law(mb);
  Rng rng(17);
  std::vector<std::size_t> counts(static_cast<std::size_t>(mb.alphabet_size()), 0);
  std::size_t total = 0;
  while (total < 100000) {
    const auto symbols = coder.encode(random_bits(rng, 4096));
    for (int s : symbols) ++counts[static_cast<std::size_t>(s)];
    total += symbols.size();
  }
  double tv = 0.0;
  for (int a = 0; a < mb.alphabet_size(); ++a)
    tv += std::abs(static_cast<double>(counts[static_cast<std::size_t>(a)]) /
                       static_cast<double>(total) -
                   law.marginal[static_cast<std::size_t>(a)]);
  CHECK(0.5 * tv < 0.01);
}

TEST_CASE("conditional model round-trips include the stationary boot segment") {
  const TableModel dep = order1_model();
  const AdmCoder coder(dep);
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const BitStream payload = random_bits(rng, 128);
    CHECK(coder.decode(coder.encode(payload), 128) == payload);
  }
}

TEST_CASE("matched frame file round-trip") {
  const AdmCoder coder(mb_pair_model());
  Rng rng(5);
  const BitStream payload = random_bits(rng, 64);
  const auto symbols = coder.encode(payload);
  const std::string path = "test_frame.psf";
  write_matched_frame(path, "mb-iid", payload.size(), 5, symbols);
  const MatchedFrame f = read_matched_frame(path);
  CHECK(f.model_id == "mb-iid");
  CHECK(f.n == payload.size());
  CHECK(f.symbols == symbols);
  std::remove(path.c_str());
}
