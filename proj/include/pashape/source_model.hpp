// SPDX-License-Identifier: Apache-2.0
//
// Stationary autoregressive source models over the unsigned-symbol alphabet.
// A model is a table of logits over A^mu contexts; the same time-invariant
// conditional rule applies at every position, so the induced process is
// stationary and its entropy rate and matcher rate loss have exact
// expressions. The table math is templated on the scalar type so the
// training module can differentiate through it.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pashape/rng.hpp"
#include "pashape/scalar.hpp"

namespace pashape {

namespace model_math {

inline std::size_t pow_size(int a, int mu) {
  std::size_t n = 1;
  for (int i = 0; i < mu; ++i) n *= static_cast<std::size_t>(a);
  return n;
}

template <class T>
void softmax_row(std::span<const T> logits, std::span<T> out) {
  using std::exp;
  double mx = scalar_value(logits[0]);
  for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, scalar_value(logits[i]));
  T z = T(0.0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = exp(logits[i] - mx);
    z = z + out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = out[i] / z;
}

// All conditional rows p(a | ctx), row-major [ctx][a].
template <class T>
std::vector<T> table_probs(int a_size, int mu, std::span<const T> logits) {
  const std::size_t rows = pow_size(a_size, mu);
  std::vector<T> probs(rows * static_cast<std::size_t>(a_size));
  for (std::size_t r = 0; r < rows; ++r)
    softmax_row(logits.subspan(r * static_cast<std::size_t>(a_size),
                               static_cast<std::size_t>(a_size)),
                std::span<T>(probs).subspan(r * static_cast<std::size_t>(a_size),
                                            static_cast<std::size_t>(a_size)));
  return probs;
}

// Stationary distribution of the context chain by power iteration. The chain
// state is the last mu symbols; appending a moves ctx -> (ctx*A + a) mod A^mu.
// fixed_iters > 0 runs exactly that many steps (used where downstream finite
// differencing needs an iteration count that does not change under tiny
// parameter perturbations); otherwise iterate to total-variation tol.
template <class T>
std::vector<T> stationary_context_law(int a_size, int mu, std::span<const T> probs,
                                      double tol = 1e-12, int max_iters = 20000,
                                      int fixed_iters = 0) {
  const std::size_t states = pow_size(a_size, mu);
  std::vector<T> pi(states, T(1.0 / static_cast<double>(states)));
  if (mu == 0) return pi;  // single empty context
  const std::size_t roll_mod = states / static_cast<std::size_t>(a_size);
  std::vector<T> next(states);
  const int iters = fixed_iters > 0 ? fixed_iters : max_iters;
  for (int it = 0; it < iters; ++it) {
    std::fill(next.begin(), next.end(), T(0.0));
    for (std::size_t ctx = 0; ctx < states; ++ctx) {
      const std::size_t base = ctx * static_cast<std::size_t>(a_size);
      const std::size_t rolled = (ctx % roll_mod) * static_cast<std::size_t>(a_size);
      for (int a = 0; a < a_size; ++a)
        next[rolled + static_cast<std::size_t>(a)] =
            next[rolled + static_cast<std::size_t>(a)] +
            pi[ctx] * probs[base + static_cast<std::size_t>(a)];
    }
    if (fixed_iters == 0) {
      double tv = 0.0;
      for (std::size_t i = 0; i < states; ++i)
        tv += std::abs(scalar_value(next[i]) - scalar_value(pi[i]));
      pi.swap(next);
      if (0.5 * tv <= tol) return pi;
    } else {
      pi.swap(next);
    }
  }
  if (fixed_iters == 0) {
    double tv = 0.0;
    for (std::size_t i = 0; i < states; ++i)
      tv += std::abs(scalar_value(next[i]) - scalar_value(pi[i]));
    throw std::runtime_error("stationary_context_law: power iteration did not converge, residual " +
                             std::to_string(0.5 * tv));
  }
  return pi;
}

// Marginal symbol law under the stationary context law.
template <class T>
std::vector<T> stationary_marginal(int a_size, int mu, std::span<const T> probs,
                                   std::span<const T> ctx_law) {
  const std::size_t states = pow_size(a_size, mu);
  std::vector<T> marg(static_cast<std::size_t>(a_size), T(0.0));
  for (std::size_t ctx = 0; ctx < states; ++ctx)
    for (int a = 0; a < a_size; ++a)
      marg[static_cast<std::size_t>(a)] =
          marg[static_cast<std::size_t>(a)] +
          ctx_law[ctx] * probs[ctx * static_cast<std::size_t>(a_size) + static_cast<std::size_t>(a)];
  return marg;
}

// 0*log(0) := 0; contexts with zero stationary mass contribute nothing.
template <class T>
T entropy_bits_t(std::span<const T> p) {
  using std::log;
  T h = T(0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (scalar_value(p[i]) > 0.0) h = h - p[i] * log(p[i]) * kInvLn2;
  return h;
}

template <class T>
T entropy_rate_bits(int a_size, int mu, std::span<const T> probs, std::span<const T> ctx_law) {
  using std::log;
  const std::size_t states = pow_size(a_size, mu);
  T h = T(0.0);
  for (std::size_t ctx = 0; ctx < states; ++ctx) {
    if (scalar_value(ctx_law[ctx]) <= 0.0) continue;
    T row = T(0.0);
    for (int a = 0; a < a_size; ++a) {
      const T& p = probs[ctx * static_cast<std::size_t>(a_size) + static_cast<std::size_t>(a)];
      if (scalar_value(p) > 0.0) row = row - p * log(p) * kInvLn2;
    }
    h = h + ctx_law[ctx] * row;
  }
  return h;
}

// Ideal-matcher rate loss: marginal entropy minus entropy rate, bits/symbol.
template <class T>
T rate_loss_bits(int a_size, int mu, std::span<const T> probs, std::span<const T> ctx_law) {
  std::vector<T> marg = stationary_marginal<T>(a_size, mu, probs, ctx_law);
  return entropy_bits_t<T>(marg) - entropy_rate_bits<T>(a_size, mu, probs, ctx_law);
}

// Sequential conditionals for the first mu positions, derived from the
// stationary context law so the process is stationary from symbol 1.
// Element t holds A^t rows of A entries.
template <class T>
std::vector<std::vector<T>> start_conditionals_t(int a_size, int mu,
                                                 std::span<const T> ctx_law) {
  std::vector<std::vector<T>> out;
  std::vector<T> prev{T(1.0)};
  for (int t = 0; t < mu; ++t) {
    const std::size_t prev_states = pow_size(a_size, t);
    const std::size_t next_states = prev_states * static_cast<std::size_t>(a_size);
    std::vector<T> joint(next_states, T(0.0));
    const std::size_t tail = pow_size(a_size, mu - t - 1);
    for (std::size_t ctx = 0; ctx < ctx_law.size(); ++ctx)
      joint[ctx / tail] = joint[ctx / tail] + ctx_law[ctx];
    std::vector<T> cond(next_states);
    for (std::size_t p = 0; p < prev_states; ++p) {
      for (int a = 0; a < a_size; ++a) {
        const std::size_t idx = p * static_cast<std::size_t>(a_size) + static_cast<std::size_t>(a);
        cond[idx] = scalar_value(prev[p]) > 0.0 ? joint[idx] / prev[p]
                                                : T(1.0 / static_cast<double>(a_size));
      }
    }
    out.push_back(std::move(cond));
    prev = std::move(joint);
  }
  return out;
}

template <class T>
T kl_bits(std::span<const T> p, std::span<const double> q) {
  using std::log;
  T d = T(0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (scalar_value(p[i]) <= 0.0) continue;
    if (q[i] <= 0.0) throw std::domain_error("kl_bits: target has a zero where p does not");
    d = d + p[i] * (log(p[i]) - std::log(q[i])) * kInvLn2;
  }
  return d;
}

}  // namespace model_math

// Table-parameterized order-mu model with softmax rows. Immutable after
// construction; training builds a new one from updated logits.
class TableModel {
 public:
  TableModel() = default;
  TableModel(int a_size, int mu, std::vector<double> logits)
      : a_size_(a_size), mu_(mu), logits_(std::move(logits)) {
    if (a_size_ < 2) throw std::invalid_argument("TableModel: alphabet size must be >= 2");
    if (mu_ < 0) throw std::invalid_argument("TableModel: memory must be >= 0");
    if (logits_.size() != num_contexts() * static_cast<std::size_t>(a_size_))
      throw std::invalid_argument("TableModel: logits size mismatch");
    probs_ = model_math::table_probs<double>(a_size_, mu_, logits_);
  }

  static TableModel uniform(int a_size, int mu) {
    return TableModel(a_size, mu,
                      std::vector<double>(model_math::pow_size(a_size, mu) *
                                              static_cast<std::size_t>(a_size),
                                          0.0));
  }

  static TableModel iid(std::span<const double> marginal) {
    std::vector<double> logits(marginal.size());
    for (std::size_t i = 0; i < marginal.size(); ++i) {
      if (marginal[i] <= 0.0)
        throw std::invalid_argument("TableModel::iid: probabilities must be positive");
      logits[i] = std::log(marginal[i]);
    }
    return TableModel(static_cast<int>(marginal.size()), 0, std::move(logits));
  }

  // conditional rows given explicitly as probabilities, row-major [ctx][a]
  static TableModel from_probability_table(int a_size, int mu, std::span<const double> table) {
    std::vector<double> logits(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (table[i] <= 0.0)
        throw std::invalid_argument("TableModel: conditional probabilities must be positive");
      logits[i] = std::log(table[i]);
    }
    return TableModel(a_size, mu, std::move(logits));
  }

  int alphabet_size() const { return a_size_; }
  int memory() const { return mu_; }
  std::size_t num_contexts() const { return model_math::pow_size(a_size_, mu_); }
  std::span<const double> logits() const { return logits_; }
  std::span<const double> probs() const { return probs_; }

  std::span<const double> row(std::size_t ctx) const {
    return std::span<const double>(probs_).subspan(ctx * static_cast<std::size_t>(a_size_),
                                                   static_cast<std::size_t>(a_size_));
  }

  std::size_t context_index(std::span<const int> context) const {
    if (static_cast<int>(context.size()) != mu_)
      throw std::invalid_argument("context length must equal the model memory");
    std::size_t ctx = 0;
    for (int s : context) {
      if (s < 0 || s >= a_size_) throw std::invalid_argument("context symbol out of range");
      ctx = ctx * static_cast<std::size_t>(a_size_) + static_cast<std::size_t>(s);
    }
    return ctx;
  }

  std::size_t roll_context(std::size_t ctx, int a) const {
    if (mu_ == 0) return 0;
    return (ctx % (num_contexts() / static_cast<std::size_t>(a_size_))) *
               static_cast<std::size_t>(a_size_) +
           static_cast<std::size_t>(a);
  }

  std::vector<double> next_distribution(std::span<const int> context) const {
    auto r = row(context_index(context));
    return std::vector<double>(r.begin(), r.end());
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open model file for write: " + path);
    f << kMagic << "\n" << a_size_ << " " << mu_ << "\n";
    f.precision(17);
    const std::size_t rows = num_contexts();
    for (std::size_t r = 0; r < rows; ++r) {
      auto row_p = row(r);
      for (int a = 0; a < a_size_; ++a) f << (a ? " " : "") << row_p[static_cast<std::size_t>(a)];
      f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
  }

  static TableModel load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open model file: " + path);
    std::string magic;
    std::getline(f, magic);
    if (magic != kMagic) throw std::runtime_error("bad model file magic in " + path);
    int a_size = 0, mu = 0;
    f >> a_size >> mu;
    if (!f || a_size < 2 || mu < 0) throw std::runtime_error("bad model header in " + path);
    std::vector<double> table(model_math::pow_size(a_size, mu) * static_cast<std::size_t>(a_size));
    for (auto& v : table) f >> v;
    if (!f) throw std::runtime_error("truncated model table in " + path);
    return from_probability_table(a_size, mu, table);
  }

 private:
  static constexpr const char* kMagic = "PASHAPE-MODEL-V1";
  int a_size_ = 0;
  int mu_ = 0;
  std::vector<double> logits_;
  std::vector<double> probs_;
};

struct StationaryLaw {
  int a_size = 0;
  int mu = 0;
  std::vector<double> context_probs;  // over A^mu contexts
  std::vector<double> marginal;       // over the symbol alphabet
};

inline StationaryLaw stationary_law(const TableModel& m, double tol = 1e-12,
                                    int max_iters = 20000) {
  StationaryLaw law;
  law.a_size = m.alphabet_size();
  law.mu = m.memory();
  law.context_probs = model_math::stationary_context_law<double>(m.alphabet_size(), m.memory(),
                                                                 m.probs(), tol, max_iters);
  law.marginal = model_math::stationary_marginal<double>(m.alphabet_size(), m.memory(), m.probs(),
                                                         law.context_probs);
  return law;
}

inline double entropy_rate(const TableModel& m) {
  auto law = stationary_law(m);
  return model_math::entropy_rate_bits<double>(m.alphabet_size(), m.memory(), m.probs(),
                                               law.context_probs);
}

inline double entropy_rate(const TableModel& m, const StationaryLaw& law) {
  return model_math::entropy_rate_bits<double>(m.alphabet_size(), m.memory(), m.probs(),
                                               law.context_probs);
}

inline double marginal_entropy(const StationaryLaw& law) {
  return model_math::entropy_bits_t<double>(std::span<const double>(law.marginal));
}

// Eq-style identity: marginal entropy minus entropy rate, per unsigned
// symbol. Nonnegative for every valid model. One unsigned symbol carries one
// 2D QAM amplitude pair, so the same number is bits/2D; halve for bits/1D.
inline double rate_loss_theoretical(const TableModel& m) {
  auto law = stationary_law(m);
  return marginal_entropy(law) - entropy_rate(m, law);
}

inline double rate_loss_theoretical(const TableModel& m, const StationaryLaw& law) {
  return marginal_entropy(law) - entropy_rate(m, law);
}

// Sequential conditionals p(a_1), p(a_2|a_1), ..., p(a_mu|...) for the first
// mu positions; see model_math::start_conditionals_t.
inline std::vector<std::vector<double>> start_conditionals(const TableModel& m,
                                                           const StationaryLaw& law) {
  return model_math::start_conditionals_t<double>(m.alphabet_size(), m.memory(),
                                                  law.context_probs);
}

// Ancestral sampling; reproducible for a fixed seed. With an explicit boot
// context the output continues after it; otherwise the first mu output
// symbols are drawn from the stationary start conditionals, so the process
// is stationary from symbol 1.
inline std::vector<int> sample_sequence(const TableModel& m, std::size_t length,
                                        std::uint64_t seed,
                                        std::span<const int> boot_context = {}) {
  if (length < 1) throw std::invalid_argument("sample_sequence: length must be >= 1");
  Rng rng(seed);
  const int a_size = m.alphabet_size();
  const int mu = m.memory();
  std::vector<int> seq;
  seq.reserve(length);
  std::size_t ctx = 0;
  if (mu > 0 && !boot_context.empty()) {
    ctx = m.context_index(boot_context);  // validates length == mu
  } else if (mu > 0) {
    const auto law = stationary_law(m);
    const auto starts = start_conditionals(m, law);
    std::size_t prefix = 0;
    for (int t = 0; t < mu && seq.size() < length; ++t) {
      std::span<const double> cond(starts[static_cast<std::size_t>(t)]);
      const int a = rng.categorical(cond.subspan(prefix * static_cast<std::size_t>(a_size),
                                                 static_cast<std::size_t>(a_size)));
      seq.push_back(a);
      prefix = prefix * static_cast<std::size_t>(a_size) + static_cast<std::size_t>(a);
    }
    ctx = prefix;
  }
  while (seq.size() < length) {
    const int a = rng.categorical(m.row(ctx));
    seq.push_back(a);
    ctx = m.roll_context(ctx, a);
  }
  return seq;
}

}  // namespace pashape
