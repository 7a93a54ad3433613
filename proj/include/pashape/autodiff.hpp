// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode autodiff: a tape of unary/binary nodes and a Var
// handle (value + node index). Constants carry index -1 and never touch the
// tape. One tape is active per thread; training resets it every step.
// The Cplx<T> template gives complex arithmetic over either double or Var,
// so the channel and demapper code paths are written once.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pashape/scalar.hpp"

namespace pashape::ad {

class Tape {
 public:
  struct Node {
    double d0, d1;      // local partials
    std::int32_t p0, p1;  // parent node indices, -1 = none
  };

  std::int32_t add_leaf() { return push(0.0, -1, 0.0, -1); }
  std::int32_t push(double d0, std::int32_t p0, double d1, std::int32_t p1) {
    nodes_.push_back({d0, d1, p0, p1});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // adjoints of every node w.r.t. the seeded output
  std::vector<double> backward(std::int32_t output_index) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    if (output_index < 0) return adj;
    adj[static_cast<std::size_t>(output_index)] = 1.0;
    for (std::int32_t i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i) {
      const double a = adj[static_cast<std::size_t>(i)];
      if (a == 0.0) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.p0 >= 0) adj[static_cast<std::size_t>(n.p0)] += a * n.d0;
      if (n.p1 >= 0) adj[static_cast<std::size_t>(n.p1)] += a * n.d1;
    }
    return adj;
  }

  static Tape*& active() {
    thread_local Tape* t = nullptr;
    return t;
  }

 private:
  std::vector<Node> nodes_;
};

// RAII activation of a tape for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& t) : prev_(Tape::active()) { Tape::active() = &t; }
  ~TapeScope() { Tape::active() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

class Var {
 public:
  Var() : v_(0.0), i_(-1) {}
  Var(double constant) : v_(constant), i_(-1) {}  // implicit: constants mix freely

  static Var leaf(double value) {
    Tape* t = Tape::active();
    if (!t) throw std::logic_error("Var::leaf: no active tape");
    return Var(value, t->add_leaf());
  }

  double value() const { return v_; }
  std::int32_t index() const { return i_; }
  bool is_const() const { return i_ < 0; }

  friend Var operator+(const Var& a, const Var& b) {
    return make(a.v_ + b.v_, 1.0, a.i_, 1.0, b.i_);
  }
  friend Var operator-(const Var& a, const Var& b) {
    return make(a.v_ - b.v_, 1.0, a.i_, -1.0, b.i_);
  }
  friend Var operator*(const Var& a, const Var& b) {
    return make(a.v_ * b.v_, b.v_, a.i_, a.v_, b.i_);
  }
  friend Var operator/(const Var& a, const Var& b) {
    const double inv = 1.0 / b.v_;
    return make(a.v_ * inv, inv, a.i_, -a.v_ * inv * inv, b.i_);
  }
  friend Var operator-(const Var& a) { return make(-a.v_, -1.0, a.i_, 0.0, -1); }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

  friend Var exp(const Var& a) {
    const double e = std::exp(a.v_);
    return make(e, e, a.i_, 0.0, -1);
  }
  friend Var log(const Var& a) { return make(std::log(a.v_), 1.0 / a.v_, a.i_, 0.0, -1); }
  friend Var log1p(const Var& a) {
    return make(std::log1p(a.v_), 1.0 / (1.0 + a.v_), a.i_, 0.0, -1);
  }
  friend Var sqrt(const Var& a) {
    const double s = std::sqrt(a.v_);
    return make(s, 0.5 / s, a.i_, 0.0, -1);
  }

  // value of `a`, detached from the graph
  friend double detach(const Var& a) { return a.v_; }

 private:
  Var(double v, std::int32_t i) : v_(v), i_(i) {}

  static Var make(double v, double d0, std::int32_t p0, double d1, std::int32_t p1) {
    if (p0 < 0 && p1 < 0) return Var(v, -1);
    Tape* t = Tape::active();
    if (!t) throw std::logic_error("Var arithmetic: no active tape");
    return Var(v, t->push(d0, p0, d1, p1));
  }

  double v_;
  std::int32_t i_;
};

inline double scalar_value(const Var& v) { return v.value(); }

// gradient of output w.r.t. the given leaves
inline std::vector<double> gradient(const Tape& tape, const Var& output,
                                    const std::vector<Var>& leaves) {
  const auto adj = tape.backward(output.index());
  std::vector<double> g(leaves.size(), 0.0);
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (leaves[i].index() >= 0) g[i] = adj[static_cast<std::size_t>(leaves[i].index())];
  return g;
}

// Complex number over a differentiable scalar.
template <class T>
struct Cplx {
  T re{}, im{};

  Cplx() = default;
  Cplx(T r, T i) : re(std::move(r)), im(std::move(i)) {}
  explicit Cplx(const std::complex<double>& z) : re(z.real()), im(z.imag()) {}

  friend Cplx operator+(const Cplx& a, const Cplx& b) { return {a.re + b.re, a.im + b.im}; }
  friend Cplx operator-(const Cplx& a, const Cplx& b) { return {a.re - b.re, a.im - b.im}; }
  friend Cplx operator*(const Cplx& a, const Cplx& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  friend Cplx operator*(const T& s, const Cplx& a) { return {s * a.re, s * a.im}; }
  friend Cplx operator*(const Cplx& a, double s) { return {a.re * T(s), a.im * T(s)}; }
  friend Cplx conj(const Cplx& a) { return {a.re, T(0.0) - a.im}; }
  friend T norm(const Cplx& a) { return a.re * a.re + a.im * a.im; }
  // multiply by i
  friend Cplx rot90(const Cplx& a) { return {T(0.0) - a.im, a.re}; }

  std::complex<double> to_std() const { return {scalar_value(re), scalar_value(im)}; }
};

inline std::complex<double> to_std(const Cplx<double>& z) { return {z.re, z.im}; }

}  // namespace pashape::ad
