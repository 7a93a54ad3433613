// SPDX-License-Identifier: Apache-2.0
//
// Arithmetic distribution matching. Information bits drive a fixed-precision
// arithmetic *decoder* against a conditional source model: the payload is
// read as a uniform binary fraction and symbols are emitted until every
// payload bit is pinned by the symbol intervals. The inverse runs the
// matching arithmetic *encoder* over the symbols and reproduces the payload
// exactly. Both sides walk the identical (low, high) state trajectory, which
// is what makes the pair bit-exact across platforms.
//
// Registers are 63-bit; conditionals are quantized to 32-bit cumulative
// counts with a floor of 2^-20 per symbol, so intervals can never collapse.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pashape/bits.hpp"
#include "pashape/source_model.hpp"

namespace pashape {

struct CoderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class AdmCoder {
 public:
  explicit AdmCoder(const TableModel& model)
      : a_size_(model.alphabet_size()), mu_(model.memory()) {
    const std::size_t rows = model.num_contexts();
    cum_.resize(rows * stride());
    for (std::size_t r = 0; r < rows; ++r)
      quantize_row(model.row(r), cum_.data() + r * stride());
    if (mu_ > 0) {
      const auto law = stationary_law(model);
      const auto starts = start_conditionals(model, law);
      start_cum_.resize(static_cast<std::size_t>(mu_));
      for (int t = 0; t < mu_; ++t) {
        const std::size_t trows = model_math::pow_size(a_size_, t);
        auto& sc = start_cum_[static_cast<std::size_t>(t)];
        sc.resize(trows * stride());
        for (std::size_t r = 0; r < trows; ++r)
          quantize_row(std::span<const double>(starts[static_cast<std::size_t>(t)])
                           .subspan(r * static_cast<std::size_t>(a_size_),
                                    static_cast<std::size_t>(a_size_)),
                       sc.data() + r * stride());
      }
    }
    roll_mod_ = model_math::pow_size(a_size_, mu_ > 0 ? mu_ - 1 : 0);
  }

  int alphabet_size() const { return a_size_; }
  int memory() const { return mu_; }

  // payload bits -> symbol sequence (variable length, flush symbols included)
  std::vector<int> encode(const BitStream& payload) const {
    const std::size_t n = payload.size();
    if (n == 0) throw std::invalid_argument("adm_encode: payload is empty");
    std::uint64_t low = 0, high = kMask, value = 0;
    std::size_t pos = 0;
    // Pad with 1 then zeros: the code value is then strictly inside the
    // payload's dyadic interval, so every payload bit settles after finitely
    // many symbols. Zero padding would park the value on an interval
    // boundary and the final bit could stay pending forever.
    auto next_bit = [&]() -> std::uint64_t {
      const std::size_t p = pos++;
      return p < n ? payload[p] : (p == n ? 1 : 0);
    };
    for (int i = 0; i < kStateBits; ++i) value = (value << 1) | next_bit();

    std::vector<int> symbols;
    std::uint64_t pending = 0, settled = 0;
    std::size_t ctx = 0, t = 0;
    const std::size_t cap = 4 * n + (1u << 16);
    while (true) {
      if (symbols.size() > cap)
        throw CoderError("adm_encode: no termination after " + std::to_string(symbols.size()) +
                         " symbols (model entropy too low for payload length)");
      const std::uint64_t* row = current_row(t, ctx);
      const std::uint64_t span = high - low + 1;
      const unsigned __int128 scaled128 =
          ((static_cast<unsigned __int128>(value - low) + 1) << kTotalBits) - 1;
      const std::uint64_t scaled = static_cast<std::uint64_t>(scaled128 / span);
      int a = int(std::upper_bound(row + 1, row + a_size_ + 1, scaled) - (row + 1));
      high = low + static_cast<std::uint64_t>(
                       (static_cast<unsigned __int128>(span) * row[a + 1]) >> kTotalBits) -
             1;
      low = low + static_cast<std::uint64_t>(
                      (static_cast<unsigned __int128>(span) * row[a]) >> kTotalBits);
      if (low > value || value > high)
        throw CoderError("adm_encode: interval invariant broken at symbol " +
                         std::to_string(symbols.size()));
      while (true) {
        if (high < kHalf) {
          settled += 1 + pending;
          pending = 0;
        } else if (low >= kHalf) {
          settled += 1 + pending;
          pending = 0;
          low -= kHalf;
          high -= kHalf;
          value -= kHalf;
        } else if (low >= kQuarter && high < kThreeQuarter) {
          ++pending;
          low -= kQuarter;
          high -= kQuarter;
          value -= kQuarter;
        } else {
          break;
        }
        low <<= 1;
        high = (high << 1) | 1;
        value = (value << 1) | next_bit();
      }
      symbols.push_back(a);
      advance(t, ctx, a);
      if (settled >= n) break;
    }
    return symbols;
  }

  // symbol sequence -> first payload_length bits of the driving payload
  BitStream decode(std::span<const int> symbols, std::size_t payload_length) const {
    if (payload_length == 0) throw std::invalid_argument("adm_decode: payload length is zero");
    std::uint64_t low = 0, high = kMask, pending = 0;
    BitStream out;
    out.bits.reserve(payload_length + 64);
    auto emit = [&](int b) {
      out.push_back(b);
      for (; pending > 0; --pending) out.push_back(1 - b);
    };
    std::size_t ctx = 0, t = 0;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      const int a = symbols[i];
      if (a < 0 || a >= a_size_)
        throw std::invalid_argument("adm_decode: symbol out of range at position " +
                                    std::to_string(i));
      const std::uint64_t* row = current_row(t, ctx);
      const std::uint64_t span = high - low + 1;
      high = low + static_cast<std::uint64_t>(
                       (static_cast<unsigned __int128>(span) * row[a + 1]) >> kTotalBits) -
             1;
      low = low + static_cast<std::uint64_t>(
                      (static_cast<unsigned __int128>(span) * row[a]) >> kTotalBits);
      while (true) {
        if (high < kHalf) {
          emit(0);
        } else if (low >= kHalf) {
          emit(1);
          low -= kHalf;
          high -= kHalf;
        } else if (low >= kQuarter && high < kThreeQuarter) {
          ++pending;
          low -= kQuarter;
          high -= kQuarter;
        } else {
          break;
        }
        low <<= 1;
        high = (high << 1) | 1;
      }
      advance(t, ctx, a);
    }
    if (out.size() < payload_length) {
      // final disambiguation, as an arithmetic encoder flush would emit
      ++pending;
      emit(low < kQuarter ? 0 : 1);
    }
    if (out.size() < payload_length)
      throw CoderError("adm_decode: symbol stream pins only " + std::to_string(out.size()) +
                       " of " + std::to_string(payload_length) + " payload bits");
    out.bits.resize(payload_length);
    return out;
  }

 private:
  static constexpr int kStateBits = 63;
  static constexpr std::uint64_t kMask = (1ull << 63) - 1;
  static constexpr std::uint64_t kHalf = 1ull << 62;
  static constexpr std::uint64_t kQuarter = 1ull << 61;
  static constexpr std::uint64_t kThreeQuarter = kHalf + kQuarter;
  static constexpr int kTotalBits = 32;
  static constexpr std::uint64_t kTotal = 1ull << kTotalBits;
  static constexpr std::uint64_t kFloorCount = 1ull << 12;  // 2^-20 of total

  std::size_t stride() const { return static_cast<std::size_t>(a_size_) + 1; }

  // counts c_a = max(floor, round(p_a * 2^32)), deterministically adjusted on
  // the largest entries so they sum to exactly 2^32; cum_out gets A+1 partial
  // sums with cum_out[0] = 0 and cum_out[A] = 2^32.
  void quantize_row(std::span<const double> probs, std::uint64_t* cum_out) const {
    const int a_size = a_size_;
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(a_size));
    for (int a = 0; a < a_size; ++a) {
      const double p = std::max(probs[static_cast<std::size_t>(a)], 0.0);
      const double scaled = p * static_cast<double>(kTotal);
      std::uint64_t c = scaled >= static_cast<double>(kTotal)
                            ? kTotal
                            : static_cast<std::uint64_t>(scaled + 0.5);
      counts[static_cast<std::size_t>(a)] = std::max(c, kFloorCount);
    }
    std::uint64_t sum = 0;
    for (auto c : counts) sum += c;
    while (sum != kTotal) {
      std::size_t big = 0;
      for (std::size_t i = 1; i < counts.size(); ++i)
        if (counts[i] > counts[big]) big = i;
      if (sum < kTotal) {
        counts[big] += kTotal - sum;
        sum = kTotal;
      } else {
        const std::uint64_t take = std::min(sum - kTotal, counts[big] - kFloorCount);
        counts[big] -= take;
        sum -= take;
        if (take == 0)
          throw CoderError("quantize_row: alphabet too large for 32-bit quantization");
      }
    }
    cum_out[0] = 0;
    for (int a = 0; a < a_size; ++a)
      cum_out[a + 1] = cum_out[a] + counts[static_cast<std::size_t>(a)];
  }

  const std::uint64_t* current_row(std::size_t t, std::size_t ctx) const {
    if (static_cast<int>(t) < mu_) return start_cum_[t].data() + ctx * stride();
    return cum_.data() + ctx * stride();
  }

  void advance(std::size_t& t, std::size_t& ctx, int a) const {
    if (static_cast<int>(t) < mu_) {
      ctx = ctx * static_cast<std::size_t>(a_size_) + static_cast<std::size_t>(a);
      ++t;
      return;
    }
    if (mu_ == 0) return;
    ctx = (ctx % roll_mod_) * static_cast<std::size_t>(a_size_) + static_cast<std::size_t>(a);
  }

  int a_size_ = 0;
  int mu_ = 0;
  std::size_t roll_mod_ = 1;
  std::vector<std::uint64_t> cum_;                      // main rows, (A+1) entries each
  std::vector<std::vector<std::uint64_t>> start_cum_;   // per t < mu
};

struct AdmRateLoss {
  double rate_loss_bits_per_symbol = 0.0;  // H(marginal) - n / L_bar
  double mean_output_length = 0.0;         // L_bar
};

// Practical matcher rate loss over uniform random payloads. The marginal
// entropy term comes from the model's stationary law; the n/L_bar term is
// measured, flush overhead included.
inline AdmRateLoss measure_rate_loss_adm(const AdmCoder& coder, const TableModel& model,
                                         std::size_t n, int trials, std::uint64_t seed) {
  if (trials < 100) throw std::invalid_argument("measure_rate_loss_adm: need >= 100 trials");
  const auto law = stationary_law(model);
  const double h_marginal = marginal_entropy(law);
  Rng rng(seed);
  double total_len = 0.0;
  for (int t = 0; t < trials; ++t) {
    const BitStream payload = random_bits(rng, n);
    total_len += static_cast<double>(coder.encode(payload).size());
  }
  AdmRateLoss out;
  out.mean_output_length = total_len / trials;
  out.rate_loss_bits_per_symbol = h_marginal - static_cast<double>(n) / out.mean_output_length;
  return out;
}

// Matched-sequence frame file: text header (model id, n, seed, count),
// then the symbol indices.
inline void write_matched_frame(const std::string& path, const std::string& model_id,
                                std::size_t n, std::uint64_t seed,
                                std::span<const int> symbols) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open frame file for write: " + path);
  f << "PASHAPE-FRAME-V1\n";
  f << "model=" << model_id << " n=" << n << " seed=" << seed << " count=" << symbols.size()
    << "\n";
  for (std::size_t i = 0; i < symbols.size(); ++i) f << (i ? " " : "") << symbols[i];
  f << "\n";
  if (!f) throw std::runtime_error("write failed: " + path);
}

struct MatchedFrame {
  std::string model_id;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<int> symbols;
};

inline MatchedFrame read_matched_frame(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open frame file: " + path);
  std::string magic;
  std::getline(f, magic);
  if (magic != "PASHAPE-FRAME-V1") throw std::runtime_error("bad frame file magic in " + path);
  std::string header;
  std::getline(f, header);
  MatchedFrame out;
  std::size_t count = 0;
  std::istringstream hs(header);
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw std::runtime_error("bad frame header in " + path);
    const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "model")
      out.model_id = val;
    else if (key == "n")
      out.n = std::stoull(val);
    else if (key == "seed")
      out.seed = std::stoull(val);
    else if (key == "count")
      count = std::stoull(val);
  }
  out.symbols.resize(count);
  for (auto& s : out.symbols) f >> s;
  if (!f) throw std::runtime_error("truncated frame file: " + path);
  return out;
}

}  // namespace pashape
