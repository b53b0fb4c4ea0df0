/*
 * Copyright 2026 The l0nsaf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Cosine-modulated analysis filter banks and the critically decimated
// analysis stage that turns a fullband (x, d) stream into subband frames.
//
// The prototype is a constrained least-squares lowpass whose half-power
// point sits exactly at pi/(2N) with a transition band symmetric about it.
// That makes |P(w)|^2 + |P(pi/N - w)|^2 ~ 1 across the transition, the
// condition for the modulated bank to be power complementary.

#ifndef L0NSAF_FILTERBANK_HPP_
#define L0NSAF_FILTERBANK_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "l0nsaf/error.hpp"

namespace l0nsaf {

struct PrototypeFilter {
  std::vector<double> coeffs;
  // Half-power frequency in radians/sample.
  double cutoff = std::numbers::pi;
};

struct FilterBank {
  std::size_t n_subbands = 0;
  // filters[m][i] = h_{m,i}
  std::vector<std::vector<double>> filters;
  // Absent for banks read back from a matrix file.
  std::optional<PrototypeFilter> prototype;

  std::size_t length() const { return filters.empty() ? 0 : filters[0].size(); }
};

// Passband edge of the prototype as a fraction of its half-power
// frequency pi/(2N). The stopband edge mirrors it about pi/(2N), which keeps
// the transition symmetric and the bank close to power complementary.
inline constexpr double kPassbandEdgeFraction = 0.6;

namespace detail {

// |H(e^{jw})| of an FIR by direct summation.
inline double magnitude_at(std::span<const double> h, double w) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < h.size(); ++i) {
    acc += h[i] * std::polar(1.0, -w * static_cast<double>(i));
  }
  return std::abs(acc);
}

// Row of the zero-phase amplitude basis: P(w) = a_0 + 2 sum_k a_k cos(k w).
inline Eigen::RowVectorXd cosine_row(std::size_t half, double w) {
  Eigen::RowVectorXd row(half + 1);
  row(0) = 1.0;
  for (std::size_t k = 1; k <= half; ++k) row(k) = 2.0 * std::cos(w * static_cast<double>(k));
  return row;
}

// Pseudo-QMF cosine modulation:
//   h_{m,i} = 2 p_i cos((pi/N)(m + 1/2)(i - (M-1)/2) + (-1)^m pi/4)
inline std::vector<std::vector<double>> cosine_modulate(std::span<const double> proto,
                                                        std::size_t n_subbands) {
  const std::size_t length = proto.size();
  const double center = 0.5 * static_cast<double>(length - 1);
  const double n = static_cast<double>(n_subbands);
  std::vector<std::vector<double>> filters(n_subbands, std::vector<double>(length));
  for (std::size_t m = 0; m < n_subbands; ++m) {
    const double phase = (m % 2 == 0 ? 1.0 : -1.0) * std::numbers::pi / 4.0;
    const double freq = std::numbers::pi / n * (static_cast<double>(m) + 0.5);
    for (std::size_t i = 0; i < length; ++i) {
      filters[m][i] = 2.0 * proto[i] * std::cos(freq * (static_cast<double>(i) - center) + phase);
    }
  }
  return filters;
}

}  // namespace detail

// Linear-phase lowpass prototype with half-power point at pi/(2N). It is
// scaled so the modulated bank has unit total energy, sum_m ||h_m||^2 = 1:
// white noise of variance s^2 then has variance s^2 / N in every subband
// (up to the small imbalance of the band edges). N = 1 requires M = 1 and
// yields the passthrough [1.0].
inline PrototypeFilter design_prototype(std::size_t n_subbands,
                                        std::size_t length) {
  if (n_subbands < 1) throw ParameterError("subband count must be >= 1", "subbands");
  if (length < 1) throw ParameterError("filter length must be >= 1", "bank_length");
  if (n_subbands == 1) {
    if (length != 1) {
      throw ParameterError("a single-band bank must have filter length 1",
                           "bank_length");
    }
    return {{1.0}, std::numbers::pi};
  }
  if (length < 3 || length % 2 == 0) {
    throw ParameterError("a multiband prototype needs an odd length >= 3", "bank_length");
  }

  // Least-squares fit to an ideal lowpass over [0, wp] and [ws, pi] with
  // exact constraints P(0) = 1 and P(pi/(2N)) = 1/sqrt(2), solved through
  // the KKT system of the equality-constrained problem.
  const double target = std::numbers::pi / (2.0 * static_cast<double>(n_subbands));
  const double wp = kPassbandEdgeFraction * target;
  const double ws = 2.0 * target - wp;
  const std::size_t half = (length - 1) / 2;
  const std::size_t unknowns = half + 1;
  constexpr std::size_t kGrid = 1024;

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(unknowns, unknowns);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(unknowns);
  for (std::size_t g = 0; g < kGrid; ++g) {
    const double w = std::numbers::pi * (static_cast<double>(g) + 0.5) / kGrid;
    if (w > wp && w < ws) continue;
    const Eigen::RowVectorXd row = detail::cosine_row(half, w);
    gram.noalias() += row.transpose() * row;
    if (w <= wp) rhs += row.transpose();
  }
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(unknowns + 2, unknowns + 2);
  kkt.topLeftCorner(unknowns, unknowns) = gram;
  const Eigen::RowVectorXd at_dc = detail::cosine_row(half, 0.0);
  const Eigen::RowVectorXd at_half_power = detail::cosine_row(half, target);
  kkt.block(unknowns, 0, 1, unknowns) = at_dc;
  kkt.block(unknowns + 1, 0, 1, unknowns) = at_half_power;
  kkt.block(0, unknowns, unknowns, 1) = at_dc.transpose();
  kkt.block(0, unknowns + 1, unknowns, 1) = at_half_power.transpose();
  Eigen::VectorXd b(unknowns + 2);
  b << rhs, 1.0, std::sqrt(0.5);
  const Eigen::VectorXd solution = kkt.fullPivLu().solve(b);

  std::vector<double> coeffs(length);
  for (std::size_t k = 0; k <= half; ++k) {
    coeffs[half + k] = coeffs[half - k] = solution(static_cast<Eigen::Index>(k));
  }
  double energy = 0.0;
  for (const auto& h : detail::cosine_modulate(coeffs, n_subbands)) {
    for (double c : h) energy += c * c;
  }
  const double scale = 1.0 / std::sqrt(energy);
  for (double& c : coeffs) c *= scale;
  return {std::move(coeffs), target};
}

inline FilterBank modulate(const PrototypeFilter& prototype,
                           std::size_t n_subbands) {
  if (n_subbands < 1) throw ParameterError("subband count must be >= 1", "subbands");
  if (prototype.coeffs.empty()) {
    throw ParameterError("prototype has no coefficients", "prototype");
  }
  FilterBank bank;
  bank.n_subbands = n_subbands;
  bank.prototype = prototype;
  bank.filters = n_subbands == 1 ? std::vector<std::vector<double>>{{1.0}}
                                 : detail::cosine_modulate(prototype.coeffs, n_subbands);
  return bank;
}

inline FilterBank make_filter_bank(std::size_t n_subbands, std::size_t length) {
  return modulate(design_prototype(n_subbands, length), n_subbands);
}

// Header line "N M", then one filter per line.
inline void write_bank(std::ostream& out, const FilterBank& bank) {
  const auto old_precision = out.precision(17);
  out << bank.n_subbands << ' ' << bank.length() << '\n';
  for (const auto& h : bank.filters) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (i) out << ' ';
      out << h[i];
    }
    out << '\n';
  }
  out.precision(old_precision);
}

inline FilterBank read_bank(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next_line()) throw FormatError("bank file: missing 'N M' header");
  FilterBank bank;
  std::size_t length = 0;
  {
    std::istringstream header(line);
    long long n = 0, m = 0;
    if (!(header >> n >> m) || n < 1 || m < 1) {
      throw FormatError("bank file line 1: expected positive 'N M' header");
    }
    bank.n_subbands = static_cast<std::size_t>(n);
    length = static_cast<std::size_t>(m);
  }
  for (std::size_t row = 0; row < bank.n_subbands; ++row) {
    if (!next_line()) {
      throw FormatError("bank file: expected " + std::to_string(bank.n_subbands) +
                        " filter rows, found " + std::to_string(row));
    }
    std::istringstream fields(line);
    std::vector<double> h;
    double v = 0.0;
    while (fields >> v) h.push_back(v);
    if (!fields.eof() || h.size() != length) {
      throw FormatError("bank file line " + std::to_string(line_no) +
                        ": expected " + std::to_string(length) + " coefficients");
    }
    bank.filters.push_back(std::move(h));
  }
  return bank;
}

inline void write_bank(const FilterBank& bank, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_bank(out, bank);
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline FilterBank read_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open bank file '" + path + "'");
  return read_bank(in);
}

// Per-decimated-instant subband data consumed by the adaptive engine.
struct SubbandFrame {
  std::vector<std::vector<double>> regressors;  // x_m(tau), newest first
  std::vector<double> desired;                  // d_{m,D}(tau)
  std::vector<double> sq_norms;                 // ||x_m(tau)||^2
  std::size_t tau = 0;

  std::size_t subbands() const { return regressors.size(); }
  std::size_t taps() const { return regressors.empty() ? 0 : regressors[0].size(); }
};

inline double sum_of_squares(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Fixed-capacity history with the newest sample at index 0 and a contiguous
// view. Every sample is stored twice so any window is one span.
class DelayLine {
 public:
  explicit DelayLine(std::size_t capacity = 1)
      : capacity_(capacity), head_(0), buffer_(2 * capacity, 0.0) {}

  void push(double x) {
    head_ = (head_ + capacity_ - 1) % capacity_;
    buffer_[head_] = x;
    buffer_[head_ + capacity_] = x;
  }

  std::span<const double> view(std::size_t n) const {
    return {buffer_.data() + head_, n};
  }
  std::span<const double> view() const { return view(capacity_); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::size_t head_;
  std::vector<double> buffer_;
};

// Streaming analysis stage: filters x and d through every analysis filter and
// emits a SubbandFrame on every N-th sample (critical decimation).
class AnalysisState {
 public:
  AnalysisState(FilterBank bank, std::size_t taps)
      : bank_(std::move(bank)),
        taps_(taps),
        input_(std::max(bank_.length(), taps)),
        desired_(bank_.length()) {
    if (taps < 1) throw ParameterError("tap count must be >= 1", "taps");
    if (bank_.filters.size() != bank_.n_subbands || bank_.n_subbands == 0) {
      throw ParameterError("malformed filter bank", "bank");
    }
    subband_inputs_.assign(bank_.n_subbands, DelayLine(taps));
  }

  std::optional<SubbandFrame> push(double x, double d) {
    const std::size_t n = bank_.n_subbands;
    const std::size_t m_len = bank_.length();
    input_.push(x);
    desired_.push(d);
    const auto x_hist = input_.view(m_len);
    for (std::size_t m = 0; m < n; ++m) {
      subband_inputs_[m].push(dot(bank_.filters[m], x_hist));
    }
    const std::size_t t = samples_++;
    if (t % n != n - 1) return std::nullopt;

    SubbandFrame frame;
    frame.tau = t / n;
    frame.regressors.reserve(n);
    frame.desired.reserve(n);
    frame.sq_norms.reserve(n);
    const auto d_hist = desired_.view();
    for (std::size_t m = 0; m < n; ++m) {
      const auto reg = subband_inputs_[m].view();
      frame.regressors.emplace_back(reg.begin(), reg.end());
      frame.sq_norms.push_back(sum_of_squares(frame.regressors.back()));
      frame.desired.push_back(dot(bank_.filters[m], d_hist));
    }
    return frame;
  }

  // [x(t), x(t-1), ..., x(t-L+1)] for the most recent sample.
  std::span<const double> fullband_regressor() const { return input_.view(taps_); }
  std::size_t samples_seen() const { return samples_; }
  std::size_t taps() const { return taps_; }

 private:
  FilterBank bank_;
  std::size_t taps_;
  std::size_t samples_ = 0;
  DelayLine input_;
  DelayLine desired_;
  std::vector<DelayLine> subband_inputs_;
};

// Sampled magnitude response on `points` uniform frequencies in [0, pi).
inline std::vector<double> magnitude_response(std::span<const double> h,
                                              std::size_t points) {
  std::vector<double> mag(points);
  for (std::size_t k = 0; k < points; ++k) {
    mag[k] = detail::magnitude_at(
        h, std::numbers::pi * static_cast<double>(k) / static_cast<double>(points));
  }
  return mag;
}

struct BankDiagnostics {
  double power_ripple_db = 0.0;     // max/min of sum_m |H_m|^2 on (0, pi)
  double prototype_stopband_db = 0.0;  // attenuation beyond pi/N + 0.2 pi
  double prototype_passband_ripple_db = 0.0;  // on [0, 0.8 * pi/(2N)]
  double worst_subband_stopband_db = 0.0;  // each H_m outside its band +- 0.2 pi
};

inline BankDiagnostics diagnose(const FilterBank& bank, std::size_t points = 4096) {
  BankDiagnostics out;
  const std::size_t n = bank.n_subbands;
  std::vector<std::vector<double>> mags;
  for (const auto& h : bank.filters) mags.push_back(magnitude_response(h, points));
  double lo = 1e300, hi = 0.0;
  for (std::size_t k = 1; k < points; ++k) {
    double s = 0.0;
    for (const auto& mag : mags) s += mag[k] * mag[k];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  out.power_ripple_db = 10.0 * std::log10(hi / lo);

  const double band = std::numbers::pi / static_cast<double>(n);
  auto freq = [&](std::size_t k) {
    return std::numbers::pi * static_cast<double>(k) / static_cast<double>(points);
  };
  if (bank.prototype) {
    const auto pmag = magnitude_response(bank.prototype->coeffs, points);
    double stop = 0.0, pass_min = 1e300, pass_max = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
      if (freq(k) >= band + 0.2 * std::numbers::pi) stop = std::max(stop, pmag[k]);
      if (freq(k) <= 0.8 * band / 2.0) {
        pass_min = std::min(pass_min, pmag[k]);
        pass_max = std::max(pass_max, pmag[k]);
      }
    }
    stop /= pmag[0];
    out.prototype_stopband_db = stop > 0.0 ? -20.0 * std::log10(stop) : 400.0;
    out.prototype_passband_ripple_db = 20.0 * std::log10(pass_max / pass_min);
  }
  double worst = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    const double lower = static_cast<double>(m) * band - 0.2 * std::numbers::pi;
    const double upper = static_cast<double>(m + 1) * band + 0.2 * std::numbers::pi;
    const double peak = *std::max_element(mags[m].begin(), mags[m].end());
    for (std::size_t k = 0; k < points; ++k) {
      if (freq(k) < lower || freq(k) > upper) worst = std::max(worst, mags[m][k] / peak);
    }
  }
  out.worst_subband_stopband_db = worst > 0.0 ? -20.0 * std::log10(worst) : 400.0;
  return out;
}

}  // namespace l0nsaf

#endif  // L0NSAF_FILTERBANK_HPP_
