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

// Adaptive core of the L0-norm constrained NSAF with MSD-driven variable
// step size.
//
// Per decimated instant tau (see adapt_step):
//   e_m     = d_{m,D} - x_m^T w
//   v_m     = gamma v_m + (1 - gamma) e_m^2 / (||x_m||^2 + delta)   (unknown variance)
//   mu      = fixed | known-variance law | unknown-variance law, in [0, mu_max]
//   kappa   = mu rho
//   w      += mu sum_m e_m x_m / (||x_m||^2 + delta) - kappa (S w + G)
//   p       = max(0, MSD bound recursion)
//   alpha   = gamma alpha + (1 - gamma) ||S w + G||^2
// The step-size laws read alpha from the previous instant; alpha is
// refreshed last with the attractor evaluated at the pre-update weights.

#ifndef L0NSAF_ENGINE_HPP_
#define L0NSAF_ENGINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "l0nsaf/error.hpp"
#include "l0nsaf/filterbank.hpp"
#include "l0nsaf/sparsity.hpp"

namespace l0nsaf {

// Constant step size. The MSD tracker still runs; it uses the known-variance
// recursion when `tracker_noise_variance` is set, the error-based one
// otherwise.
struct FixedStep {
  double mu = 0.5;
  std::optional<double> tracker_noise_variance;

  bool operator==(const FixedStep&) const = default;
};

// Step size from the MSD bound with the background noise variance known.
struct VssKnownVariance {
  double noise_variance = 0.0;  // fullband sigma_eta^2

  bool operator==(const VssKnownVariance&) const = default;
};

// Step size from the MSD bound with the noise term replaced by moving
// averages of normalized subband errors.
struct VssUnknownVariance {
  bool operator==(const VssUnknownVariance&) const = default;
};

using StepMode = std::variant<FixedStep, VssKnownVariance, VssUnknownVariance>;

enum class MsdCase { known_variance, unknown_variance };

struct ResetConfig {
  std::size_t vt = 300;  // window length, fullband samples
  std::size_t vd = 225;  // largest entries dropped from the trimmed mean
  double epsilon = 1e-6;
  double phi = 1e-3;

  static ResetConfig defaults_for(std::size_t taps) {
    ResetConfig cfg;
    cfg.vt = 3 * taps;
    cfg.vd = (3 * cfg.vt) / 4;
    return cfg;
  }

  void validate() const {
    if (vd == 0 || vt <= vd) throw ParameterError("reset needs vt > vd > 0", "reset_vd");
    if (!(epsilon > 0.0)) throw ParameterError("reset epsilon must be > 0", "reset_epsilon");
    if (!(phi > 0.0)) throw ParameterError("reset phi must be > 0", "reset_phi");
  }

  bool operator==(const ResetConfig&) const = default;
};

struct AlgoConfig {
  double rho = 0.0;       // sparsity penalty; kappa = mu * rho
  double theta = 5.0;     // zero-attraction range 1/theta
  double gamma = 0.99;    // forgetting factor of alpha and v_m
  double r_scale = 1.0;   // input-correlation scaling r1 / r2
  double delta = 0.01;    // regularization of every ||x_m||^2 denominator
  StepMode mode = VssUnknownVariance{};
  double mu_max = 1.0;
  std::optional<ResetConfig> reset;

  MsdCase msd_case() const {
    if (std::holds_alternative<VssKnownVariance>(mode)) return MsdCase::known_variance;
    if (const auto* fixed = std::get_if<FixedStep>(&mode);
        fixed && fixed->tracker_noise_variance) {
      return MsdCase::known_variance;
    }
    return MsdCase::unknown_variance;
  }

  // Fullband noise variance used by the known-variance recursion.
  double noise_variance() const {
    if (const auto* known = std::get_if<VssKnownVariance>(&mode)) {
      return known->noise_variance;
    }
    if (const auto* fixed = std::get_if<FixedStep>(&mode)) {
      return fixed->tracker_noise_variance.value_or(0.0);
    }
    return 0.0;
  }

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(rho) || rho < 0.0) throw ParameterError("rho must be >= 0", "rho");
    if (!finite(theta) || !(theta > 0.0)) throw ParameterError("theta must be > 0", "theta");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in (0, 1)", "gamma");
    if (!finite(r_scale) || r_scale < 1.0) throw ParameterError("r must be >= 1", "r");
    if (!finite(delta) || delta < 0.0) throw ParameterError("delta must be >= 0", "delta");
    if (!finite(mu_max) || !(mu_max > 0.0)) throw ParameterError("mu_max must be > 0", "mu_max");
    if (const auto* fixed = std::get_if<FixedStep>(&mode)) {
      if (!(fixed->mu > 0.0 && fixed->mu < 2.0)) {
        throw ParameterError("fixed mu must lie in (0, 2)", "mu");
      }
      if (fixed->mu > mu_max) throw ParameterError("fixed mu exceeds mu_max", "mu");
      if (fixed->tracker_noise_variance && !(*fixed->tracker_noise_variance >= 0.0)) {
        throw ParameterError("noise variance must be >= 0", "noise_variance");
      }
    }
    if (const auto* known = std::get_if<VssKnownVariance>(&mode)) {
      if (!finite(known->noise_variance) || known->noise_variance < 0.0) {
        throw ParameterError("noise variance must be >= 0", "noise_variance");
      }
    }
    if (reset) reset->validate();
  }

  bool operator==(const AlgoConfig&) const = default;
};

struct FilterState {
  std::vector<double> w;  // omega(tau)
  double p = 1.0;         // MSD upper-bound estimate
  double alpha = 0.0;     // moving average of ||S w + G||^2
  std::vector<double> v;  // moving averages of e_m^2 / ||x_m||^2
  double mu = 0.0;        // last applied step size
  std::uint64_t tau = 0;

  static FilterState initial(std::size_t taps, std::size_t subbands) {
    FilterState s;
    s.w.assign(taps, 0.0);
    s.v.assign(subbands, 0.0);
    return s;
  }

  void reinitialize() {
    std::fill(w.begin(), w.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    alpha = 0.0;
    p = 1.0;
  }
};

// Self-describing text record: tau, mu, p, alpha, v and w.
inline std::string snapshot(const FilterState& s) {
  std::ostringstream out;
  out.precision(17);
  out << "tau=" << s.tau << " mu=" << s.mu << " p=" << s.p << " alpha=" << s.alpha;
  out << " v=";
  for (std::size_t m = 0; m < s.v.size(); ++m) out << (m ? "," : "") << s.v[m];
  out << " w=";
  for (std::size_t j = 0; j < s.w.size(); ++j) out << (j ? "," : "") << s.w[j];
  return out.str();
}

inline FilterState parse_snapshot(const std::string& record) {
  FilterState s;
  std::istringstream in(record);
  std::string token;
  auto parse_list = [](const std::string& text) {
    std::vector<double> out;
    std::istringstream items(text);
    std::string item;
    while (std::getline(items, item, ',')) {
      if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
  };
  bool seen_w = false;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw FormatError("snapshot: bad token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    try {
      if (key == "tau") s.tau = std::stoull(value);
      else if (key == "mu") s.mu = std::stod(value);
      else if (key == "p") s.p = std::stod(value);
      else if (key == "alpha") s.alpha = std::stod(value);
      else if (key == "v") s.v = parse_list(value);
      else if (key == "w") { s.w = parse_list(value); seen_w = true; }
      else throw FormatError("snapshot: unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw FormatError("snapshot: bad value for '" + key + "'");
    }
  }
  if (!seen_w) throw FormatError("snapshot: missing w");
  return s;
}

// e_m = d_{m,D} - x_m^T w.
inline std::vector<double> subband_errors(const SubbandFrame& frame,
                                          std::span<const double> w) {
  std::vector<double> errs(frame.subbands());
  for (std::size_t m = 0; m < frame.subbands(); ++m) {
    if (frame.regressors[m].size() != w.size()) {
      throw ParameterError("regressor length " + std::to_string(frame.regressors[m].size()) +
                               " does not match weight length " + std::to_string(w.size()),
                           "taps");
    }
    errs[m] = frame.desired[m] - dot(frame.regressors[m], w);
  }
  return errs;
}

namespace detail {

// Sum_m (sigma_eta^2 / N) / (||x_m||^2 + delta); subbands with a zero
// denominator contribute nothing.
inline double noise_term(const SubbandFrame& frame, double noise_variance,
                         double delta) {
  const double per_band = noise_variance / static_cast<double>(frame.subbands());
  double acc = 0.0;
  for (double sq : frame.sq_norms) {
    const double denom = sq + delta;
    if (denom > 0.0) acc += per_band / denom;
  }
  return acc;
}

inline double sum(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

inline double clamp_step(double mu, double mu_max) {
  if (!(mu > 0.0)) return 0.0;  // also maps NaN to 0
  return std::min(mu, mu_max);
}

}  // namespace detail

// mu = N p / (N p + r L (noise_term + rho^2 alpha)), clamped to [0, mu_max].
inline double step_size_known_variance(double p, const SubbandFrame& frame,
                                       const AlgoConfig& cfg, double alpha,
                                       std::size_t subbands, std::size_t taps) {
  const double np = static_cast<double>(subbands) * p;
  const double penalty = detail::noise_term(frame, cfg.noise_variance(), cfg.delta) +
                         cfg.rho * cfg.rho * alpha;
  const double denom = np + cfg.r_scale * static_cast<double>(taps) * penalty;
  if (!(denom > 0.0)) return 0.0;
  return detail::clamp_step(np / denom, cfg.mu_max);
}

// mu = N p / (r L (sum_m v_m + rho^2 alpha)), clamped to [0, mu_max]; 0 when
// the denominator vanishes.
inline double step_size_unknown_variance(double p, std::span<const double> v,
                                         const AlgoConfig& cfg, double alpha,
                                         std::size_t subbands, std::size_t taps) {
  const double np = static_cast<double>(subbands) * p;
  const double denom = cfg.r_scale * static_cast<double>(taps) *
                       (detail::sum(v) + cfg.rho * cfg.rho * alpha);
  if (!(denom > 0.0)) return 0.0;
  return detail::clamp_step(np / denom, cfg.mu_max);
}

// One step of the MSD upper-bound recursion, clipped at zero.
inline double msd_update(double p, double mu, double kappa, const SubbandFrame& frame,
                         double alpha, std::span<const double> v, const AlgoConfig& cfg,
                         std::size_t subbands, std::size_t taps) {
  const double n_over_rl = static_cast<double>(subbands) /
                           (cfg.r_scale * static_cast<double>(taps));
  double next = 0.0;
  if (cfg.msd_case() == MsdCase::known_variance) {
    next = p + (mu * mu - 2.0 * mu) * n_over_rl * p +
           mu * mu * detail::noise_term(frame, cfg.noise_variance(), cfg.delta) +
           kappa * kappa * alpha;
  } else {
    next = p - 2.0 * mu * n_over_rl * p + mu * mu * detail::sum(v) + kappa * kappa * alpha;
  }
  return std::max(0.0, next);
}

// alpha = gamma alpha_prev + (1 - gamma) ||S w + G||^2.
inline double alpha_update(double alpha_prev, double gamma,
                           const AttractorDecomposition<double>& dec,
                           std::span<const double> w) {
  return gamma * alpha_prev +
         (1.0 - gamma) * sum_of_squares(attractor_vector(dec, w));
}

// v_m = gamma v_prev + (1 - gamma) e_m^2 / (||x_m||^2 + delta).
inline double v_update(double v_prev, double gamma, double e_m, double sq_norm,
                       double delta) {
  const double denom = sq_norm + delta;
  const double ratio = denom > 0.0 ? e_m * e_m / denom : 0.0;
  return gamma * v_prev + (1.0 - gamma) * ratio;
}

// In place: w += mu sum_m e_m x_m / (||x_m||^2 + delta) - kappa (S w + G),
// with S and G taken at the incoming w.
inline void weight_update(std::span<double> w, const SubbandFrame& frame,
                          std::span<const double> errs, double mu, double kappa,
                          double theta, double delta) {
  std::vector<double> attract(w.size(), 0.0);
  if (kappa != 0.0) {
    for (std::size_t j = 0; j < w.size(); ++j) {
      attract[j] = attractor_s(w[j], theta) * w[j] + attractor_g(w[j], theta);
    }
  }
  if (mu != 0.0) {
    for (std::size_t m = 0; m < frame.subbands(); ++m) {
      const double denom = frame.sq_norms[m] + delta;
      if (!(denom > 0.0)) continue;
      const double gain = mu * errs[m] / denom;
      const auto& x = frame.regressors[m];
      for (std::size_t j = 0; j < w.size(); ++j) w[j] += gain * x[j];
    }
  }
  if (kappa != 0.0) {
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= kappa * attract[j];
  }
}

// Strict convergence condition on the MSD recursion factor.
inline bool stability_check(double mu, std::size_t subbands, std::size_t taps,
                            double r, MsdCase which) {
  const double n_over_rl = static_cast<double>(subbands) / (r * static_cast<double>(taps));
  const double factor = which == MsdCase::known_variance
                            ? 1.0 + (mu * mu - 2.0 * mu) * n_over_rl
                            : 1.0 - 2.0 * mu * n_over_rl;
  return std::abs(factor) < 1.0;
}

enum class ResetDecision { none, reset };

// Trimmed-mean change detector on normalized fullband errors |e| / (||x|| + eps).
class ResetDetector {
 public:
  explicit ResetDetector(ResetConfig cfg = {}) : cfg_(cfg), window_(cfg.vt, 0.0) {
    cfg_.validate();
  }

  // Once per fullband sample.
  void push(double abs_error, double regressor_norm) {
    window_[next_] = std::abs(abs_error) / (regressor_norm + cfg_.epsilon);
    next_ = (next_ + 1) % cfg_.vt;
    if (filled_ < cfg_.vt) ++filled_;
  }

  // Check instants are every ceil(vt / N) decimated steps with a full window.
  std::size_t check_period(std::size_t subbands) const {
    return (cfg_.vt + subbands - 1) / subbands;
  }

  bool is_check_instant(std::uint64_t tau, std::size_t subbands) const {
    return filled_ == cfg_.vt && tau % check_period(subbands) == 0;
  }

  // Trimmed mean of the smallest vt - vd window entries.
  double trimmed_mean() const {
    std::vector<double> sorted(window_);
    const std::size_t keep = cfg_.vt - cfg_.vd;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                     sorted.end());
    std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep));
    double acc = 0.0;
    for (std::size_t i = 0; i < keep; ++i) acc += sorted[i];
    return acc / static_cast<double>(keep);
  }

  ResetDecision check(double mu, std::uint64_t tau, std::size_t subbands) {
    if (!is_check_instant(tau, subbands)) return ResetDecision::none;
    if (!(mu > 0.0)) return ResetDecision::none;  // z_old carried forward
    const double z_new = trimmed_mean();
    const double change = (z_new - z_old_) / std::sqrt(mu);
    const bool fire = armed_ && change > cfg_.phi;
    last_change_ = change;
    z_old_ = z_new;
    armed_ = true;
    return fire ? ResetDecision::reset : ResetDecision::none;
  }

  bool armed() const { return armed_; }
  double z_old() const { return z_old_; }
  double last_change() const { return last_change_; }
  const ResetConfig& config() const { return cfg_; }

  // Test hook: preload the baseline statistic.
  void set_baseline(double z_old) {
    z_old_ = z_old;
    armed_ = true;
  }

 private:
  ResetConfig cfg_;
  std::vector<double> window_;
  std::size_t next_ = 0;
  std::size_t filled_ = 0;
  double z_old_ = 0.0;
  double last_change_ = 0.0;
  bool armed_ = false;
};

// Everything computed for one instant before the state is modified.
struct StepPlan {
  std::vector<double> errors;
  std::vector<double> v;       // v_m(tau)
  double attractor_energy = 0.0;  // ||S w + G||^2 at the incoming w
  double mu = 0.0;
  double kappa = 0.0;
};

inline StepPlan plan_step(const FilterState& state, const SubbandFrame& frame,
                          const AlgoConfig& cfg) {
  const std::size_t n = frame.subbands();
  const std::size_t taps = state.w.size();
  if (state.v.size() != n) {
    throw ParameterError("state has " + std::to_string(state.v.size()) +
                             " subbands, frame has " + std::to_string(n),
                         "subbands");
  }
  StepPlan plan;
  plan.errors = subband_errors(frame, state.w);
  plan.v = state.v;
  if (cfg.msd_case() == MsdCase::unknown_variance) {
    for (std::size_t m = 0; m < n; ++m) {
      plan.v[m] = v_update(state.v[m], cfg.gamma, plan.errors[m], frame.sq_norms[m],
                           cfg.delta);
    }
  }
  const auto dec = attractor_decomposition<double>(state.w, cfg.theta);
  plan.attractor_energy = sum_of_squares(attractor_vector<double>(dec, state.w));

  plan.mu = std::visit(
      [&](const auto& mode) -> double {
        using Mode = std::decay_t<decltype(mode)>;
        if constexpr (std::is_same_v<Mode, FixedStep>) {
          return mode.mu;
        } else if constexpr (std::is_same_v<Mode, VssKnownVariance>) {
          return step_size_known_variance(state.p, frame, cfg, state.alpha, n, taps);
        } else {
          return step_size_unknown_variance(state.p, plan.v, cfg, state.alpha, n, taps);
        }
      },
      cfg.mode);
  plan.kappa = plan.mu * cfg.rho;
  return plan;
}

inline void commit_step(FilterState& state, const StepPlan& plan,
                        const SubbandFrame& frame, const AlgoConfig& cfg,
                        ResetDecision decision) {
  const std::size_t n = frame.subbands();
  const std::size_t taps = state.w.size();
  state.mu = plan.mu;
  if (decision == ResetDecision::reset) {
    state.reinitialize();
  } else {
    weight_update(state.w, frame, plan.errors, plan.mu, plan.kappa, cfg.theta, cfg.delta);
    state.v = plan.v;
    state.p = msd_update(state.p, plan.mu, plan.kappa, frame, state.alpha, state.v, cfg,
                         n, taps);
    state.alpha = cfg.gamma * state.alpha + (1.0 - cfg.gamma) * plan.attractor_energy;
  }
  ++state.tau;
}

// One decimated iteration with an externally supplied reset decision.
inline void adapt_step(FilterState& state, const SubbandFrame& frame,
                       const AlgoConfig& cfg,
                       ResetDecision decision = ResetDecision::none) {
  commit_step(state, plan_step(state, frame, cfg), frame, cfg, decision);
}

// A complete filter instance: state, configuration and (optionally) the
// reset detector, which is fed fullband errors between frames.
class SubbandFilter {
 public:
  SubbandFilter(AlgoConfig cfg, std::size_t taps, std::size_t subbands)
      : cfg_(std::move(cfg)),
        subbands_(subbands),
        state_(FilterState::initial(taps, subbands)) {
    if (taps < 1) throw ParameterError("tap count must be >= 1", "taps");
    if (subbands < 1) throw ParameterError("subband count must be >= 1", "subbands");
    cfg_.validate();
    if (cfg_.reset) detector_.emplace(*cfg_.reset);
  }

  // Fullband error d(t) - x(t)^T w and ||x(t)||, once per input sample.
  void observe_fullband(double error, double regressor_norm) {
    if (detector_) detector_->push(error, regressor_norm);
  }

  // Returns true when the reset fired on this instant.
  bool adapt(const SubbandFrame& frame) {
    const StepPlan plan = plan_step(state_, frame, cfg_);
    ResetDecision decision = ResetDecision::none;
    if (detector_) decision = detector_->check(plan.mu, state_.tau, subbands_);
    commit_step(state_, plan, frame, cfg_, decision);
    return decision == ResetDecision::reset;
  }

  const FilterState& state() const { return state_; }
  std::span<const double> weights() const { return state_.w; }
  const AlgoConfig& config() const { return cfg_; }
  void set_delta(double delta) { cfg_.delta = delta; }
  const std::optional<ResetDetector>& detector() const { return detector_; }

 private:
  AlgoConfig cfg_;
  std::size_t subbands_;
  FilterState state_;
  std::optional<ResetDetector> detector_;
};

}  // namespace l0nsaf

#endif  // L0NSAF_ENGINE_HPP_
