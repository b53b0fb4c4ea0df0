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

// Trial and Monte-Carlo orchestration: builds the stimuli for one trial,
// streams them through analysis + adaptive filter for every configured
// algorithm, records normalized misalignment per decimated iteration, and
// reduces trials into ensemble learning curves.

#ifndef L0NSAF_HARNESS_HPP_
#define L0NSAF_HARNESS_HPP_

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "l0nsaf/engine.hpp"
#include "l0nsaf/error.hpp"
#include "l0nsaf/filterbank.hpp"
#include "l0nsaf/signals.hpp"

namespace l0nsaf {

inline constexpr double kMisalignmentFloorDb = -320.0;

inline double ratio_to_db(double ratio) {
  return ratio > 0.0 ? std::max(kMisalignmentFloorDb, 10.0 * std::log10(ratio))
                     : kMisalignmentFloorDb;
}

// ||w0 - w||^2 / ||w0||^2 (linear).
inline double misalignment_ratio(std::span<const double> w0, std::span<const double> w,
                                 double sign = 1.0) {
  if (w0.size() != w.size()) throw ParameterError("system length mismatch", "taps");
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < w0.size(); ++j) {
    const double diff = sign * w0[j] - w[j];
    num += diff * diff;
    den += w0[j] * w0[j];
  }
  if (!(den > 0.0)) throw ParameterError("true system has zero norm", "system");
  return num / den;
}

// 10 log10(||w0 - w||^2 / ||w0||^2), floored at -320 dB.
inline double misalignment_db(std::span<const double> w0, std::span<const double> w) {
  return ratio_to_db(misalignment_ratio(w0, w));
}

enum class InputKind { white, ar1, ar2, speech };
enum class Scenario { sysid, aec };

struct SignalSpec {
  Scenario scenario = Scenario::sysid;
  std::size_t taps = 100;
  std::size_t nonzeros = 4;
  std::size_t subbands = 4;
  std::size_t bank_length = 33;
  InputKind input = InputKind::ar1;
  double snr_db = 30.0;
  std::size_t samples = 80000;
  bool unit_norm_system = false;
  // delta = mean(x^2) of the input, overriding every algorithm's delta.
  bool delta_from_input_power = false;
  // Near-end power relative to the echo power, on the double-talk interval.
  double nearend_level_db = 0.0;
  std::string ir_file;
  std::string farend_file;
  std::string nearend_file;

  bool operator==(const SignalSpec&) const = default;
};

// Event times as fractions of the run length.
struct EventSpec {
  std::optional<double> flip_at;
  std::optional<double> snr_change_at;
  double snr_change_db = 20.0;
  std::optional<std::pair<double, double>> doubletalk;

  Schedule to_schedule(std::size_t total) const {
    auto at = [total](double f) {
      return static_cast<std::size_t>(std::llround(f * static_cast<double>(total)));
    };
    Schedule s;
    s.total_samples = total;
    if (flip_at) s.flip_at = at(*flip_at);
    if (snr_change_at) s.snr_change = SnrChange{at(*snr_change_at), snr_change_db};
    if (doubletalk) s.doubletalk = DoubleTalk{at(doubletalk->first), at(doubletalk->second)};
    return s;
  }

  bool operator==(const EventSpec&) const = default;
};

struct AlgorithmSpec {
  std::string name;
  AlgoConfig config;
  // Fill the known noise variance from each trial's calibrated sigma_eta^2.
  // A fixed-step tracker is filled only when its variance is engaged.
  bool oracle_noise_variance = true;

  bool operator==(const AlgorithmSpec&) const = default;
};

struct TrialSpec {
  std::vector<AlgorithmSpec> algorithms;
  SignalSpec signal;
  EventSpec events;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::size_t parallel = 1;

  void validate() const {
    if (algorithms.empty()) throw ParameterError("no algorithms configured", "algorithm");
    if (trials < 1) throw ParameterError("trials must be >= 1", "trials");
    if (signal.subbands < 1) throw ParameterError("subbands must be >= 1", "subbands");
    if (signal.samples < signal.subbands) throw ParameterError("run shorter than one frame", "samples");
    for (const auto& a : algorithms) {
      if (a.name.empty() || a.name.find_first_of(", \t\n") != std::string::npos) {
        throw ParameterError("algorithm name '" + a.name + "' must be non-empty without commas or spaces",
                             "algorithm");
      }
      a.config.validate();
    }
    auto fraction = [](std::optional<double> f, const char* field) {
      if (f && !(*f >= 0.0 && *f < 1.0)) throw ParameterError("event time must lie in [0, 1)", field);
    };
    fraction(events.flip_at, "flip_at");
    fraction(events.snr_change_at, "snr_change_at");
    if (events.doubletalk) {
      const auto [s, e] = *events.doubletalk;
      if (!(s >= 0.0 && s < e && e <= 1.0)) {
        throw ParameterError("double-talk interval must satisfy 0 <= start < end <= 1", "doubletalk");
      }
    }
  }

  bool operator==(const TrialSpec&) const = default;
};

struct AlgoTrial {
  std::string name;
  std::vector<double> misalignment;  // linear ratio per decimated iteration
  std::vector<double> mu;
  std::vector<double> p;
  std::vector<std::size_t> reset_samples;  // fullband sample index of each reset
};

struct TrialTraces {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  NoiseSpec noise;
  double system_energy = 0.0;  // ||w0||^2
  std::size_t flip_sample = 0;  // 0 when there is no flip
  std::vector<AlgoTrial> algorithms;
};

// Stimuli of one trial.
struct TrialSignals {
  std::vector<double> x;
  std::vector<double> d;
  std::vector<double> w0;
  NoiseSpec noise;
  Schedule schedule;
  double input_power = 0.0;
};

namespace detail {

inline std::vector<double> file_samples(const std::string& path, std::size_t n,
                                        const char* field) {
  auto audio = load_audio(path);
  if (audio.samples.size() < n) {
    throw ParameterError("'" + path + "' has " + std::to_string(audio.samples.size()) +
                             " samples, run needs " + std::to_string(n),
                         field);
  }
  audio.samples.resize(n);
  return std::move(audio.samples);
}

}  // namespace detail

inline TrialSignals make_trial_signals(const TrialSpec& spec, std::size_t trial_index) {
  const SignalSpec& sig = spec.signal;
  const std::uint64_t seed = spec.seed + trial_index;
  const std::size_t n = sig.samples;
  TrialSignals out;

  if (!sig.farend_file.empty()) {
    out.x = detail::file_samples(sig.farend_file, n, "farend_file");
  } else if (sig.scenario == Scenario::aec || sig.input == InputKind::speech) {
    out.x = pseudo_speech(n, seed, Stream::far_end);
  } else {
    switch (sig.input) {
      case InputKind::white: out.x = gen_white(n, seed); break;
      case InputKind::ar1: out.x = gen_ar1(n, seed); break;
      case InputKind::ar2: out.x = gen_ar2(n, seed); break;
      case InputKind::speech: break;
    }
  }

  if (!sig.ir_file.empty()) {
    out.w0 = load_ir(sig.ir_file).coeffs;
  } else if (sig.scenario == Scenario::aec) {
    out.w0 = synthetic_echo_path(sig.taps, seed).coeffs;
  } else {
    out.w0 = gen_sparse_system(sig.taps, sig.nonzeros, seed).coeffs;
  }
  if (out.w0.size() != sig.taps) {
    throw ParameterError("system has " + std::to_string(out.w0.size()) +
                             " taps but taps = " + std::to_string(sig.taps),
                         "taps");
  }
  if (sig.unit_norm_system) {
    const double norm = std::sqrt(sum_of_squares(out.w0));
    if (!(norm > 0.0)) throw ParameterError("true system has zero norm", "system");
    for (double& c : out.w0) c /= norm;
  }

  out.noise = calibrate_noise(out.x, out.w0, sig.snr_db);
  const auto eta = gen_noise(n, out.noise, seed);
  out.schedule = spec.events.to_schedule(n);
  out.schedule.validate();

  std::vector<double> near_end;
  if (out.schedule.doubletalk) {
    near_end = !sig.nearend_file.empty()
                   ? detail::file_samples(sig.nearend_file, n, "nearend_file")
                   : pseudo_speech(n, seed, Stream::near_end);
    const auto& dt = *out.schedule.doubletalk;
    const auto y = clean_output(out.x, out.w0);
    const std::span<const double> window(near_end.data() + dt.start, dt.end - dt.start);
    const double near_power = mean_square(window);
    const double echo_power = mean_square(y);
    if (near_power > 0.0) {
      const double scale =
          std::sqrt(echo_power * std::pow(10.0, sig.nearend_level_db / 10.0) / near_power);
      for (double& v : near_end) v *= scale;
    }
  }
  out.d = synthesize_desired(out.x, out.w0, eta, out.noise, out.schedule, near_end);
  out.input_power = mean_square(out.x);
  return out;
}

// Streams one algorithm over prepared signals.
inline AlgoTrial run_algorithm(const AlgorithmSpec& algo, const TrialSignals& sig,
                               const FilterBank& bank, const SignalSpec& signal_spec) {
  AlgoConfig cfg = algo.config;
  if (algo.oracle_noise_variance) {
    if (auto* known = std::get_if<VssKnownVariance>(&cfg.mode)) {
      known->noise_variance = sig.noise.sigma_eta_sq;
    } else if (auto* fixed = std::get_if<FixedStep>(&cfg.mode);
               fixed && fixed->tracker_noise_variance) {
      fixed->tracker_noise_variance = sig.noise.sigma_eta_sq;
    }
  }
  if (signal_spec.delta_from_input_power) cfg.delta = sig.input_power;

  const std::size_t taps = sig.w0.size();
  const std::size_t n = bank.n_subbands;
  AnalysisState analysis(bank, taps);
  SubbandFilter filter(cfg, taps, n);
  const bool feed_reset = cfg.reset.has_value();

  AlgoTrial out;
  out.name = algo.name;
  const std::size_t frames = sig.x.size() / n;
  out.misalignment.reserve(frames);
  out.mu.reserve(frames);
  out.p.reserve(frames);
  for (std::size_t t = 0; t < sig.x.size(); ++t) {
    auto frame = analysis.push(sig.x[t], sig.d[t]);
    if (feed_reset) {
      const auto reg = analysis.fullband_regressor();
      const double e = sig.d[t] - dot(reg, filter.weights());
      filter.observe_fullband(e, std::sqrt(sum_of_squares(reg)));
    }
    if (!frame) continue;
    if (filter.adapt(*frame)) out.reset_samples.push_back(t);
    out.misalignment.push_back(
        misalignment_ratio(sig.w0, filter.weights(), sig.schedule.system_sign(t)));
    out.mu.push_back(filter.state().mu);
    out.p.push_back(filter.state().p);
  }
  return out;
}

inline FilterBank bank_for(const SignalSpec& sig) {
  return make_filter_bank(sig.subbands, sig.subbands == 1 ? 1 : sig.bank_length);
}

// All algorithms of one trial; identical output for identical (spec, index).
inline TrialTraces run_trial(const TrialSpec& spec, std::size_t trial_index) {
  const FilterBank bank = bank_for(spec.signal);
  const TrialSignals sig = make_trial_signals(spec, trial_index);
  TrialTraces out;
  out.trial = trial_index;
  out.seed = spec.seed + trial_index;
  out.noise = sig.noise;
  out.system_energy = sum_of_squares(sig.w0);
  out.flip_sample = sig.schedule.flip_at.value_or(0);
  for (const auto& algo : spec.algorithms) {
    out.algorithms.push_back(run_algorithm(algo, sig, bank, spec.signal));
  }
  return out;
}

struct AlgoTrace {
  std::string name;
  std::vector<double> misalignment_db;
  std::vector<double> mu;
  std::vector<double> p;
  std::vector<double> msd;  // mean ||w0 - w||^2, not emitted to CSV
};

struct ExperimentMeta {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::size_t samples = 0;
  std::size_t subbands = 0;
  double wall_seconds = 0.0;
  double mean_noise_variance = 0.0;
  std::vector<std::vector<std::size_t>> reset_samples;  // [algorithm][event]
};

struct ExperimentResult {
  std::vector<AlgoTrace> traces;
  ExperimentMeta meta;
  std::vector<TrialTraces> trials;  // kept when requested
};

// Runs trials on `parallel` worker threads and averages in trial order.
inline std::vector<TrialTraces> run_trials(const TrialSpec& spec) {
  spec.validate();
  std::vector<TrialTraces> results(spec.trials);
  const std::size_t workers = std::max<std::size_t>(1, std::min(spec.parallel, spec.trials));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < spec.trials; i = next++) {
      try {
        results[i] = run_trial(spec, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

// Ensemble average over trials of the linear misalignment, then dB.
inline ExperimentResult average_trials(std::vector<TrialTraces> trials, bool keep_trials) {
  ExperimentResult result;
  if (trials.empty()) return result;
  const std::size_t count = trials.size();
  const std::size_t algos = trials[0].algorithms.size();
  double noise_acc = 0.0;
  result.meta.reset_samples.resize(algos);
  for (std::size_t a = 0; a < algos; ++a) {
    const std::size_t len = trials[0].algorithms[a].misalignment.size();
    std::vector<double> mis(len, 0.0), mu(len, 0.0), p(len, 0.0), msd(len, 0.0);
    for (const auto& tr : trials) {
      const auto& at = tr.algorithms[a];
      for (std::size_t k = 0; k < len; ++k) {
        mis[k] += at.misalignment[k];
        mu[k] += at.mu[k];
        p[k] += at.p[k];
        msd[k] += at.misalignment[k] * tr.system_energy;
      }
      for (auto s : at.reset_samples) result.meta.reset_samples[a].push_back(s);
    }
    AlgoTrace trace;
    trace.name = trials[0].algorithms[a].name;
    trace.misalignment_db.resize(len);
    for (std::size_t k = 0; k < len; ++k) {
      trace.misalignment_db[k] = ratio_to_db(mis[k] / static_cast<double>(count));
      mu[k] /= static_cast<double>(count);
      p[k] /= static_cast<double>(count);
      msd[k] /= static_cast<double>(count);
    }
    trace.mu = std::move(mu);
    trace.p = std::move(p);
    trace.msd = std::move(msd);
    result.traces.push_back(std::move(trace));
  }
  for (const auto& tr : trials) noise_acc += tr.noise.sigma_eta_sq;
  result.meta.mean_noise_variance = noise_acc / static_cast<double>(count);
  if (keep_trials) result.trials = std::move(trials);
  return result;
}

inline ExperimentResult run_monte_carlo(const TrialSpec& spec, bool keep_trials = false) {
  const auto start = std::chrono::steady_clock::now();
  auto result = average_trials(run_trials(spec), keep_trials);
  result.meta.seed = spec.seed;
  result.meta.trials = spec.trials;
  result.meta.samples = spec.signal.samples;
  result.meta.subbands = spec.signal.subbands;
  result.meta.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------
// Output.

namespace detail {

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.precision(17);
  return out;
}

inline void check_written(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline bool has_mu_p(const ExperimentResult& r) {
  for (const auto& t : r.traces) {
    if (t.mu.size() != t.misalignment_db.size() || t.p.size() != t.misalignment_db.size()) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Header `iter,algorithm,misalignment_db[,mu,p]`; one row per iteration per
// algorithm, 17 significant digits.
inline void write_csv(std::ostream& out, const ExperimentResult& result) {
  const auto old = out.precision(17);
  const bool extra = detail::has_mu_p(result);
  out << "iter,algorithm,misalignment_db" << (extra ? ",mu,p" : "") << '\n';
  for (const auto& t : result.traces) {
    for (std::size_t k = 0; k < t.misalignment_db.size(); ++k) {
      out << k << ',' << t.name << ',' << t.misalignment_db[k];
      if (extra) out << ',' << t.mu[k] << ',' << t.p[k];
      out << '\n';
    }
  }
  out.precision(old);
}

inline void emit_csv(const ExperimentResult& result, const std::string& path) {
  auto out = detail::open_for_write(path);
  write_csv(out, result);
  detail::check_written(out, path);
}

// Per-trial dump: `trial,iter,algorithm,misalignment_db,mu,p`.
inline void emit_trial_csv(const std::vector<TrialTraces>& trials, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "trial,iter,algorithm,misalignment_db,mu,p\n";
  for (const auto& tr : trials) {
    for (const auto& a : tr.algorithms) {
      for (std::size_t k = 0; k < a.misalignment.size(); ++k) {
        out << tr.trial << ',' << k << ',' << a.name << ',' << ratio_to_db(a.misalignment[k])
            << ',' << a.mu[k] << ',' << a.p[k] << '\n';
      }
    }
  }
  detail::check_written(out, path);
}

// Whitespace-separated columns for gnuplot and friends: iter then one
// misalignment column per algorithm.
inline void emit_plot_data(const ExperimentResult& result, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << "# iter";
  std::size_t len = 0;
  for (const auto& t : result.traces) {
    out << ' ' << t.name;
    len = std::max(len, t.misalignment_db.size());
  }
  out << '\n';
  for (std::size_t k = 0; k < len; ++k) {
    out << k;
    for (const auto& t : result.traces) {
      out << ' ' << (k < t.misalignment_db.size() ? t.misalignment_db[k] : std::nan(""));
    }
    out << '\n';
  }
  detail::check_written(out, path);
}

inline ExperimentResult read_csv(std::istream& in) {
  ExperimentResult result;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("CSV: empty input");
  bool extra = false;
  if (line == "iter,algorithm,misalignment_db,mu,p") {
    extra = true;
  } else if (line != "iter,algorithm,misalignment_db") {
    throw FormatError("CSV line 1: unexpected header '" + line + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != (extra ? 5u : 3u)) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": wrong column count");
    }
    AlgoTrace* trace = nullptr;
    for (auto& t : result.traces) {
      if (t.name == cells[1]) trace = &t;
    }
    if (!trace) {
      result.traces.push_back({});
      trace = &result.traces.back();
      trace->name = cells[1];
    }
    try {
      if (std::stoull(cells[0]) != trace->misalignment_db.size()) {
        throw FormatError("CSV line " + std::to_string(line_no) + ": iterations out of order");
      }
      trace->misalignment_db.push_back(std::stod(cells[2]));
      if (extra) {
        trace->mu.push_back(std::stod(cells[3]));
        trace->p.push_back(std::stod(cells[4]));
      }
    } catch (const std::logic_error&) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": bad number");
    }
  }
  return result;
}

inline ExperimentResult read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_csv(in);
}

// ---------------------------------------------------------------------------
// Trace statistics used by reports and checks.

// Mean of a dB trace over [begin, end) computed on linear values.
inline double mean_db(std::span<const double> trace_db, std::size_t begin, std::size_t end) {
  end = std::min(end, trace_db.size());
  if (begin >= end) return std::nan("");
  double acc = 0.0;
  for (std::size_t k = begin; k < end; ++k) acc += std::pow(10.0, trace_db[k] / 10.0);
  return 10.0 * std::log10(acc / static_cast<double>(end - begin));
}

// ---------------------------------------------------------------------------
// Bound check: fixed-step filter with the known-variance tracker, comparing
// the ensemble MSD with the tracked upper bound p(tau).

struct MsdBoundSpec {
  std::size_t taps = 32;
  std::size_t subbands = 4;
  std::size_t bank_length = 33;
  InputKind input = InputKind::white;
  double snr_db = 30.0;
  double mu = 0.5;
  double rho = 0.0;
  double theta = 5.0;
  double r_scale = 1.0;
  std::size_t samples = 8000;
  std::size_t trials = 200;
  std::size_t skip = 40;  // iterations excluded from the count
  std::uint64_t seed = 1;
  std::size_t parallel = 1;
};

struct MsdBoundReport {
  std::vector<double> empirical;  // ensemble mean of ||w0 - w||^2
  std::vector<double> bound;      // ensemble mean of p(tau)
  std::size_t checked = 0;
  std::size_t satisfied = 0;
  double wall_seconds = 0.0;

  double fraction() const {
    return checked ? static_cast<double>(satisfied) / static_cast<double>(checked) : 0.0;
  }
};

inline TrialSpec msd_bound_trial_spec(const MsdBoundSpec& b) {
  TrialSpec spec;
  spec.signal.taps = b.taps;
  spec.signal.nonzeros = std::min<std::size_t>(4, b.taps);
  spec.signal.subbands = b.subbands;
  spec.signal.bank_length = b.bank_length;
  spec.signal.input = b.input;
  spec.signal.snr_db = b.snr_db;
  spec.signal.samples = b.samples;
  // p(0) = 1 then equals the initial deviation ||w0||^2.
  spec.signal.unit_norm_system = true;
  AlgorithmSpec algo;
  algo.name = "fixed-step";
  algo.config.mode = FixedStep{b.mu, 0.0};
  algo.config.rho = b.rho;
  algo.config.theta = b.theta;
  algo.config.r_scale = b.r_scale;
  algo.config.mu_max = std::max(1.0, b.mu);
  spec.algorithms.push_back(algo);
  spec.trials = b.trials;
  spec.seed = b.seed;
  spec.parallel = b.parallel;
  return spec;
}

inline MsdBoundReport verify_msd_bound(const MsdBoundSpec& b) {
  const auto result = run_monte_carlo(msd_bound_trial_spec(b));
  MsdBoundReport report;
  report.empirical = result.traces.at(0).msd;
  report.bound = result.traces.at(0).p;
  report.wall_seconds = result.meta.wall_seconds;
  // Trace index k holds the state after iteration tau = k + 1.
  for (std::size_t k = b.skip; k < report.empirical.size(); ++k) {
    ++report.checked;
    if (report.empirical[k] <= report.bound[k]) ++report.satisfied;
  }
  return report;
}

}  // namespace l0nsaf

#endif  // L0NSAF_HARNESS_HPP_
