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

// Command-line front end. `parse_and_run` is the whole program; the
// executable in tools/ only forwards argv and the standard streams.
//
// Exit codes: 0 success, 1 a verification subcommand ran but its check
// failed, 2 usage error, 3 invalid configuration, 4 I/O failure.

#ifndef L0NSAF_CLI_HPP_
#define L0NSAF_CLI_HPP_

#include <cstdint>
#include <exception>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "l0nsaf/config.hpp"
#include "l0nsaf/error.hpp"
#include "l0nsaf/filterbank.hpp"
#include "l0nsaf/harness.hpp"

namespace l0nsaf {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitValidation = 3,
  kExitIo = 4,
};

namespace detail {

struct RunOptions {
  std::string config;
  std::string preset;
  std::string out;
  std::string trial_out;
  std::string plot_out;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> parallel;
  bool dump_config = false;
};

inline void add_run_options(CLI::App& cmd, RunOptions& o) {
  auto* config = cmd.add_option("--config", o.config, "Experiment config file");
  auto* preset = cmd.add_option("--preset", o.preset, "Built-in preset (fig7a ... fig15)");
  config->excludes(preset);
  cmd.add_option("--set", o.overrides, "Override key=value or algorithm.key=value (repeatable)");
  cmd.add_option("--out", o.out, "Ensemble CSV output path");
  cmd.add_option("--trial-out", o.trial_out, "Per-trial CSV output path");
  cmd.add_option("--plot-out", o.plot_out, "Whitespace-separated plot data path");
  cmd.add_option("--seed", o.seed, "Base seed; trial i uses seed + i");
  cmd.add_option("--trials", o.trials, "Monte-Carlo trial count");
  cmd.add_option("--parallel", o.parallel, "Worker threads");
  cmd.add_flag("--dump-config", o.dump_config, "Print the effective config and exit");
}

inline TrialSpec resolve_spec(const RunOptions& o, Scenario scenario) {
  RawConfig raw;
  if (!o.config.empty()) {
    raw = load_raw_config(o.config);
  } else if (!o.preset.empty()) {
    raw = preset_raw(o.preset);
  } else {
    throw ParameterError("one of --config or --preset is required", "config");
  }
  const std::string wanted = scenario == Scenario::aec ? "aec" : "sysid";
  if (const auto it = raw.globals.find("scenario");
      it != raw.globals.end() && it->second.value != wanted) {
    throw ParameterError("config describes scenario '" + it->second.value + "' but the " +
                             wanted + " subcommand was used",
                         "scenario");
  }
  raw.globals["scenario"] = {wanted, 0};
  for (const auto& assignment : o.overrides) apply_override(raw, assignment);
  if (o.seed) raw.globals["seed"] = {std::to_string(*o.seed), 0};
  if (o.trials) raw.globals["trials"] = {std::to_string(*o.trials), 0};
  if (o.parallel) raw.globals["parallel"] = {std::to_string(*o.parallel), 0};
  return build_spec(raw);
}

inline int run_experiment(const RunOptions& o, Scenario scenario, std::ostream& out) {
  const TrialSpec spec = resolve_spec(o, scenario);
  if (o.dump_config) {
    out << serialize_config(spec);
    return kExitOk;
  }
  const bool keep = !o.trial_out.empty();
  const ExperimentResult result = run_monte_carlo(spec, keep);
  if (!o.out.empty()) emit_csv(result, o.out);
  if (!o.plot_out.empty()) emit_plot_data(result, o.plot_out);
  if (keep) emit_trial_csv(result.trials, o.trial_out);

  const std::size_t frames = result.traces.empty() ? 0 : result.traces[0].misalignment_db.size();
  out << (scenario == Scenario::aec ? "aec" : "sysid") << ": " << spec.trials << " trial(s), "
      << spec.signal.samples << " samples, N = " << spec.signal.subbands << ", L = "
      << spec.signal.taps << ", seed " << spec.seed << '\n';
  out << std::fixed << std::setprecision(2);
  const std::size_t tail = std::max<std::size_t>(1, frames / 10);
  for (std::size_t a = 0; a < result.traces.size(); ++a) {
    const auto& t = result.traces[a];
    out << "  " << std::left << std::setw(16) << t.name << std::right
        << " final misalignment " << std::setw(8) << mean_db(t.misalignment_db, frames - tail, frames)
        << " dB, resets " << result.meta.reset_samples[a].size() << '\n';
  }
  out << "  wall time " << std::setprecision(3) << result.meta.wall_seconds << " s\n";
  out.unsetf(std::ios::floatfield);
  if (!o.out.empty()) out << "  wrote " << o.out << '\n';
  return kExitOk;
}

struct BankOptions {
  std::size_t subbands = 4;
  std::size_t length = 33;
  std::string bank_file;
  std::string out;
  std::size_t points = 4096;
};

inline int run_bankinfo(const BankOptions& o, std::ostream& out) {
  const FilterBank bank =
      o.bank_file.empty() ? make_filter_bank(o.subbands, o.length) : read_bank(o.bank_file);
  const auto diag = diagnose(bank, o.points);
  out << "bank: N = " << bank.n_subbands << ", M = " << bank.length() << '\n';
  if (bank.prototype) out << "  prototype cutoff        " << bank.prototype->cutoff << " rad\n";
  out << std::fixed << std::setprecision(3)
      << "  power ripple            " << diag.power_ripple_db << " dB\n"
      << "  worst subband stopband  " << diag.worst_subband_stopband_db << " dB\n";
  if (bank.prototype) {
    out << "  prototype stopband      " << diag.prototype_stopband_db << " dB\n"
        << "  prototype passband ripple " << diag.prototype_passband_ripple_db << " dB\n";
  }
  out.unsetf(std::ios::floatfield);
  if (!o.out.empty()) {
    write_bank(bank, o.out);
    out << "  wrote " << o.out << '\n';
  }
  return kExitOk;
}

struct MsdOptions {
  MsdBoundSpec spec;
  std::string input = "white";
  double required = 0.95;
  std::string out;
};

inline int run_msd_verify(MsdOptions o, std::ostream& out) {
  if (o.input == "white") o.spec.input = InputKind::white;
  else if (o.input == "ar1") o.spec.input = InputKind::ar1;
  else if (o.input == "ar2") o.spec.input = InputKind::ar2;
  else throw ParameterError("input must be white, ar1 or ar2", "input");
  if (o.spec.subbands == 1) o.spec.bank_length = 1;
  const auto report = verify_msd_bound(o.spec);
  if (!o.out.empty()) {
    auto file = open_for_write(o.out);
    file << "iter,empirical_msd,bound\n";
    for (std::size_t k = 0; k < report.empirical.size(); ++k) {
      file << k << ',' << report.empirical[k] << ',' << report.bound[k] << '\n';
    }
    check_written(file, o.out);
  }
  const bool ok = report.fraction() >= o.required;
  out << "msd-verify: " << report.satisfied << " of " << report.checked
      << " iterations with empirical MSD <= p (" << std::fixed << std::setprecision(1)
      << 100.0 * report.fraction() << "%, required " << 100.0 * o.required << "%) "
      << (ok ? "PASS" : "FAIL") << '\n';
  out.unsetf(std::ios::floatfield);
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace detail

inline int parse_and_run(int argc, const char* const* argv, std::ostream& out,
                         std::ostream& err) {
  CLI::App app{"Sparsity-aware variable step-size subband adaptive filter experiments",
               "l0nsaf"};
  app.require_subcommand(1);

  detail::RunOptions sysid_opts, aec_opts;
  auto* sysid = app.add_subcommand("sysid", "Sparse system identification experiment");
  detail::add_run_options(*sysid, sysid_opts);
  auto* aec = app.add_subcommand("aec", "Echo cancellation experiment (files or synthetic)");
  detail::add_run_options(*aec, aec_opts);

  detail::BankOptions bank_opts;
  auto* bankinfo = app.add_subcommand("bankinfo", "Analysis filter-bank diagnostics");
  bankinfo->add_option("--subbands", bank_opts.subbands, "Number of subbands N");
  bankinfo->add_option("--length", bank_opts.length, "Filter length M");
  bankinfo->add_option("--bank", bank_opts.bank_file, "Read the bank from a file instead");
  bankinfo->add_option("--out", bank_opts.out, "Write the bank coefficients");
  bankinfo->add_option("--points", bank_opts.points, "Frequency grid size");

  detail::MsdOptions msd_opts;
  auto* msd = app.add_subcommand("msd-verify", "Empirical MSD versus the tracked bound");
  auto& ms = msd_opts.spec;
  msd->add_option("--taps", ms.taps, "Filter length L");
  msd->add_option("--subbands", ms.subbands, "Number of subbands N");
  msd->add_option("--length", ms.bank_length, "Analysis filter length M");
  msd->add_option("--input", msd_opts.input, "white, ar1 or ar2");
  msd->add_option("--snr", ms.snr_db, "SNR in dB");
  msd->add_option("--mu", ms.mu, "Fixed step size");
  msd->add_option("--rho", ms.rho, "Sparsity penalty");
  msd->add_option("--theta", ms.theta, "Zero-attraction range parameter");
  msd->add_option("--r", ms.r_scale, "Correlation scaling r");
  msd->add_option("--samples", ms.samples, "Fullband samples per trial");
  msd->add_option("--trials", ms.trials, "Monte-Carlo trials");
  msd->add_option("--skip", ms.skip, "Iterations excluded from the count");
  msd->add_option("--required", msd_opts.required, "Required fraction");
  msd->add_option("--seed", ms.seed, "Base seed");
  msd->add_option("--parallel", ms.parallel, "Worker threads");
  msd->add_option("--out", msd_opts.out, "CSV of both curves");

  if (argc >= 2 && argv[1][0] != '-') {
    const std::string first = argv[1];
    bool known = false;
    for (const auto* sub : app.get_subcommands({})) known = known || sub->get_name() == first;
    if (!known) {
      err << "error: unknown subcommand '" << first << "'\n\n" << app.help();
      return kExitUsage;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*sysid) return detail::run_experiment(sysid_opts, Scenario::sysid, out);
    if (*aec) return detail::run_experiment(aec_opts, Scenario::aec, out);
    if (*bankinfo) return detail::run_bankinfo(bank_opts, out);
    if (*msd) return detail::run_msd_verify(msd_opts, out);
  } catch (const ParameterError& e) {
    err << "invalid " << e.field() << ": " << e.what() << '\n';
    return kExitValidation;
  } catch (const FormatError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace l0nsaf

#endif  // L0NSAF_CLI_HPP_
