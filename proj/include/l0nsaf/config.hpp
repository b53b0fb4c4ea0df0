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

// Text configuration for experiments.
//
// A config is a flat list of `key = value` lines. Global keys describe the
// signals, schedule and run; each `[algorithm NAME]` section describes one
// adaptive filter. `#` starts a comment. Example:
//
//   input = ar1
//   subbands = 4
//   flip_at = 0.5
//
//   [algorithm vss-known]
//   mode = vss_known
//   gamma = 0.99
//   rho = 4e-5
//
// Parsing happens in two stages. `parse_config_text` only splits the text
// into keyed entries (so overrides can be applied on the raw form), and
// `build_spec` turns entries into a validated TrialSpec.

#ifndef L0NSAF_CONFIG_HPP_
#define L0NSAF_CONFIG_HPP_

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "l0nsaf/engine.hpp"
#include "l0nsaf/error.hpp"
#include "l0nsaf/harness.hpp"

namespace l0nsaf {

struct ConfigEntry {
  std::string value;
  std::size_t line = 0;  // 0 for entries that came from an override
};

struct ConfigSection {
  std::string name;
  std::size_t line = 0;
  std::map<std::string, ConfigEntry> entries;
};

struct RawConfig {
  std::map<std::string, ConfigEntry> globals;
  std::vector<ConfigSection> algorithms;
};

inline const std::vector<std::string>& global_keys() {
  static const std::vector<std::string> keys = {
      "scenario",      "taps",          "nonzeros",      "subbands",
      "bank_length",   "input",         "snr_db",        "samples",
      "unit_norm_system", "delta_from_input_power", "nearend_level_db",
      "ir_file",       "farend_file",   "nearend_file",  "flip_at",
      "snr_change_at", "snr_change_db", "doubletalk",    "trials",
      "seed",          "parallel"};
  return keys;
}

inline const std::vector<std::string>& algorithm_keys() {
  static const std::vector<std::string> keys = {
      "mode",  "mu",    "rho",   "theta",    "gamma",    "r",
      "delta", "mu_max", "noise_variance", "reset", "reset_vt",
      "reset_vd", "reset_epsilon", "reset_phi"};
  return keys;
}

namespace detail {

inline bool contains(const std::vector<std::string>& keys, std::string_view key) {
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::string where(const ConfigEntry& e) {
  return e.line ? "config line " + std::to_string(e.line) : std::string("override");
}

inline double to_double(const ConfigEntry& e, const std::string& key) {
  const std::string_view text = e.value;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw FormatError(where(e) + ": '" + key + "' expects a number, got '" + e.value + "'");
  }
  return v;
}

inline std::uint64_t to_uint(const ConfigEntry& e, const std::string& key) {
  const std::string_view text = e.value;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw FormatError(where(e) + ": '" + key + "' expects a non-negative integer, got '" +
                      e.value + "'");
  }
  return v;
}

inline bool to_bool(const ConfigEntry& e, const std::string& key) {
  if (e.value == "true" || e.value == "on" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "off" || e.value == "no" || e.value == "0") return false;
  throw FormatError(where(e) + ": '" + key + "' expects on/off, got '" + e.value + "'");
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string format_fraction_pair(const std::pair<double, double>& p) {
  return format_double(p.first) + "," + format_double(p.second);
}

}  // namespace detail

inline RawConfig parse_config_text(std::istream& in) {
  RawConfig raw;
  std::map<std::string, ConfigEntry>* target = &raw.globals;
  std::string line;
  std::size_t line_no = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) {
      text = text.substr(0, hash);
    }
    text = detail::trim(text);
    if (text.empty()) continue;
    any = true;
    const std::string at = "config line " + std::to_string(line_no);

    if (text.front() == '[') {
      if (text.back() != ']') throw FormatError(at + ": unterminated section header");
      std::istringstream header(std::string(text.substr(1, text.size() - 2)));
      std::string kind, name, extra;
      header >> kind >> name;
      if (kind != "algorithm" || name.empty() || (header >> extra)) {
        throw FormatError(at + ": expected '[algorithm NAME]'");
      }
      for (const auto& s : raw.algorithms) {
        if (s.name == name) throw FormatError(at + ": duplicate algorithm '" + name + "'");
      }
      raw.algorithms.push_back({name, line_no, {}});
      target = &raw.algorithms.back().entries;
      continue;
    }

    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw FormatError(at + ": expected 'key = value'");
    const std::string key(detail::trim(text.substr(0, eq)));
    const std::string value(detail::trim(text.substr(eq + 1)));
    if (key.empty()) throw FormatError(at + ": missing key");
    if (value.empty()) throw FormatError(at + ": missing value for '" + key + "'");
    const bool in_section = target != &raw.globals;
    const auto& known = in_section ? algorithm_keys() : global_keys();
    if (!detail::contains(known, key)) {
      throw FormatError(at + ": unknown " + (in_section ? "algorithm" : "global") + " key '" +
                        key + "'");
    }
    if (target->count(key)) throw FormatError(at + ": duplicate key '" + key + "'");
    (*target)[key] = {value, line_no};
  }
  if (!any) throw FormatError("config is empty");
  return raw;
}

// `key=value` sets a global key or, for an algorithm key, that key in every
// section; `name.key=value` targets one algorithm.
inline void apply_override(RawConfig& raw, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ParameterError("override '" + assignment + "' is not key=value", "set");
  }
  std::string key(detail::trim(std::string_view(assignment).substr(0, eq)));
  const std::string value(detail::trim(std::string_view(assignment).substr(eq + 1)));
  if (value.empty()) throw ParameterError("override '" + assignment + "' has no value", key);

  std::string section;
  if (const auto dot = key.find('.'); dot != std::string::npos) {
    section = key.substr(0, dot);
    key = key.substr(dot + 1);
  }
  if (section.empty() && detail::contains(global_keys(), key)) {
    raw.globals[key] = {value, 0};
    return;
  }
  if (!detail::contains(algorithm_keys(), key)) {
    throw ParameterError("unknown configuration key '" + key + "'", key);
  }
  bool hit = false;
  for (auto& s : raw.algorithms) {
    if (section.empty() || s.name == section) {
      s.entries[key] = {value, 0};
      hit = true;
    }
  }
  if (!hit) {
    throw ParameterError(section.empty() ? "no algorithm sections to apply '" + key + "' to"
                                         : "no algorithm named '" + section + "'",
                         key);
  }
}

namespace detail {

inline AlgorithmSpec build_algorithm(const ConfigSection& section) {
  const auto& e = section.entries;
  auto get = [&](const char* key) -> const ConfigEntry* {
    const auto it = e.find(key);
    return it == e.end() ? nullptr : &it->second;
  };
  auto num = [&](const char* key, double fallback) {
    const auto* entry = get(key);
    return entry ? to_double(*entry, key) : fallback;
  };
  const std::string here = "algorithm '" + section.name + "'";

  AlgorithmSpec spec;
  spec.name = section.name;
  AlgoConfig& cfg = spec.config;
  const AlgoConfig defaults;
  cfg.rho = num("rho", defaults.rho);
  cfg.theta = num("theta", defaults.theta);
  cfg.gamma = num("gamma", defaults.gamma);
  cfg.r_scale = num("r", defaults.r_scale);
  cfg.delta = num("delta", defaults.delta);
  cfg.mu_max = num("mu_max", defaults.mu_max);

  const auto* mode = get("mode");
  if (!mode) throw ParameterError(here + " has no mode", "mode");
  const auto* noise = get("noise_variance");
  // noise_variance: "oracle" fills sigma_eta^2 per trial; a number pins it.
  auto noise_value = [&]() -> std::optional<double> {
    if (!noise || noise->value == "oracle") return std::nullopt;
    return to_double(*noise, "noise_variance");
  };

  if (mode->value == "fixed") {
    FixedStep fixed;
    const auto* mu = get("mu");
    if (!mu) throw ParameterError(here + " uses a fixed step but sets no mu", "mu");
    fixed.mu = to_double(*mu, "mu");
    if (noise && noise->value != "off") {
      const auto pinned = noise_value();
      fixed.tracker_noise_variance = pinned.value_or(0.0);
      spec.oracle_noise_variance = !pinned.has_value();
    }
    cfg.mode = fixed;
  } else if (mode->value == "vss_known") {
    if (get("mu")) throw ParameterError(here + ": mu only applies to mode = fixed", "mu");
    const auto pinned = noise_value();
    cfg.mode = VssKnownVariance{pinned.value_or(0.0)};
    spec.oracle_noise_variance = !pinned.has_value();
  } else if (mode->value == "vss_unknown") {
    if (get("mu")) throw ParameterError(here + ": mu only applies to mode = fixed", "mu");
    if (noise) {
      throw ParameterError(here + ": noise_variance does not apply to vss_unknown",
                           "noise_variance");
    }
    cfg.mode = VssUnknownVariance{};
  } else {
    throw FormatError(where(*mode) + ": mode must be fixed, vss_known or vss_unknown, got '" +
                      mode->value + "'");
  }

  const auto* reset = get("reset");
  const bool reset_on = reset && to_bool(*reset, "reset");
  if (reset_on) {
    // The window defaults scale with the filter length, filled in by build_spec.
    ResetConfig rc;
    rc.vt = 0;
    rc.vd = 0;
    for (auto [key, field] : {std::pair{"reset_vt", &rc.vt}, std::pair{"reset_vd", &rc.vd}}) {
      if (const auto* v = get(key)) {
        *field = to_uint(*v, key);
        if (*field == 0) throw ParameterError(here + ": " + key + " must be >= 1", key);
      }
    }
    rc.epsilon = num("reset_epsilon", rc.epsilon);
    rc.phi = num("reset_phi", rc.phi);
    cfg.reset = rc;
  } else {
    for (const char* key : {"reset_vt", "reset_vd", "reset_epsilon", "reset_phi"}) {
      if (get(key)) throw ParameterError(here + ": " + key + " needs reset = on", key);
    }
  }
  return spec;
}

}  // namespace detail

inline TrialSpec build_spec(const RawConfig& raw) {
  TrialSpec spec;
  SignalSpec& sig = spec.signal;
  const auto& g = raw.globals;
  auto get = [&](const char* key) -> const ConfigEntry* {
    const auto it = g.find(key);
    return it == g.end() ? nullptr : &it->second;
  };
  auto uint_or = [&](const char* key, std::uint64_t fallback) {
    const auto* e = get(key);
    return e ? detail::to_uint(*e, key) : fallback;
  };
  auto num_or = [&](const char* key, double fallback) {
    const auto* e = get(key);
    return e ? detail::to_double(*e, key) : fallback;
  };
  auto bool_or = [&](const char* key, bool fallback) {
    const auto* e = get(key);
    return e ? detail::to_bool(*e, key) : fallback;
  };
  auto string_or = [&](const char* key, const std::string& fallback) {
    const auto* e = get(key);
    return e ? e->value : fallback;
  };
  auto optional_fraction = [&](const char* key) -> std::optional<double> {
    const auto* e = get(key);
    if (!e || e->value == "none") return std::nullopt;
    return detail::to_double(*e, key);
  };

  if (const auto* e = get("scenario")) {
    if (e->value == "sysid") sig.scenario = Scenario::sysid;
    else if (e->value == "aec") sig.scenario = Scenario::aec;
    else throw FormatError(detail::where(*e) + ": scenario must be sysid or aec");
  }
  if (const auto* e = get("input")) {
    if (e->value == "white") sig.input = InputKind::white;
    else if (e->value == "ar1") sig.input = InputKind::ar1;
    else if (e->value == "ar2") sig.input = InputKind::ar2;
    else if (e->value == "speech") sig.input = InputKind::speech;
    else throw FormatError(detail::where(*e) + ": input must be white, ar1, ar2 or speech");
  }
  sig.taps = uint_or("taps", sig.taps);
  sig.nonzeros = uint_or("nonzeros", sig.nonzeros);
  sig.subbands = uint_or("subbands", sig.subbands);
  sig.bank_length = uint_or("bank_length", sig.bank_length);
  sig.snr_db = num_or("snr_db", sig.snr_db);
  sig.samples = uint_or("samples", sig.samples);
  sig.unit_norm_system = bool_or("unit_norm_system", sig.unit_norm_system);
  sig.delta_from_input_power = bool_or("delta_from_input_power", sig.delta_from_input_power);
  sig.nearend_level_db = num_or("nearend_level_db", sig.nearend_level_db);
  sig.ir_file = string_or("ir_file", sig.ir_file);
  sig.farend_file = string_or("farend_file", sig.farend_file);
  sig.nearend_file = string_or("nearend_file", sig.nearend_file);

  spec.events.flip_at = optional_fraction("flip_at");
  spec.events.snr_change_at = optional_fraction("snr_change_at");
  spec.events.snr_change_db = num_or("snr_change_db", spec.events.snr_change_db);
  if (const auto* e = get("doubletalk"); e && e->value != "none") {
    const auto comma = e->value.find(',');
    if (comma == std::string::npos) {
      throw FormatError(detail::where(*e) + ": doubletalk expects 'start,end' fractions");
    }
    const ConfigEntry first{std::string(detail::trim(e->value.substr(0, comma))), e->line};
    const ConfigEntry second{std::string(detail::trim(e->value.substr(comma + 1))), e->line};
    spec.events.doubletalk = std::pair{detail::to_double(first, "doubletalk"),
                                       detail::to_double(second, "doubletalk")};
  }

  spec.trials = uint_or("trials", spec.trials);
  spec.seed = uint_or("seed", spec.seed);
  spec.parallel = uint_or("parallel", spec.parallel);

  for (const auto& section : raw.algorithms) {
    auto algo = detail::build_algorithm(section);
    if (algo.config.reset) {
      const auto defaults = ResetConfig::defaults_for(sig.taps);
      if (algo.config.reset->vt == 0) algo.config.reset->vt = defaults.vt;
      if (algo.config.reset->vd == 0) algo.config.reset->vd = (3 * algo.config.reset->vt) / 4;
    }
    spec.algorithms.push_back(std::move(algo));
  }
  if (sig.taps < 1) throw ParameterError("taps must be >= 1", "taps");
  if (sig.scenario == Scenario::sysid && sig.ir_file.empty() &&
      (sig.nonzeros < 1 || sig.nonzeros > sig.taps)) {
    throw ParameterError("nonzeros must lie in [1, taps]", "nonzeros");
  }
  if (sig.subbands > 1 && sig.bank_length < 3) {
    throw ParameterError("bank_length must be >= 3", "bank_length");
  }
  spec.validate();
  return spec;
}

inline TrialSpec parse_config(std::istream& in) { return build_spec(parse_config_text(in)); }

inline TrialSpec parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RawConfig load_raw_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_config_text(in);
}

inline TrialSpec load_config(const std::string& path) { return build_spec(load_raw_config(path)); }

// Writes every field explicitly, so parsing the text gives back `spec`.
inline std::string serialize_config(const TrialSpec& spec) {
  using detail::format_double;
  std::ostringstream out;
  const SignalSpec& sig = spec.signal;
  auto flag = [](bool b) { return b ? "on" : "off"; };
  const char* input = "ar1";
  switch (sig.input) {
    case InputKind::white: input = "white"; break;
    case InputKind::ar1: input = "ar1"; break;
    case InputKind::ar2: input = "ar2"; break;
    case InputKind::speech: input = "speech"; break;
  }
  out << "scenario = " << (sig.scenario == Scenario::aec ? "aec" : "sysid") << '\n'
      << "input = " << input << '\n'
      << "taps = " << sig.taps << '\n'
      << "nonzeros = " << sig.nonzeros << '\n'
      << "subbands = " << sig.subbands << '\n'
      << "bank_length = " << sig.bank_length << '\n'
      << "snr_db = " << format_double(sig.snr_db) << '\n'
      << "samples = " << sig.samples << '\n'
      << "unit_norm_system = " << flag(sig.unit_norm_system) << '\n'
      << "delta_from_input_power = " << flag(sig.delta_from_input_power) << '\n'
      << "nearend_level_db = " << format_double(sig.nearend_level_db) << '\n';
  if (!sig.ir_file.empty()) out << "ir_file = " << sig.ir_file << '\n';
  if (!sig.farend_file.empty()) out << "farend_file = " << sig.farend_file << '\n';
  if (!sig.nearend_file.empty()) out << "nearend_file = " << sig.nearend_file << '\n';
  const auto& ev = spec.events;
  out << "flip_at = " << (ev.flip_at ? format_double(*ev.flip_at) : "none") << '\n'
      << "snr_change_at = " << (ev.snr_change_at ? format_double(*ev.snr_change_at) : "none")
      << '\n'
      << "snr_change_db = " << format_double(ev.snr_change_db) << '\n'
      << "doubletalk = "
      << (ev.doubletalk ? detail::format_fraction_pair(*ev.doubletalk) : "none") << '\n'
      << "trials = " << spec.trials << '\n'
      << "seed = " << spec.seed << '\n'
      << "parallel = " << spec.parallel << '\n';

  for (const auto& a : spec.algorithms) {
    const AlgoConfig& c = a.config;
    out << "\n[algorithm " << a.name << "]\n";
    if (const auto* fixed = std::get_if<FixedStep>(&c.mode)) {
      out << "mode = fixed\n" << "mu = " << format_double(fixed->mu) << '\n';
      if (fixed->tracker_noise_variance) {
        out << "noise_variance = "
            << (a.oracle_noise_variance ? "oracle" : format_double(*fixed->tracker_noise_variance))
            << '\n';
      }
    } else if (const auto* known = std::get_if<VssKnownVariance>(&c.mode)) {
      out << "mode = vss_known\n"
          << "noise_variance = "
          << (a.oracle_noise_variance ? "oracle" : format_double(known->noise_variance)) << '\n';
    } else {
      out << "mode = vss_unknown\n";
    }
    out << "rho = " << format_double(c.rho) << '\n'
        << "theta = " << format_double(c.theta) << '\n'
        << "gamma = " << format_double(c.gamma) << '\n'
        << "r = " << format_double(c.r_scale) << '\n'
        << "delta = " << format_double(c.delta) << '\n'
        << "mu_max = " << format_double(c.mu_max) << '\n'
        << "reset = " << flag(c.reset.has_value()) << '\n';
    if (c.reset) {
      out << "reset_vt = " << c.reset->vt << '\n'
          << "reset_vd = " << c.reset->vd << '\n'
          << "reset_epsilon = " << format_double(c.reset->epsilon) << '\n'
          << "reset_phi = " << format_double(c.reset->phi) << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Presets: the in-scope rows of the parameter table at desk scale.

// Detection threshold for the reset in the system-identification presets.
// The change statistic is not scale-free, and at unit-variance AR inputs
// with 30 dB SNR its steady-state spread already exceeds 1e-3.
inline constexpr double kPresetResetPhi = 0.05;

namespace detail {

struct PresetRow {
  const char* name;
  const char* input;
  int subbands;
  const char* event;  // "flip", "snr", "aec-flip" or "aec-doubletalk"
  double l0_mu, l0_rho, l0_theta;
  double known_gamma, known_rho, known_theta, known_r;
  double unknown_gamma, unknown_rho, unknown_theta, unknown_r;
};

inline const std::vector<PresetRow>& preset_rows() {
  static const std::vector<PresetRow> rows = {
      {"fig7a", "ar1", 2, "flip", 0.17, 1e-5, 5, 0.99, 4e-5, 5, 1.4, 0.99, 1e-4, 5, 1.8},
      {"fig7b", "ar1", 4, "flip", 0.1, 1e-5, 5, 0.99, 4e-4, 5, 1, 0.99, 4e-4, 5, 1.4},
      {"fig8a", "ar2", 2, "flip", 0.17, 1e-5, 5, 0.99, 1e-4, 5, 1.4, 0.99, 1e-4, 5, 2.5},
      {"fig8b", "ar2", 4, "flip", 0.1, 1e-5, 5, 0.99, 1e-4, 5, 1, 0.99, 1e-4, 5, 1.8},
      {"fig9a", "ar1", 2, "snr", 0.17, 1e-5, 5, 0.992, 4e-5, 5, 1.4, 0.99, 1e-4, 5, 1.8},
      {"fig9b", "ar1", 4, "snr", 0.1, 1e-5, 5, 0.992, 4e-4, 5, 1, 0.99, 4e-4, 5, 1.4},
      {"fig10a", "ar2", 2, "snr", 0.17, 1e-5, 5, 0.992, 1e-4, 5, 1.4, 0.99, 1e-5, 5, 2.5},
      {"fig10b", "ar2", 4, "snr", 0.17, 1e-5, 5, 0.992, 4e-4, 5, 1, 0.98, 1e-4, 5, 1.8},
      {"fig14", "speech", 4, "aec-flip", 0.35, 1e-6, 2, 0.85, 1e-6, 2, 4, 0.96, 1e-6, 2, 11},
      {"fig15", "speech", 4, "aec-doubletalk", 0.35, 1e-6, 2, 0.85, 1e-6, 2, 4, 0.96, 1e-6, 2,
       11},
  };
  return rows;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& row : detail::preset_rows()) names.emplace_back(row.name);
  return names;
}

// Config text of a preset, suitable for editing and re-loading.
inline std::string preset_text(const std::string& name) {
  using detail::format_double;
  const auto& rows = detail::preset_rows();
  const auto it = std::find_if(rows.begin(), rows.end(),
                               [&](const auto& r) { return name == r.name; });
  if (it == rows.end()) throw ParameterError("unknown preset '" + name + "'", "preset");
  const auto& row = *it;
  const std::string event = row.event;
  const bool aec = event.rfind("aec", 0) == 0;

  std::ostringstream out;
  out << "# preset " << row.name << '\n';
  if (aec) {
    out << "scenario = aec\ninput = speech\ntaps = 128\nsamples = 160000\ntrials = 1\n"
        << "delta_from_input_power = on\n";
  } else {
    out << "scenario = sysid\ninput = " << row.input
        << "\ntaps = 100\nnonzeros = 4\nsamples = 80000\ntrials = 20\n";
  }
  out << "subbands = " << row.subbands << '\n'
      << "bank_length = " << (row.subbands == 2 ? 17 : 33) << '\n'
      << "snr_db = 30\n";
  if (event == "flip" || event == "aec-flip") out << "flip_at = 0.5\n";
  if (event == "snr") out << "snr_change_at = 0.5\nsnr_change_db = 20\n";
  if (event == "aec-doubletalk") out << "doubletalk = 0.375,0.75\n";

  const bool reset = event == "flip";
  auto reset_lines = [&] {
    std::string s = std::string("reset = ") + (reset ? "on" : "off") + "\n";
    if (reset) s += "reset_phi = " + format_double(kPresetResetPhi) + "\n";
    return s;
  };
  out << "\n[algorithm l0-nsaf]\nmode = fixed\n"
      << "mu = " << format_double(row.l0_mu) << '\n'
      << "rho = " << format_double(row.l0_rho) << '\n'
      << "theta = " << format_double(row.l0_theta) << '\n';
  out << "\n[algorithm vss-known]\nmode = vss_known\nnoise_variance = oracle\n"
      << "gamma = " << format_double(row.known_gamma) << '\n'
      << "rho = " << format_double(row.known_rho) << '\n'
      << "theta = " << format_double(row.known_theta) << '\n'
      << "r = " << format_double(row.known_r) << '\n'
      << reset_lines();
  out << "\n[algorithm vss-unknown]\nmode = vss_unknown\n"
      << "gamma = " << format_double(row.unknown_gamma) << '\n'
      << "rho = " << format_double(row.unknown_rho) << '\n'
      << "theta = " << format_double(row.unknown_theta) << '\n'
      << "r = " << format_double(row.unknown_r) << '\n'
      << reset_lines();
  return out.str();
}

inline RawConfig preset_raw(const std::string& name) {
  std::istringstream in(preset_text(name));
  return parse_config_text(in);
}

inline TrialSpec preset(const std::string& name) { return build_spec(preset_raw(name)); }

}  // namespace l0nsaf

#endif  // L0NSAF_CONFIG_HPP_
