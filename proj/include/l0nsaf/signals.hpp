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

// Stimulus generation for system-identification and echo-cancellation runs:
// AR inputs, sparse systems, SNR-calibrated noise, event schedules and
// ingestion of user-supplied impulse responses and 16-bit PCM WAV audio.
//
// Every generator is a pure function of its parameters and a 64-bit seed.
// Independent streams (input, noise, system, near end) use distinct sub-seeds.

#ifndef L0NSAF_SIGNALS_HPP_
#define L0NSAF_SIGNALS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "l0nsaf/error.hpp"

namespace l0nsaf {

enum class Stream : std::uint32_t {
  input = 1,
  noise = 2,
  system = 3,
  near_end = 4,
  far_end = 5,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

inline std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng,
                                    double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> out(n);
  for (double& v : out) v = dist(rng);
  return out;
}

inline std::vector<double> gen_white(std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::input);
  return gaussian(n, rng);
}

// x(t) = -a1 x(t-1) - a2 x(t-2) + z(t) with zero initial conditions, i.e. the
// all-pole filter 1 / (1 + a1 z^-1 + a2 z^-2) applied to `drive`.
inline std::vector<double> ar_filter(std::span<const double> drive, double a1, double a2) {
  std::vector<double> x(drive.size());
  double x1 = 0.0, x2 = 0.0;
  for (std::size_t t = 0; t < drive.size(); ++t) {
    x[t] = -a1 * x1 - a2 * x2 + drive[t];
    x2 = x1;
    x1 = x[t];
  }
  return x;
}

// x(t) = 0.95 x(t-1) + z(t).
inline std::vector<double> gen_ar1(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ParameterError("sequence length must be >= 1", "samples");
  const auto z = gen_white(n, seed);
  return ar_filter(z, -0.95, 0.0);
}

// x(t) = -0.1 x(t-1) - 0.8 x(t-2) + z(t).
inline std::vector<double> gen_ar2(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ParameterError("sequence length must be >= 1", "samples");
  const auto z = gen_white(n, seed);
  return ar_filter(z, 0.1, 0.8);
}

struct SparseSystem {
  std::vector<double> coeffs;
  std::vector<std::size_t> support;  // ascending
  std::uint64_t seed = 0;
};

inline std::vector<std::size_t> support_of(std::span<const double> coeffs) {
  std::vector<std::size_t> s;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    if (coeffs[j] != 0.0) s.push_back(j);
  }
  return s;
}

// K distinct uniformly random positions with N(0, 1) values, zeros elsewhere.
inline SparseSystem gen_sparse_system(std::size_t taps, std::size_t nonzeros,
                                      std::uint64_t seed) {
  if (taps < 1) throw ParameterError("system length must be >= 1", "taps");
  if (nonzeros < 1 || nonzeros > taps) {
    throw ParameterError("nonzero count must lie in [1, taps]", "nonzeros");
  }
  auto rng = make_rng(seed, Stream::system);
  std::vector<std::size_t> positions(taps);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  std::shuffle(positions.begin(), positions.end(), rng);
  positions.resize(nonzeros);
  std::sort(positions.begin(), positions.end());

  SparseSystem sys;
  sys.seed = seed;
  sys.coeffs.assign(taps, 0.0);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (std::size_t pos : positions) {
    double v = 0.0;
    while (v == 0.0) v = dist(rng);
    sys.coeffs[pos] = v;
  }
  sys.support = std::move(positions);
  return sys;
}

// y(t) = x(t)^T w0 with x(t) = [x(t), ..., x(t-L+1)], zero history.
inline std::vector<double> clean_output(std::span<const double> x,
                                        std::span<const double> w0) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t t = 0; t < x.size(); ++t) {
    const std::size_t reach = std::min(w0.size(), t + 1);
    double acc = 0.0;
    for (std::size_t j = 0; j < reach; ++j) acc += w0[j] * x[t - j];
    y[t] = acc;
  }
  return y;
}

inline double mean_square(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc / static_cast<double>(v.size());
}

struct NoiseSpec {
  double snr_db = 30.0;
  double sigma_eta_sq = 0.0;
};

inline double noise_variance_for(double clean_power, double snr_db) {
  return clean_power / std::pow(10.0, snr_db / 10.0);
}

// sigma_eta^2 = mean(y^2) / 10^(SNR/10) with y = x^T w0 over the sequence.
inline NoiseSpec calibrate_noise(std::span<const double> x, std::span<const double> w0,
                                 double snr_db) {
  const double power = mean_square(clean_output(x, w0));
  if (!(power > 0.0)) {
    throw ParameterError("clean system output is identically zero", "snr_db");
  }
  return {snr_db, noise_variance_for(power, snr_db)};
}

inline std::vector<double> gen_noise(std::size_t n, const NoiseSpec& spec,
                                     std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::noise);
  return gaussian(n, rng, std::sqrt(spec.sigma_eta_sq));
}

struct SnrChange {
  std::size_t at = 0;
  double snr_db = 20.0;
};

struct DoubleTalk {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
};

struct Schedule {
  std::size_t total_samples = 0;
  std::optional<std::size_t> flip_at;  // w0 -> -w0 from this sample on
  std::optional<SnrChange> snr_change;
  std::optional<DoubleTalk> doubletalk;

  void validate() const {
    if (flip_at && *flip_at >= total_samples) {
      throw ParameterError("flip index outside the run", "flip_at");
    }
    if (snr_change && snr_change->at >= total_samples) {
      throw ParameterError("SNR change index outside the run", "snr_change_at");
    }
    if (doubletalk && (doubletalk->start >= doubletalk->end ||
                       doubletalk->end > total_samples)) {
      throw ParameterError("double-talk interval outside the run", "doubletalk");
    }
  }

  // +1 or -1: sign of the true system at sample t.
  double system_sign(std::size_t t) const {
    return flip_at && t >= *flip_at ? -1.0 : 1.0;
  }
};

// d(t) = x(t)^T w0(t) + eta(t) + near_end(t).
// `noise` is the realization at spec.snr_db; after an SNR change it is scaled
// to the new level. `near_end` is added on the double-talk interval only.
inline std::vector<double> synthesize_desired(std::span<const double> x,
                                              std::span<const double> w0,
                                              std::span<const double> noise,
                                              const NoiseSpec& spec,
                                              const Schedule& schedule,
                                              std::span<const double> near_end = {}) {
  if (noise.size() != x.size()) throw ParameterError("noise length mismatch", "noise");
  if (schedule.total_samples != x.size()) {
    throw ParameterError("schedule length mismatch", "samples");
  }
  schedule.validate();
  const auto y = clean_output(x, w0);
  double late_scale = 1.0;
  if (schedule.snr_change) {
    late_scale = std::sqrt(std::pow(10.0, (spec.snr_db - schedule.snr_change->snr_db) / 10.0));
  }
  if (schedule.doubletalk && near_end.size() < schedule.doubletalk->end) {
    throw ParameterError("near-end signal shorter than the double-talk interval",
                         "nearend");
  }
  std::vector<double> d(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const bool late = schedule.snr_change && t >= schedule.snr_change->at;
    d[t] = schedule.system_sign(t) * y[t] + (late ? late_scale : 1.0) * noise[t];
    if (schedule.doubletalk && t >= schedule.doubletalk->start &&
        t < schedule.doubletalk->end) {
      d[t] += near_end[t];
    }
  }
  return d;
}

// Sample autocorrelation coefficient at `lag`, mean removed.
inline double autocorrelation(std::span<const double> x, std::size_t lag) {
  if (x.size() <= lag) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double c = x[t] - mean;
    den += c * c;
    if (t >= lag) num += c * (x[t - lag] - mean);
  }
  return den > 0.0 ? num / den : 0.0;
}

inline double variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size());
}

// ---------------------------------------------------------------------------
// Synthetic stand-ins for recorded echo paths and speech.

// Sparse echo path: a bulk delay followed by a short exponentially decaying
// cluster of random taps. Normalized to unit energy.
inline SparseSystem synthetic_echo_path(std::size_t taps, std::uint64_t seed) {
  if (taps < 8) throw ParameterError("echo path needs at least 8 taps", "taps");
  auto rng = make_rng(seed, Stream::system);
  std::uniform_int_distribution<std::size_t> delay_dist(taps / 16, taps / 4);
  const std::size_t delay = delay_dist(rng);
  const std::size_t cluster = std::max<std::size_t>(4, taps / 8);
  std::normal_distribution<double> dist(0.0, 1.0);
  SparseSystem sys;
  sys.seed = seed;
  sys.coeffs.assign(taps, 0.0);
  const double decay = 4.0 / static_cast<double>(cluster);
  for (std::size_t k = 0; k < cluster && delay + k < taps; ++k) {
    sys.coeffs[delay + k] = dist(rng) * std::exp(-decay * static_cast<double>(k));
  }
  const double energy = std::sqrt(mean_square(sys.coeffs) * static_cast<double>(taps));
  for (double& c : sys.coeffs) c /= energy;
  sys.support = support_of(sys.coeffs);
  return sys;
}

// Speech-like test signal: AR(2) "formant" noise under a syllabic amplitude
// envelope, with silent gaps. Unit mean power over the active parts.
inline std::vector<double> pseudo_speech(std::size_t n, std::uint64_t seed,
                                         Stream stream = Stream::far_end) {
  auto rng = make_rng(seed, stream);
  const auto z = gaussian(n, rng);
  auto x = ar_filter(z, -1.3, 0.6);  // resonant lowpass, poles at r ~ 0.77
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::size_t t = 0;
  while (t < n) {
    // A "word" of 1500-5000 samples then a pause of 300-2500 samples.
    const auto word = static_cast<std::size_t>(1500 + 3500 * uni(rng));
    const auto pause = static_cast<std::size_t>(300 + 2200 * uni(rng));
    const double level = 0.5 + 1.0 * uni(rng);
    const double syllable = 200.0 + 400.0 * uni(rng);
    for (std::size_t k = 0; k < word && t < n; ++k, ++t) {
      const double env = std::abs(std::sin(3.14159265358979 * static_cast<double>(k) / syllable));
      x[t] *= level * (0.2 + 0.8 * env);
    }
    for (std::size_t k = 0; k < pause && t < n; ++k, ++t) x[t] = 0.0;
  }
  const double power = mean_square(x);
  if (power > 0.0) {
    const double scale = 1.0 / std::sqrt(power);
    for (double& v : x) v *= scale;
  }
  return x;
}

// ---------------------------------------------------------------------------
// File ingestion.

// One decimal coefficient per line; blank lines and '#' comments ignored.
inline SparseSystem parse_ir(std::istream& in) {
  SparseSystem sys;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    double v = 0.0;
    if (!(fields >> v)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw FormatError("IR line " + std::to_string(line_no) + ": not a number");
    }
    std::string rest;
    if (fields >> rest) {
      throw FormatError("IR line " + std::to_string(line_no) + ": trailing text '" + rest + "'");
    }
    if (!std::isfinite(v)) {
      throw FormatError("IR line " + std::to_string(line_no) + ": non-finite value");
    }
    sys.coeffs.push_back(v);
  }
  if (sys.coeffs.empty()) throw FormatError("IR file contains no coefficients");
  sys.support = support_of(sys.coeffs);
  return sys;
}

inline SparseSystem load_ir(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open IR file '" + path + "'");
  try {
    return parse_ir(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

struct Audio {
  std::vector<double> samples;  // in [-1, 1)
  std::uint32_t sample_rate = 0;
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// RIFF/WAVE, PCM format 1, 16-bit, mono. Samples scaled by 1/32768.
inline Audio parse_wav(std::span<const unsigned char> bytes) {
  auto fail = [](std::size_t offset, const std::string& what) {
    return FormatError("WAV byte " + std::to_string(offset) + ": " + what);
  };
  if (bytes.size() < 12) throw fail(0, "file too short for a RIFF header");
  if (std::string(bytes.begin(), bytes.begin() + 4) != "RIFF") throw fail(0, "missing RIFF tag");
  if (std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE") throw fail(8, "missing WAVE tag");
  Audio audio;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                         bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4));
    const std::uint32_t size = detail::le32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw fail(pos, "chunk '" + id + "' overruns file");
    if (id == "fmt ") {
      if (size < 16) throw fail(body, "fmt chunk too short");
      const auto format = detail::le16(bytes.data() + body);
      const auto channels = detail::le16(bytes.data() + body + 2);
      audio.sample_rate = detail::le32(bytes.data() + body + 4);
      const auto bits = detail::le16(bytes.data() + body + 14);
      if (format != 1) throw fail(body, "not PCM (format " + std::to_string(format) + ")");
      if (channels != 1) throw fail(body + 2, "expected mono, got " + std::to_string(channels) + " channels");
      if (bits != 16) throw fail(body + 14, "expected 16-bit samples, got " + std::to_string(bits));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw fail(pos, "data chunk before fmt chunk");
      if (size % 2 != 0) throw fail(pos + 4, "odd data length for 16-bit samples");
      audio.samples.resize(size / 2);
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(detail::le16(bytes.data() + body + 2 * i));
        audio.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      if (audio.samples.empty()) throw fail(body, "no samples");
      return audio;
    }
    pos = body + size + (size & 1u);
  }
  throw fail(pos, have_fmt ? "missing data chunk" : "missing fmt chunk");
}

inline Audio load_audio(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open audio file '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return parse_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// Writes 16-bit mono PCM; samples are clipped to [-1, 1).
inline void save_wav(const std::string& path, std::span<const double> samples,
                     std::uint32_t sample_rate = 16000) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write audio file '" + path + "'");
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto put16 = [&](std::uint16_t v) {
    out.put(static_cast<char>(v & 0xff));
    out.put(static_cast<char>(v >> 8));
  };
  const auto data_bytes = static_cast<std::uint32_t>(2 * samples.size());
  out.write("RIFF", 4);
  put32(36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(16);
  put16(1);
  put16(1);
  put32(sample_rate);
  put32(2 * sample_rate);
  put16(2);
  put16(16);
  out.write("data", 4);
  put32(data_bytes);
  for (double s : samples) {
    const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace l0nsaf

#endif  // L0NSAF_SIGNALS_HPP_
