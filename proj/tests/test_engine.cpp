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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "l0nsaf/engine.hpp"
#include "test_support.hpp"

namespace l0nsaf {
namespace {

using testing::make_frame;
using testing::random_frame;
using Vec = std::vector<double>;

Vec unit(std::size_t n, std::size_t at = 0) {
  Vec v(n, 0.0);
  v[at] = 1.0;
  return v;
}

TEST(SubbandErrors, Examples) {
  const auto frame = make_frame({unit(3)}, {1.0});
  EXPECT_DOUBLE_EQ(subband_errors(frame, Vec{0.25, 0.0, 0.0})[0], 0.75);
  EXPECT_DOUBLE_EQ(subband_errors(frame, Vec{0.0, 0.0, 0.0})[0], 1.0);
  const auto w0 = Vec{0.3, -0.2, 0.7};
  auto f2 = make_frame({{1.0, 2.0, 3.0}, {0.5, -1.0, 0.25}}, {0.0, 0.0});
  for (std::size_t m = 0; m < 2; ++m) f2.desired[m] = dot(f2.regressors[m], w0);
  for (double e : subband_errors(f2, w0)) EXPECT_EQ(e, 0.0);
  EXPECT_THROW(subband_errors(frame, Vec{0.0, 0.0}), ParameterError);
}

TEST(StepSizeKnown, Examples) {
  AlgoConfig cfg;
  cfg.mode = VssKnownVariance{1e-4};
  cfg.r_scale = 1.4;
  cfg.delta = 0.0;
  // Four subbands with unit regressor energy: sum_m (sigma^2/4) / 1 = 1e-4.
  const auto frame = make_frame({unit(100), unit(100, 1), unit(100, 2), unit(100, 3)},
                                {0.0, 0.0, 0.0, 0.0});
  EXPECT_NEAR(step_size_known_variance(0.01, frame, cfg, 0.0, 4, 100),
              0.04 / (0.04 + 140e-4), 1e-15);
  EXPECT_NEAR(step_size_known_variance(0.01, frame, cfg, 0.0, 4, 100), 0.7407407407, 1e-9);
  EXPECT_EQ(step_size_known_variance(0.0, frame, cfg, 0.0, 4, 100), 0.0);
  cfg.mode = VssKnownVariance{0.0};
  EXPECT_EQ(step_size_known_variance(0.3, frame, cfg, 0.0, 4, 100), 1.0);
}

TEST(StepSizeKnown, UnclampedValueBelowOne) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AlgoConfig cfg;
  cfg.mu_max = 10.0;
  for (int i = 0; i < 2000; ++i) {
    cfg.mode = VssKnownVariance{u(rng) * 1e-2 + 1e-12};
    cfg.rho = u(rng) * 1e-3;
    const auto frame = random_frame(2, 8, rng);
    const double mu = step_size_known_variance(u(rng) * 5.0, frame, cfg, u(rng), 2, 8);
    ASSERT_GE(mu, 0.0);
    ASSERT_LT(mu, 1.0);
  }
}

TEST(StepSizeUnknown, Examples) {
  AlgoConfig cfg;
  cfg.r_scale = 1.0;
  EXPECT_NEAR(step_size_unknown_variance(1.0, Vec{0.02, 0.03}, cfg, 0.0, 2, 100), 0.4, 1e-15);
  EXPECT_EQ(step_size_unknown_variance(0.0, Vec{0.02, 0.03}, cfg, 0.0, 2, 100), 0.0);
  EXPECT_EQ(step_size_unknown_variance(1.0, Vec{0.0, 0.0}, cfg, 0.0, 2, 100), 0.0);
  // Large p is clamped.
  EXPECT_EQ(step_size_unknown_variance(1e6, Vec{0.02, 0.03}, cfg, 0.0, 2, 100), cfg.mu_max);
  cfg.mu_max = 0.3;
  EXPECT_EQ(step_size_unknown_variance(1.0, Vec{0.02, 0.03}, cfg, 0.0, 2, 100), 0.3);
}

TEST(StepSize, PenaltyUsesRhoSquaredAlpha) {
  AlgoConfig cfg;
  cfg.rho = 0.1;
  // 2 p / (100 (0.05 + 0.01 * 5)) = 2 / 10 = 0.2
  EXPECT_NEAR(step_size_unknown_variance(1.0, Vec{0.05}, cfg, 5.0, 2, 100), 0.2, 1e-15);
}

TEST(MsdUpdate, Examples) {
  AlgoConfig cfg;
  cfg.mode = VssKnownVariance{0.0};
  const auto frame = make_frame({unit(100), unit(100, 1)}, {0.0, 0.0});
  EXPECT_NEAR(msd_update(1.0, 1.0, 0.0, frame, 0.0, Vec{0.0, 0.0}, cfg, 2, 100), 0.98, 1e-15);
  EXPECT_EQ(msd_update(0.37, 0.0, 0.0, frame, 0.0, Vec{0.0, 0.0}, cfg, 2, 100), 0.37);

  AlgoConfig unknown;
  const auto small = make_frame({unit(1), unit(1)}, {0.0, 0.0});
  // 1e-3 (1 - 2 * 1 * 2 / 1) = -3e-3, clipped to 0.
  EXPECT_EQ(msd_update(1e-3, 1.0, 0.0, small, 0.0, Vec{0.0, 0.0}, unknown, 2, 1), 0.0);
  EXPECT_EQ(msd_update(0.37, 0.0, 0.0, small, 0.0, Vec{0.1, 0.1}, unknown, 2, 1), 0.37);
}

TEST(MsdUpdate, IncludesNoiseAndAttractorTerms) {
  AlgoConfig cfg;
  cfg.mode = VssKnownVariance{2e-3};
  cfg.delta = 0.0;
  const auto frame = make_frame({unit(10), unit(10, 1)}, {0.0, 0.0});
  // p + (mu^2 - 2 mu) N p / L + mu^2 (1e-3 + 1e-3) + kappa^2 alpha
  const double p = 0.5, mu = 0.4, kappa = 0.01, alpha = 3.0;
  const double want = p + (mu * mu - 2 * mu) * 0.2 * p + mu * mu * 2e-3 + kappa * kappa * alpha;
  EXPECT_NEAR(msd_update(p, mu, kappa, frame, alpha, Vec{0, 0}, cfg, 2, 10), want, 1e-15);
}

TEST(Averages, AlphaExamples) {
  const Vec zero(4, 0.0);
  const auto dec0 = attractor_decomposition<double>(zero, 5.0);
  EXPECT_DOUBLE_EQ(alpha_update(0.8, 0.99, dec0, zero), 0.99 * 0.8);
  // ||S w + G||^2 = 1 with theta = 1, w = [0.5 - ...]: use theta = 2, w = 0.25 -> f = 1.
  const Vec w{0.25};
  const auto dec = attractor_decomposition<double>(w, 2.0);
  EXPECT_NEAR(alpha_update(0.0, 0.99, dec, w), 0.01, 1e-15);
  double a = 0.0;
  for (int i = 0; i < 5000; ++i) a = alpha_update(a, 0.99, dec, w);
  EXPECT_NEAR(a, 1.0, 1e-12);
}

TEST(Averages, VExamples) {
  EXPECT_DOUBLE_EQ(v_update(0.5, 0.99, 0.0, 1.0, 0.01), 0.99 * 0.5);
  EXPECT_NEAR(v_update(0.0, 0.99, std::sqrt(2.0), 1.0, 0.0), 0.02, 1e-15);
  double v = 0.0;
  for (int i = 0; i < 5000; ++i) v = v_update(v, 0.99, 3.0, 3.0, 0.0);
  EXPECT_NEAR(v, 3.0, 1e-12);
  EXPECT_EQ(v_update(0.0, 0.9, 1.0, 0.0, 0.0), 0.0);
}

TEST(WeightUpdate, Examples) {
  Vec w{0.0, 0.0, 0.0};
  const auto frame = make_frame({unit(3)}, {1.0});
  weight_update(w, frame, subband_errors(frame, w), 0.5, 0.3, 5.0, 0.0);
  EXPECT_EQ(w, (Vec{0.5, 0.0, 0.0}));

  Vec w1{0.1};
  const auto none = make_frame({Vec{0.0}}, {0.0});
  weight_update(w1, none, Vec{0.0}, 0.0, 0.01, 5.0, 0.01);
  EXPECT_NEAR(w1[0], 0.075, 1e-15);
}

TEST(WeightUpdate, MatchesNlmsWithoutAttractor) {
  std::mt19937_64 rng(4);
  Vec w(6, 0.0);
  for (int i = 0; i < 50; ++i) {
    const auto frame = random_frame(1, 6, rng);
    const auto errs = subband_errors(frame, w);
    Vec want = w;
    for (std::size_t j = 0; j < 6; ++j) {
      want[j] += 0.7 * errs[0] * frame.regressors[0][j] / (frame.sq_norms[0] + 0.01);
    }
    weight_update(w, frame, errs, 0.7, 0.0, 5.0, 0.01);
    for (std::size_t j = 0; j < 6; ++j) ASSERT_NEAR(w[j], want[j], 1e-14);
  }
}

TEST(WeightUpdate, SilentFrameWithoutRegularizationAppliesAttractorOnly) {
  Vec w{0.1, 0.5};
  const auto silent = make_frame({Vec{0.0, 0.0}, Vec{0.0, 0.0}}, {1.0, -1.0});
  weight_update(w, silent, subband_errors(silent, w), 0.9, 0.01, 5.0, 0.0);
  EXPECT_NEAR(w[0], 0.075, 1e-15);
  EXPECT_EQ(w[1], 0.5);
  for (double v : w) EXPECT_TRUE(std::isfinite(v));
}

TEST(Stability, Examples) {
  EXPECT_TRUE(stability_check(1.0, 2, 100, 1.0, MsdCase::known_variance));
  EXPECT_FALSE(stability_check(0.0, 2, 100, 1.0, MsdCase::known_variance));
  EXPECT_FALSE(stability_check(0.0, 2, 100, 1.0, MsdCase::unknown_variance));
  for (double mu = 0.01; mu < 2.0; mu += 0.01) {
    for (std::size_t n : {1u, 2u, 4u, 8u}) {
      EXPECT_TRUE(stability_check(mu, n, 32, 1.0, MsdCase::known_variance)) << mu << " " << n;
    }
  }
}

TEST(Config, ValidationNamesTheField) {
  auto field_of = [](AlgoConfig cfg) -> std::string {
    try {
      cfg.validate();
    } catch (const ParameterError& e) {
      return e.field();
    }
    return "";
  };
  AlgoConfig ok;
  EXPECT_EQ(field_of(ok), "");
  AlgoConfig c = ok;
  c.rho = -1.0;
  EXPECT_EQ(field_of(c), "rho");
  c = ok;
  c.theta = 0.0;
  EXPECT_EQ(field_of(c), "theta");
  c = ok;
  c.gamma = 1.0;
  EXPECT_EQ(field_of(c), "gamma");
  c = ok;
  c.r_scale = 0.5;
  EXPECT_EQ(field_of(c), "r");
  c = ok;
  c.delta = -1e-3;
  EXPECT_EQ(field_of(c), "delta");
  c = ok;
  c.mode = FixedStep{2.0, {}};
  c.mu_max = 3.0;
  EXPECT_EQ(field_of(c), "mu");
  c = ok;
  c.mode = VssKnownVariance{-1.0};
  EXPECT_EQ(field_of(c), "noise_variance");
  c = ok;
  c.reset = ResetConfig{10, 10, 1e-6, 1e-3};
  EXPECT_EQ(field_of(c), "reset_vd");
}

TEST(ResetDetector, FiresOnDocumentedExample) {
  ResetDetector det(ResetConfig{4, 3, 1e-6, 1e-3});
  // |e| / (||x|| + eps) = 0.01 for every entry.
  for (int i = 0; i < 4; ++i) det.push(0.01 * (1.0 + 1e-6), 1.0);
  EXPECT_NEAR(det.trimmed_mean(), 0.01, 1e-15);
  det.set_baseline(0.001);
  EXPECT_EQ(det.check(0.25, 0, 1), ResetDecision::reset);
  EXPECT_NEAR(det.last_change(), 0.018, 1e-12);
  EXPECT_NEAR(det.z_old(), 0.01, 1e-15);
}

TEST(ResetDetector, FirstCheckOnlyArms) {
  ResetDetector det(ResetConfig{4, 2, 1e-6, 1e-3});
  for (int i = 0; i < 4; ++i) det.push(100.0, 1.0);
  EXPECT_FALSE(det.armed());
  EXPECT_EQ(det.check(1.0, 0, 1), ResetDecision::none);
  EXPECT_TRUE(det.armed());
}

TEST(ResetDetector, StationaryInputNeverFires) {
  ResetDetector det(ResetConfig{8, 6, 1e-6, 1e-3});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1e-4);
  for (std::uint64_t tau = 0; tau < 400; ++tau) {
    det.push(0.01 + g(rng), 1.0);
    det.push(0.01 + g(rng), 1.0);
    EXPECT_EQ(det.check(0.5, tau, 2), ResetDecision::none);
  }
}

TEST(ResetDetector, ZeroStepSkipsAndKeepsBaseline) {
  ResetDetector det(ResetConfig{4, 3, 1e-6, 1e-3});
  for (int i = 0; i < 4; ++i) det.push(1.0, 0.0);
  det.set_baseline(0.001);
  EXPECT_EQ(det.check(0.0, 0, 1), ResetDecision::none);
  EXPECT_EQ(det.z_old(), 0.001);
}

TEST(ResetDetector, NeedsFullWindowAndChecksOnCadence) {
  ResetDetector det(ResetConfig{6, 3, 1e-6, 1e-3});
  EXPECT_EQ(det.check_period(4), 2u);  // ceil(6 / 4)
  det.push(1.0, 1.0);
  det.set_baseline(0.0);
  EXPECT_FALSE(det.is_check_instant(0, 4));
  EXPECT_EQ(det.check(1.0, 0, 4), ResetDecision::none);
  for (int i = 0; i < 5; ++i) det.push(1.0, 1.0);
  EXPECT_TRUE(det.is_check_instant(0, 4));
  EXPECT_FALSE(det.is_check_instant(1, 4));
  EXPECT_TRUE(det.is_check_instant(2, 4));
  EXPECT_EQ(det.check(1.0, 1, 4), ResetDecision::none);
  EXPECT_EQ(det.check(1.0, 2, 4), ResetDecision::reset);
}

TEST(ResetDetector, TrimmedMeanMatchesSortOracle) {
  std::mt19937_64 rng(6);
  std::exponential_distribution<double> ex(3.0);
  ResetDetector det(ResetConfig{40, 30, 1e-6, 1e-3});
  Vec all;
  for (int i = 0; i < 97; ++i) {
    const double v = ex(rng);
    det.push(v, 2.0);
    all.push_back(v / (2.0 + 1e-6));
  }
  Vec window(all.end() - 40, all.end());
  std::sort(window.begin(), window.end());
  double want = 0.0;
  for (int i = 0; i < 10; ++i) want += window[i];
  EXPECT_NEAR(det.trimmed_mean(), want / 10.0, 1e-15);
}

TEST(AdaptStep, HandBuiltTwoTapExample) {
  AlgoConfig cfg;
  cfg.mode = VssUnknownVariance{};
  cfg.rho = 0.01;
  cfg.theta = 5.0;
  cfg.gamma = 0.99;
  cfg.r_scale = 1.0;
  cfg.delta = 0.0;
  auto state = FilterState::initial(2, 1);
  state.w = {0.1, 0.0};
  const auto frame = make_frame({Vec{1.0, 0.0}}, {1.0});
  adapt_step(state, frame, cfg);
  // e = 0.9, v = 0.0081, mu = 1 / (2 * 0.0081) clamped to 1, kappa = 0.01,
  // f = [2.5, 0]: w = [0.1 + 0.9 - 0.025, 0], p = 1 - 1 + 0.0081, alpha = 0.0625.
  EXPECT_NEAR(state.v[0], 0.0081, 1e-15);
  EXPECT_EQ(state.mu, 1.0);
  EXPECT_NEAR(state.w[0], 0.975, 1e-15);
  EXPECT_EQ(state.w[1], 0.0);
  EXPECT_NEAR(state.p, 0.0081, 1e-15);
  EXPECT_NEAR(state.alpha, 0.0625, 1e-15);
  EXPECT_EQ(state.tau, 1u);
}

TEST(AdaptStep, StepSizeUsesPreviousAlpha) {
  AlgoConfig cfg;
  cfg.mode = VssKnownVariance{1e-2};
  cfg.rho = 0.05;
  auto state = FilterState::initial(3, 1);
  state.w = {0.1, -0.05, 0.0};
  state.alpha = 0.7;
  state.p = 0.2;
  const auto frame = make_frame({Vec{0.3, 1.0, -0.4}}, {0.2});
  const double want = step_size_known_variance(0.2, frame, cfg, 0.7, 1, 3);
  adapt_step(state, frame, cfg);
  EXPECT_EQ(state.mu, want);
  EXPECT_NE(state.alpha, 0.7);
}

TEST(AdaptStep, FixedStepWithoutPenaltyIsPlainNsaf) {
  std::mt19937_64 rng(7);
  AlgoConfig cfg;
  cfg.mode = FixedStep{0.3, {}};
  auto state = FilterState::initial(8, 4);
  Vec ref(8, 0.0);
  for (int i = 0; i < 300; ++i) {
    const auto frame = random_frame(4, 8, rng);
    Vec errs(4);
    for (std::size_t m = 0; m < 4; ++m) errs[m] = frame.desired[m] - dot(frame.regressors[m], ref);
    for (std::size_t m = 0; m < 4; ++m) {
      for (std::size_t j = 0; j < 8; ++j) {
        ref[j] += 0.3 * errs[m] * frame.regressors[m][j] / (frame.sq_norms[m] + cfg.delta);
      }
    }
    adapt_step(state, frame, cfg);
    for (std::size_t j = 0; j < 8; ++j) ASSERT_NEAR(state.w[j], ref[j], 1e-12);
  }
}

TEST(AdaptStep, ResetReinitializesAndIsIdempotent) {
  std::mt19937_64 rng(8);
  AlgoConfig cfg;
  cfg.rho = 1e-3;
  auto state = FilterState::initial(5, 2);
  for (int i = 0; i < 20; ++i) adapt_step(state, random_frame(2, 5, rng), cfg);
  const auto frame = random_frame(2, 5, rng);
  adapt_step(state, frame, cfg, ResetDecision::reset);
  EXPECT_EQ(state.w, Vec(5, 0.0));
  EXPECT_EQ(state.v, Vec(2, 0.0));
  EXPECT_EQ(state.p, 1.0);
  EXPECT_EQ(state.alpha, 0.0);
  auto twice = state;
  adapt_step(twice, frame, cfg, ResetDecision::reset);
  EXPECT_EQ(twice.w, state.w);
  EXPECT_EQ(twice.v, state.v);
  EXPECT_EQ(twice.p, state.p);
  EXPECT_EQ(twice.alpha, state.alpha);
}

TEST(AdaptStep, GeometricDecayOfTrackedBound) {
  std::mt19937_64 rng(9);
  AlgoConfig cfg;
  cfg.mode = FixedStep{0.5, 0.0};
  const std::size_t n = 4, taps = 32;
  auto state = FilterState::initial(taps, n);
  const double ratio = 1.0 + (0.25 - 1.0) * 4.0 / 32.0;
  for (int tau = 1; tau <= 300; ++tau) {
    adapt_step(state, random_frame(n, taps, rng), cfg);
    const double want = std::pow(ratio, tau);
    ASSERT_NEAR(state.p / want, 1.0, 1e-12) << tau;
  }
}

TEST(AdaptStep, RejectsMismatchedFrames) {
  AlgoConfig cfg;
  auto state = FilterState::initial(4, 2);
  std::mt19937_64 rng(1);
  EXPECT_THROW(adapt_step(state, random_frame(3, 4, rng), cfg), ParameterError);
  EXPECT_THROW(adapt_step(state, random_frame(2, 5, rng), cfg), ParameterError);
}

TEST(Snapshot, RoundTrip) {
  std::mt19937_64 rng(10);
  AlgoConfig cfg;
  cfg.rho = 1e-4;
  auto state = FilterState::initial(6, 2);
  for (int i = 0; i < 15; ++i) adapt_step(state, random_frame(2, 6, rng), cfg);
  const auto back = parse_snapshot(snapshot(state));
  EXPECT_EQ(back.w, state.w);
  EXPECT_EQ(back.v, state.v);
  EXPECT_EQ(back.p, state.p);
  EXPECT_EQ(back.alpha, state.alpha);
  EXPECT_EQ(back.mu, state.mu);
  EXPECT_EQ(back.tau, state.tau);
  EXPECT_THROW(parse_snapshot("tau=1 p=2"), FormatError);
  EXPECT_THROW(parse_snapshot("tau=x w=1"), FormatError);
  EXPECT_THROW(parse_snapshot("bogus w=1"), FormatError);
}

TEST(SubbandFilter, ResetFiresOnAbruptChange) {
  AlgoConfig cfg;
  cfg.mode = FixedStep{0.5, {}};
  cfg.reset = ResetConfig{8, 6, 1e-6, 1e-3};
  SubbandFilter filter(cfg, 2, 1);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  const Vec w0{1.0, -0.5};
  double prev = 0.0;
  bool fired_early = false, fired_late = false;
  for (int t = 0; t < 400; ++t) {
    const double x = g(rng);
    const double sign = t < 200 ? 1.0 : -1.0;
    const double d = sign * (w0[0] * x + w0[1] * prev);
    const Vec reg{x, prev};
    filter.observe_fullband(d - dot(reg, filter.weights()), std::sqrt(sum_of_squares(reg)));
    const auto frame = make_frame({reg}, {d});
    const bool fired = filter.adapt(frame);
    if (fired && t < 200) fired_early = true;
    if (fired && t >= 200 && t < 216) fired_late = true;
    prev = x;
  }
  EXPECT_FALSE(fired_early);
  EXPECT_TRUE(fired_late);
}

TEST(SubbandFilter, RejectsInvalidConstruction) {
  AlgoConfig cfg;
  EXPECT_THROW(SubbandFilter(cfg, 0, 1), ParameterError);
  EXPECT_THROW(SubbandFilter(cfg, 4, 0), ParameterError);
  cfg.gamma = 2.0;
  EXPECT_THROW(SubbandFilter(cfg, 4, 1), ParameterError);
}

}  // namespace
}  // namespace l0nsaf
