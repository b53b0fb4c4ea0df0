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

// Zero-attraction machinery of the L0-norm constrained update.
//
// The attractor pulls small taps toward zero inside |w_j| <= 1/theta:
//   f_j = -theta^2 w_j - theta   for -1/theta <= w_j < 0
//   f_j = -theta^2 w_j + theta   for  0 < w_j <= 1/theta
//   f_j = 0                      otherwise
// and the update subtracts kappa * f. The same vector is also written as
// S w + G with S diagonal, which is the form the MSD analysis works with.

#ifndef L0NSAF_SPARSITY_HPP_
#define L0NSAF_SPARSITY_HPP_

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "l0nsaf/error.hpp"

namespace l0nsaf {

struct AttractorParams {
  double theta = 5.0;
  double alpha_approx = 5.0;

  void validate() const {
    if (!(theta > 0.0)) throw ParameterError("theta must be > 0", "theta");
    if (!(alpha_approx > 0.0)) {
      throw ParameterError("alpha_approx must be > 0", "alpha_approx");
    }
  }
};

template <std::floating_point T>
struct AttractorDecomposition {
  std::vector<T> s_diag;  // entries in {-theta^2, 0}
  std::vector<T> g_vec;   // entries in {-theta, 0, +theta}
};

// Sum_j (1 - exp(-alpha |w_j|)). Diagnostic only.
template <std::floating_point T>
T l0_norm_approx(std::span<const T> w, T alpha_approx) {
  if (!(alpha_approx > T(0))) {
    throw ParameterError("alpha_approx must be > 0", "alpha_approx");
  }
  T acc = 0;
  for (T wj : w) acc += T(1) - std::exp(-alpha_approx * std::abs(wj));
  return acc;
}

template <std::floating_point T>
constexpr bool in_attraction_range(T wj, T theta) {
  return wj != T(0) && std::abs(wj) <= T(1) / theta;
}

template <std::floating_point T>
constexpr T attractor_s(T wj, T theta) {
  return in_attraction_range(wj, theta) ? -theta * theta : T(0);
}

template <std::floating_point T>
constexpr T attractor_g(T wj, T theta) {
  if (!in_attraction_range(wj, theta)) return T(0);
  return wj < T(0) ? -theta : theta;
}

// Piecewise form, written out branch by branch.
template <std::floating_point T>
std::vector<T> zero_attractor_f(std::span<const T> w, T theta) {
  if (!(theta > T(0))) throw ParameterError("theta must be > 0", "theta");
  const T limit = T(1) / theta;
  std::vector<T> f(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const T wj = w[j];
    if (-limit <= wj && wj < T(0)) {
      f[j] = -theta * theta * wj - theta;
    } else if (T(0) < wj && wj <= limit) {
      f[j] = -theta * theta * wj + theta;
    } else {
      f[j] = T(0);
    }
  }
  return f;
}

template <std::floating_point T>
AttractorDecomposition<T> attractor_decomposition(std::span<const T> w, T theta) {
  if (!(theta > T(0))) throw ParameterError("theta must be > 0", "theta");
  AttractorDecomposition<T> dec;
  dec.s_diag.resize(w.size());
  dec.g_vec.resize(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    dec.s_diag[j] = attractor_s(w[j], theta);
    dec.g_vec[j] = attractor_g(w[j], theta);
  }
  return dec;
}

// S w + G.
template <std::floating_point T>
std::vector<T> attractor_vector(const AttractorDecomposition<T>& dec,
                                std::span<const T> w) {
  std::vector<T> out(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    out[j] = dec.s_diag[j] * w[j] + dec.g_vec[j];
  }
  return out;
}

}  // namespace l0nsaf

#endif  // L0NSAF_SPARSITY_HPP_
