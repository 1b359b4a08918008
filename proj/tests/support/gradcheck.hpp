// Copyright 2026 The labtx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Central finite-difference gradient checks against the tape.

#ifndef LABTX_TESTS_SUPPORT_GRADCHECK_HPP_
#define LABTX_TESTS_SUPPORT_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "labtx/numerics/init.hpp"
#include "labtx/numerics/tensor.hpp"

namespace labtx::testing {

// Step and denominator floor used everywhere a gradient is checked:
// rel = |analytic - numeric| / max(|analytic|, |numeric|, kGradFloor).
inline constexpr double kGradStep = 1e-6;
inline constexpr double kGradFloor = 1e-4;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "leaf[i]" of the largest error
};

// loss() must rebuild the scalar loss from the leaves deterministically.
inline GradCheckResult check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> leaves) {
  for (Tensor& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    Tensor out;
    {
      Tape::Recording recording(tape);
      out = loss();
    }
    tape.backward(out);
  }
  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    Tensor& leaf = leaves[l];
    const std::vector<Real> analytic = leaf.has_grad() ? std::vector<Real>(leaf.grad().begin(), leaf.grad().end())
                                                       : std::vector<Real>(leaf.numel(), Real{0});
    auto data = leaf.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Real saved = data[i];
      data[i] = saved + static_cast<Real>(kGradStep);
      const double up = static_cast<double>(loss().item());
      data[i] = saved - static_cast<Real>(kGradStep);
      const double down = static_cast<double>(loss().item());
      data[i] = saved;
      const double numeric = (up - down) / (2 * kGradStep);
      const double a = static_cast<double>(analytic[i]);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradFloor});
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = "leaf " + std::to_string(l) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, double stddev = 1.0) {
  return init::normal(shape, stddev, rng);
}

}  // namespace labtx::testing

#endif  // LABTX_TESTS_SUPPORT_GRADCHECK_HPP_
