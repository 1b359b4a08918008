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

#include "labtx/numerics/adam.hpp"

#include <cmath>

#include "labtx/error.hpp"

namespace labtx {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate >= 0.0)) throw ConfigError("adam: learning rate must be >= 0");
  if (!(options_.beta1 >= 0.0 && options_.beta1 < 1.0 && options_.beta2 >= 0.0 && options_.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(p.numel(), Real{0});
    v_.emplace_back(p.numel(), Real{0});
  }
}

void Adam::step() {
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    std::vector<Real>& m = m_[i];
    std::vector<Real>& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      m[j] = static_cast<Real>(b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj);
      v[j] = static_cast<Real>(b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj);
      const double m_hat = static_cast<double>(m[j]) / correction1;
      const double v_hat = static_cast<double>(v[j]) / correction2;
      w[j] = static_cast<Real>(static_cast<double>(w[j]) - lr * m_hat / (std::sqrt(v_hat) + options_.epsilon));
    }
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace labtx
