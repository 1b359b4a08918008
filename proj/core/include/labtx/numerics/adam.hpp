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

#ifndef LABTX_NUMERICS_ADAM_HPP_
#define LABTX_NUMERICS_ADAM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "labtx/numerics/tensor.hpp"

namespace labtx {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Holds one first/second moment buffer per
// parameter; parameters without an accumulated gradient are treated as
// having a zero gradient for the step.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const std::vector<Tensor>& params() const { return params_; }
  std::span<const Real> first_moment(std::size_t i) const { return m_[i]; }
  std::span<const Real> second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<Real>> m_;
  std::vector<std::vector<Real>> v_;
  AdamOptions options_;
  std::int64_t step_ = 0;
};

}  // namespace labtx

#endif  // LABTX_NUMERICS_ADAM_HPP_
