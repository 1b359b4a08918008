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

#ifndef LABTX_NUMERICS_INIT_HPP_
#define LABTX_NUMERICS_INIT_HPP_

#include <utility>
#include <vector>

#include "labtx/numerics/ops.hpp"
#include "labtx/numerics/tensor.hpp"

namespace labtx::init {

// Uniform double in [0, 1) built from the top 53 bits of one draw. Unlike
// std::uniform_real_distribution the mapping is fixed across standard
// libraries.
double uniform01(Rng& rng);

// Uniform integer in [0, n), n > 0, by rejection (no modulo bias).
std::size_t uniform_index(Rng& rng, std::size_t n);

// Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

// Standard normal via Box-Muller on uniform01 draws.
double standard_normal(Rng& rng);

// Glorot/Xavier uniform on [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Entries drawn from N(0, stddev^2).
Tensor normal(const Shape& shape, double stddev, Rng& rng);

}  // namespace labtx::init

#endif  // LABTX_NUMERICS_INIT_HPP_
