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

#include "labtx/train/metrics.hpp"

#include <cmath>
#include <string>

#include "labtx/error.hpp"

namespace labtx {

double perplexity(double mean_ce) {
  if (!(mean_ce >= 0.0)) throw ContractError("perplexity: mean CE must be >= 0, got " + std::to_string(mean_ce));
  return std::exp(mean_ce);
}

double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ContractError("pearson_r: length mismatch");
  if (xs.size() < 2) throw ContractError("pearson_r: need at least 2 pairs");
  const auto n = static_cast<long double>(xs.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double dx = xs[i] - mx, dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw DataError("pearson_r: zero variance, correlation undefined");
  const double r = static_cast<double>(sxy / std::sqrt(sxx * syy));
  return std::fmax(-1.0, std::fmin(1.0, r));
}

double mean_squared_error(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.empty()) throw ContractError("mean_squared_error: bad lengths");
  long double total = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) total += (xs[i] - ys[i]) * static_cast<long double>(xs[i] - ys[i]);
  return static_cast<double>(total / static_cast<long double>(xs.size()));
}

}  // namespace labtx
