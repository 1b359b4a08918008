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

#ifndef LABTX_ECDF_ECDF_HPP_
#define LABTX_ECDF_ECDF_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace labtx {

// Lossless empirical CDF of one lab code's training values.
//
// Only the distinct observed values are kept, each paired with the fraction
// of training observations less than or equal to it. Querying any training
// observation returns exactly rank(x) / n, the value the full-sample eCDF
// gives. Values and probabilities are strictly increasing and the last
// probability is exactly 1.
struct CompressedEcdf {
  std::string code;
  std::vector<double> values;
  std::vector<double> probs;
  std::size_t n_train = 0;

  // Step-function query: probability of the largest value <= x, 0 below the
  // support, 1 at or above its maximum. NaN raises DataError.
  double apply(double x) const;

  // Smallest stored value whose cumulative probability is >= p.
  // p outside [0, 1] raises ContractError.
  double invert(double p) const;
};

// Empty input or any NaN raises DataError.
CompressedEcdf build_ecdf(std::string code, std::span<const double> values);

// Keyed by lab code id.
using EcdfTable = std::map<std::string, CompressedEcdf>;

}  // namespace labtx

#endif  // LABTX_ECDF_ECDF_HPP_
