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

#ifndef LABTX_TRAIN_METRICS_HPP_
#define LABTX_TRAIN_METRICS_HPP_

#include <span>

namespace labtx {

// exp(mean CE). Raises ContractError for a negative CE.
double perplexity(double mean_ce);

// Sample Pearson correlation. Raises ContractError for mismatched or short
// inputs and DataError when either side has zero variance.
double pearson_r(std::span<const double> xs, std::span<const double> ys);

double mean_squared_error(std::span<const double> xs, std::span<const double> ys);

}  // namespace labtx

#endif  // LABTX_TRAIN_METRICS_HPP_
