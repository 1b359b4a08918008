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

#include "labtx/ecdf/ecdf.hpp"

#include <algorithm>
#include <cmath>

#include "labtx/error.hpp"

namespace labtx {

CompressedEcdf build_ecdf(std::string code, std::span<const double> values) {
  if (values.empty()) throw DataError("eCDF for code '" + code + "': no values");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (std::isnan(v)) throw DataError("eCDF for code '" + code + "': NaN value");
    if (!std::isfinite(v)) throw DataError("eCDF for code '" + code + "': non-finite value");
  }
  std::sort(sorted.begin(), sorted.end());

  CompressedEcdf e;
  e.code = std::move(code);
  e.n_train = sorted.size();
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    // The last occurrence of each distinct value carries its cumulative count.
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    e.values.push_back(sorted[i]);
    e.probs.push_back(static_cast<double>(i + 1) / n);
  }
  return e;
}

double CompressedEcdf::apply(double x) const {
  if (std::isnan(x)) throw DataError("eCDF apply for code '" + code + "': NaN query");
  auto it = std::upper_bound(values.begin(), values.end(), x);
  if (it == values.begin()) return 0.0;
  return probs[static_cast<std::size_t>(it - values.begin()) - 1];
}

double CompressedEcdf::invert(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ContractError("eCDF invert for code '" + code + "': probability " + std::to_string(p) +
                        " outside [0, 1]");
  }
  auto it = std::lower_bound(probs.begin(), probs.end(), p);
  if (it == probs.end()) return values.back();
  return values[static_cast<std::size_t>(it - probs.begin())];
}

}  // namespace labtx
