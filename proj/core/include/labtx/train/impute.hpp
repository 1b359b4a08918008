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

#ifndef LABTX_TRAIN_IMPUTE_HPP_
#define LABTX_TRAIN_IMPUTE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "labtx/corpus/bag.hpp"
#include "labtx/ecdf/vocab.hpp"
#include "labtx/model/params.hpp"

namespace labtx {

enum class DecodeMethod {
  kContinuous,  // Labrador value head
  kWeighted,    // probability-weighted decile lower bounds
  kArgmax,      // lower bound of the most probable decile
};

const char* decode_method_name(DecodeMethod method);
DecodeMethod parse_decode_method(const std::string& name);

// probs is one head row of a baseline model (index = token - 1). Both raise
// DecodeError when the code's decile tokens carry no mass, and VocabError for
// an unknown or binary code.
double weighted_quantile_decode(std::span<const Real> probs, const std::string& code, const Vocab& vocab);
// Ties go to the lowest decile.
double argmax_decode(std::span<const Real> probs, const std::string& code, const Vocab& vocab);

struct CodeCorrelation {
  std::string code;
  std::size_t count = 0;
  double r = 0.0;
};

struct ImputationReport {
  DecodeMethod method = DecodeMethod::kContinuous;
  bool ablation = false;
  std::size_t n = 0;
  double r = 0.0;
  double r2 = 0.0;
  double mse = 0.0;
  // Codes with at least two pairs and non-degenerate variance, r descending.
  std::vector<CodeCorrelation> per_code;
  std::vector<std::string> codes;
  std::vector<double> truths;
  std::vector<double> predictions;
};

// Masks one valued lab per bag (uniform among positions that carry a
// value, drawn with seed) and compares the decoded prediction with the
// truth in eCDF space. ablation replaces the weights with a fresh
// initialization from seed. Raises ContractError when no bag has a valued
// lab and ConfigError when the method does not fit the model.
ImputationReport evaluate_imputation(const ModelParams& params, std::span<const LabBag> bags, const Vocab& vocab,
                                     DecodeMethod method, bool ablation, std::uint64_t seed,
                                     std::size_t batch_size = 256);

std::string imputation_report_to_json(const ImputationReport& report, bool include_pairs = false);

}  // namespace labtx

#endif  // LABTX_TRAIN_IMPUTE_HPP_
