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

#include "labtx/train/impute.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"
#include "labtx/error.hpp"
#include "labtx/model/forward.hpp"
#include "labtx/numerics/init.hpp"
#include "labtx/train/metrics.hpp"

namespace labtx {
namespace {

std::array<double, kNumDeciles> decile_mass(std::span<const Real> probs, const std::string& code, const Vocab& vocab) {
  if (vocab.mode() != VocabMode::kDecile) throw VocabError("decile decoding needs a decile vocabulary");
  if (vocab.is_binary(code)) throw VocabError("code '" + code + "' is binary and has no deciles");
  std::array<double, kNumDeciles> mass{};
  for (int d = 0; d < kNumDeciles; ++d) {
    const Token t = vocab.decile_token(code, d);
    if (static_cast<std::size_t>(t) > probs.size()) throw DimensionError("decode: probability row too short");
    mass[d] = static_cast<double>(probs[static_cast<std::size_t>(t) - 1]);
  }
  return mass;
}

double lower_bound_of(int decile) { return static_cast<double>(decile) / kNumDeciles; }

}  // namespace

const char* decode_method_name(DecodeMethod method) {
  switch (method) {
    case DecodeMethod::kContinuous: return "continuous";
    case DecodeMethod::kWeighted: return "weighted";
    case DecodeMethod::kArgmax: return "argmax";
  }
  return "?";
}

DecodeMethod parse_decode_method(const std::string& name) {
  if (name == "continuous") return DecodeMethod::kContinuous;
  if (name == "weighted" || name == "weighted-quantile") return DecodeMethod::kWeighted;
  if (name == "argmax") return DecodeMethod::kArgmax;
  throw ConfigError("unknown decode method '" + name + "' (continuous, weighted, argmax)");
}

double weighted_quantile_decode(std::span<const Real> probs, const std::string& code, const Vocab& vocab) {
  const auto mass = decile_mass(probs, code, vocab);
  double total = 0.0, acc = 0.0;
  for (int d = 0; d < kNumDeciles; ++d) {
    total += mass[d];
    acc += mass[d] * lower_bound_of(d);
  }
  if (!(total > 0.0)) throw DecodeError("code '" + code + "': decile tokens carry no probability mass");
  return acc / total;
}

double argmax_decode(std::span<const Real> probs, const std::string& code, const Vocab& vocab) {
  const auto mass = decile_mass(probs, code, vocab);
  int best = 0;
  for (int d = 1; d < kNumDeciles; ++d) {
    if (mass[d] > mass[best]) best = d;
  }
  if (!(mass[best] > 0.0)) throw DecodeError("code '" + code + "': decile tokens carry no probability mass");
  return lower_bound_of(best);
}

ImputationReport evaluate_imputation(const ModelParams& params, std::span<const LabBag> bags, const Vocab& vocab,
                                     DecodeMethod method, bool ablation, std::uint64_t seed,
                                     std::size_t batch_size) {
  const bool labrador = params.config.mode == ModelMode::kLabrador;
  if (labrador != (method == DecodeMethod::kContinuous)) {
    throw ConfigError(std::string("decode method '") + decode_method_name(method) + "' does not fit a " +
                      model_mode_name(params.config.mode) + " model");
  }
  if (labrador != (vocab.mode() == VocabMode::kContinuous)) throw ConfigError("vocabulary does not fit the model");
  if (batch_size < 1) throw ConfigError("evaluate_imputation: batch_size must be >= 1");

  const ModelParams model = ablation ? init_params(params.config, seed) : params;
  const Token mask_token = params.config.mask_token();
  Rng rng(seed);

  ImputationReport report;
  report.method = method;
  report.ablation = ablation;
  std::vector<LabBag> chunk;
  std::vector<std::string> chunk_codes;
  const auto flush = [&] {
    if (chunk.empty()) return;
    NoGradGuard no_grad;
    const PaddedBatch batch = pad_batch(chunk);
    const ModelOutput out = forward_masked(model, batch, ForwardMode{});
    const std::size_t width = out.probs.dim(1);
    for (std::size_t i = 0; i < batch.targets.size(); ++i) {
      double pred = 0.0;
      if (method == DecodeMethod::kContinuous) {
        pred = static_cast<double>(out.values.data()[i]);
      } else {
        const auto row = out.probs.data().subspan(i * width, width);
        pred = method == DecodeMethod::kWeighted ? weighted_quantile_decode(row, chunk_codes[i], vocab)
                                                 : argmax_decode(row, chunk_codes[i], vocab);
      }
      report.codes.push_back(chunk_codes[i]);
      report.truths.push_back(batch.targets[i].value);
      report.predictions.push_back(pred);
    }
    chunk.clear();
    chunk_codes.clear();
  };

  for (const LabBag& stored : bags) {
    const LabBag bag = unmask(stored);
    std::vector<std::size_t> valued;
    for (std::size_t p = 0; p < bag.size(); ++p) {
      if (bag.null_flags[p]) continue;
      if (!labrador && !vocab.decile_of(bag.tokens[p])) continue;
      valued.push_back(p);
    }
    if (valued.empty()) continue;
    const std::size_t pos = valued[init::uniform_index(rng, valued.size())];
    chunk_codes.push_back(vocab.code_of(bag.tokens[pos]));
    const std::size_t positions[] = {pos};
    chunk.push_back(mask_positions(bag, positions, mask_token));
    if (chunk.size() == batch_size) flush();
  }
  flush();
  if (report.truths.empty()) throw ContractError("evaluate_imputation: no bag has a valued lab to mask");

  report.n = report.truths.size();
  report.mse = mean_squared_error(report.truths, report.predictions);
  report.r = report.n >= 2 ? pearson_r(report.truths, report.predictions) : 0.0;
  report.r2 = report.r * report.r;

  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_code;
  for (std::size_t i = 0; i < report.n; ++i) {
    auto& [t, p] = by_code[report.codes[i]];
    t.push_back(report.truths[i]);
    p.push_back(report.predictions[i]);
  }
  for (const auto& [code, tp] : by_code) {
    if (tp.first.size() < 2) continue;
    try {
      report.per_code.push_back({code, tp.first.size(), pearson_r(tp.first, tp.second)});
    } catch (const DataError&) {
      // Constant truths or predictions: correlation undefined for this code.
    }
  }
  std::stable_sort(report.per_code.begin(), report.per_code.end(),
                   [](const CodeCorrelation& a, const CodeCorrelation& b) { return a.r > b.r; });
  return report;
}

std::string imputation_report_to_json(const ImputationReport& report, bool include_pairs) {
  nlohmann::json per_code = nlohmann::json::array();
  for (const CodeCorrelation& c : report.per_code) per_code.push_back({{"code", c.code}, {"count", c.count}, {"r", c.r}});
  nlohmann::json doc = {{"decode", decode_method_name(report.method)},
                        {"ablation", report.ablation},
                        {"n", report.n},
                        {"r", report.r},
                        {"r2", report.r2},
                        {"mse", report.mse},
                        {"per_code", per_code}};
  if (include_pairs) {
    doc["pairs"] = {{"code", report.codes}, {"truth", report.truths}, {"prediction", report.predictions}};
  }
  return doc.dump(1) + "\n";
}

}  // namespace labtx
