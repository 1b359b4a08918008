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

#include "labtx/train/losses.hpp"

#include <cmath>
#include <limits>

#include "labtx/error.hpp"

namespace labtx {
namespace {

std::vector<std::size_t> target_indices(const ModelConfig& config, std::span<const MaskTarget> targets) {
  if (targets.empty()) throw ContractError("loss: batch has no masked positions");
  std::vector<std::size_t> idx;
  idx.reserve(targets.size());
  for (const MaskTarget& t : targets) idx.push_back(head_index(config, t.token));
  return idx;
}

}  // namespace

LossParts multitask_loss(const ModelConfig& config, const ModelOutput& output, std::span<const MaskTarget> targets) {
  const auto idx = target_indices(config, targets);
  if (!output.values.defined()) throw ContractError("multitask_loss needs value predictions");
  LossParts parts;
  Tensor ce = ops::nll_from_probs(output.probs, idx);
  parts.ce = static_cast<double>(ce.item());
  parts.ce_count = targets.size();

  std::vector<std::size_t> rows;
  std::vector<Real> truth;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].is_null) continue;
    rows.push_back(i);
    truth.push_back(static_cast<Real>(targets[i].value));
  }
  parts.mse_count = rows.size();
  if (rows.empty()) {
    parts.total = ce;
    return parts;
  }
  Tensor mse = ops::mse(ops::gather_rows(output.values, rows), truth);
  parts.mse = static_cast<double>(mse.item());
  parts.total = ops::add(ce, mse);
  return parts;
}

Tensor bert_mlm_loss(const ModelConfig& config, const Tensor& probs, std::span<const MaskTarget> targets) {
  return ops::nll_from_probs(probs, target_indices(config, targets));
}

LossParts masked_loss(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode) {
  const ModelOutput out = forward_masked(params, batch, mode);
  if (params.config.mode == ModelMode::kLabrador) return multitask_loss(params.config, out, batch.targets);
  LossParts parts;
  parts.total = bert_mlm_loss(params.config, out.probs, batch.targets);
  parts.ce = static_cast<double>(parts.total.item());
  parts.ce_count = batch.targets.size();
  parts.mse = std::numeric_limits<double>::quiet_NaN();
  return parts;
}

}  // namespace labtx
