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

#ifndef LABTX_TRAIN_LOSSES_HPP_
#define LABTX_TRAIN_LOSSES_HPP_

#include <span>

#include "labtx/corpus/bag.hpp"
#include "labtx/model/forward.hpp"

namespace labtx {

// Loss over masked positions. total = ce + mse as one tape node; ce and mse
// are plain copies of the two terms. mse is NaN for the baseline, and 0 when
// every masked truth is null.
struct LossParts {
  Tensor total;
  double ce = 0.0;
  double mse = 0.0;
  std::size_t ce_count = 0;
  std::size_t mse_count = 0;
};

// Mean CE of the true code over masked rows plus mean squared error of the
// value head over masked rows whose truth is not null. output rows align
// with targets. Raises ContractError when there are no targets.
LossParts multitask_loss(const ModelConfig& config, const ModelOutput& output, std::span<const MaskTarget> targets);

// Mean CE of the true decile token over masked rows.
Tensor bert_mlm_loss(const ModelConfig& config, const Tensor& probs, std::span<const MaskTarget> targets);

// Forward at the masked positions of a batch plus the loss for the model's
// mode.
LossParts masked_loss(const ModelParams& params, const PaddedBatch& batch, ForwardMode mode);

}  // namespace labtx

#endif  // LABTX_TRAIN_LOSSES_HPP_
