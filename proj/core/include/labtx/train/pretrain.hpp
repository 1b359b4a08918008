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

#ifndef LABTX_TRAIN_PRETRAIN_HPP_
#define LABTX_TRAIN_PRETRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "labtx/corpus/bag.hpp"
#include "labtx/model/params.hpp"

namespace labtx {

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  // Negative keeps the model config's dropout.
  double dropout = -1.0;
  std::uint64_t seed = 0;
  // Validation and checkpoint cadence in steps.
  std::size_t checkpoint_interval = 14000;
  std::size_t mask_count = 1;
  // Draw fresh masks every time a bag is batched instead of using the
  // masks stored with the bags.
  bool remask = false;
  // Bags per validation batch; does not change the metrics.
  std::size_t eval_batch_size = 256;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base = {});

struct MetricRow {
  std::size_t step = 0;
  std::string split;
  double ce = 0.0;
  double mse = 0.0;  // NaN for the baseline
  double perplexity = 0.0;
};

inline constexpr const char* kMetricsCsvHeader = "step,split,ce,mse,perplexity";
std::string metric_row_csv(const MetricRow& row);

struct EvalMetrics {
  double ce = 0.0;
  double mse = 0.0;
  double perplexity = 0.0;
  std::size_t masked = 0;
};

// Loss over every masked position of the bags, eval mode. Bags without
// masks are skipped; ContractError if none are masked.
EvalMetrics evaluate_loss(const ModelParams& params, std::span<const LabBag> bags, std::size_t batch_size = 256);

// Metrics of predicting 0.5 for every masked value and a uniform code
// distribution; the reference for learning progress.
EvalMetrics constant_baseline_metrics(const ModelConfig& config, std::span<const LabBag> bags);

struct PretrainOutputs {
  // When set: metrics.csv is appended row by row, checkpoints go to
  // run_dir/checkpoints/step-NNNNNNN and run_dir/checkpoints/final, and a
  // non-finite loss dumps the batch to run_dir/nonfinite-batch.json.
  std::filesystem::path run_dir;
  std::function<void(const MetricRow&)> on_metric;
};

struct PretrainResult {
  ModelParams params;
  std::vector<MetricRow> log;
};

// Adam on the masked-position loss. Validation runs at step 0, every
// checkpoint_interval steps and after the last step. Raises NumericError
// on a non-finite loss.
PretrainResult pretrain(ModelParams params, std::span<const LabBag> train, std::span<const LabBag> val,
                        const TrainConfig& config, const PretrainOutputs& outputs = {});

}  // namespace labtx

#endif  // LABTX_TRAIN_PRETRAIN_HPP_
