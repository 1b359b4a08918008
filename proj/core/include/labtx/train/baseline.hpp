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

// Linear baselines on the raw tabular features: L2-regularized logistic
// regression (binary or multinomial) and ordinary least squares, tuned by
// the same k-fold protocol as fine-tuning.

#ifndef LABTX_TRAIN_BASELINE_HPP_
#define LABTX_TRAIN_BASELINE_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "labtx/train/finetune.hpp"

namespace labtx {

// Weights are row-major [features, outputs]. Binary logistic has one output
// (probability of class 1), multinomial has one per class.
struct LinearModel {
  TaskKind task = TaskKind::kBinary;
  std::size_t n_features = 0;
  std::size_t n_outputs = 1;
  std::vector<double> weights;
  std::vector<double> intercept;
  std::string warning;  // set when OLS had to fall back to least norm
};

struct LogisticOptions {
  double c = 1.0;  // inverse regularization strength
  std::size_t max_iterations = 1000;
  double gradient_tolerance = 1e-10;
  std::size_t history = 10;
};

// Minimizes mean cross-entropy + ||W||^2 / (2 C n) with L-BFGS; the
// intercept is not penalized. features is row-major [n, p]; labels are
// class indices. n_classes == 2 fits the binary model.
LinearModel fit_logistic(std::span<const double> features, std::size_t n_features, std::span<const double> labels,
                         std::size_t n_classes, const LogisticOptions& options);

// Unregularized least squares with intercept. A rank-deficient design gets
// the minimum-norm solution and a warning in LinearModel::warning.
LinearModel fit_ols(std::span<const double> features, std::size_t n_features, std::span<const double> targets);

// Row-major [n, outputs] probabilities or fitted values.
std::vector<double> predict_linear(const LinearModel& model, std::span<const double> features);

// Mean cross-entropy or MSE of predictions from predict_linear.
double linear_task_loss(TaskKind task, std::size_t n_outputs, std::span<const double> predictions,
                        std::span<const double> labels);

struct LinearBaselineConfig {
  std::vector<double> c_grid{1e-4, 1e-3, 1e-2, 1e-1};
  std::size_t k_folds = 5;
  std::size_t replicates = 5;
  std::uint64_t seed = 0;
};

// Replicate r uses fold_assignment(rows, k, replicate_seed(seed, r)), the
// same folds as grid_search_finetune with the same seed. Features are
// mean-imputed and z-scored with training-fold statistics. Regression tasks
// fit OLS (one cell, no C).
GridSearchResult fit_linear_baseline(const FinetuneDataset& data, const LinearBaselineConfig& config);

}  // namespace labtx

#endif  // LABTX_TRAIN_BASELINE_HPP_
