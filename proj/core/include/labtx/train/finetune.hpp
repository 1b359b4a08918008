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

// Frozen-base fine-tuning: a small head over mean-pooled final embeddings,
// optionally joined with features the base model has never seen, trained
// by grid search with k-fold cross-validation over seeded replicates.

#ifndef LABTX_TRAIN_FINETUNE_HPP_
#define LABTX_TRAIN_FINETUNE_HPP_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labtx/corpus/bag.hpp"
#include "labtx/corpus/synthetic.hpp"
#include "labtx/ecdf/ecdf.hpp"
#include "labtx/ecdf/vocab.hpp"
#include "labtx/model/forward.hpp"
#include "labtx/model/params.hpp"

namespace labtx {

enum class TaskKind { kBinary, kMulticlass, kRegression };

const char* task_kind_name(TaskKind task);
TaskKind parse_task_kind(const std::string& name);
// "ce" for classification, "mse" for regression.
const char* task_metric_name(TaskKind task);

// A labeled table as stored on disk: CSV with the label column and feature
// columns, plus a JSON sidecar {label, lab_columns, extra_columns, task}.
struct FinetuneTable {
  std::string label_column = "label";
  std::vector<std::string> lab_columns;
  std::vector<std::string> extra_columns;
  TaskKind task = TaskKind::kBinary;
  std::vector<double> labels;
  // Per row: lab_columns then extra_columns; nullopt when missing.
  std::vector<std::vector<std::optional<double>>> rows;
};

FinetuneTable read_finetune_table(const std::filesystem::path& csv, const std::filesystem::path& sidecar);
void write_finetune_table(const std::filesystem::path& csv, const std::filesystem::path& sidecar,
                          const FinetuneTable& table);

// Model-ready view of a table.
struct FinetuneDataset {
  TaskKind task = TaskKind::kBinary;
  std::size_t n_classes = 2;  // 1 for regression
  std::vector<std::string> lab_columns;    // in-vocabulary lab codes
  std::vector<std::string> extra_columns;  // extras plus out-of-vocabulary labs
  std::vector<LabBag> bags;                // one unmasked bag per row
  std::vector<double> extras;              // rows x extra_columns, NaN when missing
  std::vector<double> tabular;             // rows x (lab + extra columns), raw, NaN when missing
  std::vector<double> labels;

  std::size_t rows() const { return labels.size(); }
  std::size_t tabular_width() const { return lab_columns.size() + extra_columns.size(); }
};

// Lab columns found in the vocabulary become bag entries (eCDF-transformed,
// tokenized for the vocab's mode); other lab columns join the extras.
// Raises DataError for a row without any in-vocabulary lab value or for a
// label that does not fit the task.
FinetuneDataset prepare_finetune_dataset(const FinetuneTable& table, const Vocab& vocab, const EcdfTable& ecdfs);

// One row per synthetic bag. Binary labels are Bernoulli(sigmoid(signal *
// z_0)); regression labels are z_0 plus noise. n_extra noise columns are
// appended as extra features.
FinetuneTable make_synthetic_finetune_table(const SyntheticCorpus& corpus, TaskKind task, std::uint64_t seed,
                                            double signal = 4.0, std::size_t n_extra = 1);

struct FinetuneHead {
  TaskKind task = TaskKind::kBinary;
  std::size_t embed_dim = 0;
  std::size_t n_extra = 0;
  std::size_t n_outputs = 1;
  DenseParams extra;   // n_extra -> n_extra, ReLU; absent without extras
  DenseParams hidden;  // width -> width, ReLU
  DenseParams out;     // width -> n_outputs, task activation

  std::vector<Tensor> trainables() const;
};

FinetuneHead init_finetune_head(std::size_t embed_dim, std::size_t n_extra, TaskKind task, std::size_t n_classes,
                                std::uint64_t seed);

// Head over pooled embeddings [n, d] and extras [n, e] (undefined when the
// head has none). Returns activated predictions [n, outputs].
Tensor finetune_head_forward(const FinetuneHead& head, const Tensor& pooled, const Tensor& extras, double dropout,
                             ForwardMode mode);

// Base model in eval mode without recording, mean pool over real
// positions, then the head. Base parameters never receive gradient.
Tensor finetune_forward(const ModelParams& base, const PaddedBatch& batch, const Tensor& extras,
                        const FinetuneHead& head, double dropout, ForwardMode mode);

// Mean-pooled final embeddings [rows, d] of the frozen base.
Tensor pooled_embeddings(const ModelParams& base, std::span<const LabBag> bags, std::size_t batch_size = 256);

// BCE (binary), NLL of the true class (multiclass) or MSE (regression).
Tensor task_loss(TaskKind task, const Tensor& predictions, std::span<const double> labels);

struct FinetuneGrid {
  std::vector<std::size_t> epochs{30, 60, 90};
  std::vector<std::size_t> batch_sizes{16, 32, 64};
  std::vector<double> learning_rates{1e-4, 3e-4, 5e-4, 1e-3};
  std::vector<double> dropouts{0.1, 0.3, 0.5, 0.7};

  std::size_t cells() const {
    return epochs.size() * batch_sizes.size() * learning_rates.size() * dropouts.size();
  }
};

// Loads {epochs, batch_size, learning_rate, dropout} lists from JSON.
FinetuneGrid finetune_grid_from_json(const std::string& text);

struct FinetuneConfig {
  FinetuneGrid grid;
  std::size_t k_folds = 5;
  std::size_t replicates = 5;
  std::uint64_t seed = 0;
};

struct GridCell {
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  double dropout = 0.0;
  double c = std::numeric_limits<double>::quiet_NaN();  // logistic baseline only; epochs == 0 marks a baseline
};

struct CellResult {
  GridCell cell;
  std::vector<double> replicate_metrics;  // out-of-fold metric per replicate
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct GridSearchResult {
  std::string model;
  std::string metric;
  std::vector<CellResult> cells;
  std::size_t best = 0;
  // Base gradients observed while training heads; all zero when frozen.
  double max_base_grad = 0.0;
  std::vector<std::string> warnings;

  const CellResult& best_cell() const { return cells.at(best); }
};

// Row -> fold id; a seeded shuffle dealt round-robin.
std::vector<std::size_t> fold_assignment(std::size_t rows, std::size_t k_folds, std::uint64_t seed);
std::uint64_t replicate_seed(std::uint64_t seed, std::size_t replicate);

// Exhaustive grid, k-fold CV per replicate; the replicate metric is the mean
// held-out loss over every row. Best = lowest mean, ties to fewer epochs,
// then lower learning rate. Raises ConfigError when a held-out fold is
// smaller than a grid batch size.
GridSearchResult grid_search_finetune(const ModelParams& base, const FinetuneDataset& data,
                                      const FinetuneConfig& config);

// Same search over precomputed pooled embeddings [rows, d].
GridSearchResult grid_search_on_embeddings(const Tensor& pooled, const FinetuneDataset& data,
                                           const FinetuneConfig& config);

// Per-cell table: model,epochs,batch_size,learning_rate,dropout,c,metric,mean,min,max,best
std::string grid_table_csv(std::span<const GridSearchResult> results);
// One line per model: model,metric,mean,min,max,config
std::string summary_table_csv(std::span<const GridSearchResult> results);
// "mean (min, max)" with fixed precision.
std::string mean_min_max(const CellResult& cell, int precision = 4);

}  // namespace labtx

#endif  // LABTX_TRAIN_FINETUNE_HPP_
