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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "labtx/corpus/pipeline.hpp"
#include "labtx/corpus/synthetic.hpp"
#include "labtx/error.hpp"
#include "labtx/model/forward.hpp"
#include "labtx/numerics/init.hpp"
#include "labtx/train/baseline.hpp"
#include "labtx/train/finetune.hpp"
#include "labtx/train/impute.hpp"
#include "labtx/train/losses.hpp"
#include "labtx/train/metrics.hpp"
#include "labtx/train/pretrain.hpp"

namespace labtx {
namespace {

using Vec = std::vector<double>;

ModelConfig small(const Vocab& vocab) {
  ModelConfig c;
  c.mode = vocab.mode() == VocabMode::kContinuous ? ModelMode::kLabrador : ModelMode::kBert;
  c.d_model = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.ff_dim = 12;
  return config_for_vocab(vocab, c);
}

SyntheticCorpus toy_corpus(std::size_t patients = 150) {
  SyntheticOptions o;
  o.n_patients = patients;
  o.n_codes = 6;
  o.panel_size = 4;
  o.loading_strength = 2.0;
  o.seed = 17;
  return generate_synthetic_corpus(o);
}

const PreprocessedCorpus& toy(VocabMode mode) {
  static const PreprocessedCorpus continuous = [] {
    PreprocessOptions o;
    o.seed = 2;
    return preprocess_events(toy_corpus().events, o);
  }();
  static const PreprocessedCorpus decile = [] {
    PreprocessOptions o;
    o.seed = 2;
    o.mode = VocabMode::kDecile;
    return preprocess_events(toy_corpus().events, o);
  }();
  return mode == VocabMode::kContinuous ? continuous : decile;
}

Vec to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// --- losses -----------------------------------------------------------------

TEST(Losses, UniformDistributionGivesLogV) {
  for (std::size_t v : {2u, 7u, 529u}) {
    ModelConfig c;
    c.vocab_size = v;
    std::vector<MaskTarget> targets{{0, 0, 1, 0.25, false}, {0, 1, static_cast<Token>(v), 0.75, false}};
    ModelOutput out{Tensor({2, v}, Real{1} / static_cast<Real>(v)), Tensor({2, 1}, Real{0.5})};
    const LossParts parts = multitask_loss(c, out, targets);
    EXPECT_NEAR(parts.ce, std::log(static_cast<double>(v)), 1e-9);
    EXPECT_NEAR(parts.mse, 0.0625, 1e-15);
    EXPECT_NEAR(parts.total.item(), parts.ce + parts.mse, 1e-15);
    c.mode = ModelMode::kBert;
    EXPECT_NEAR(bert_mlm_loss(c, out.probs, targets).item(), std::log(static_cast<double>(v)), 1e-9);
  }
}

TEST(Losses, NullTruthsSkipTheValueTerm) {
  ModelConfig c;
  c.vocab_size = 3;
  const Tensor probs({3, 3}, std::vector<Real>{1, 0, 0, 0, 1, 0, 0.5, 0.5, 0});
  const Tensor values({3, 1}, std::vector<Real>{0.2, 0.9, 0.4});
  std::vector<MaskTarget> targets{{0, 0, 1, 0.0, false}, {0, 1, 2, 0.0, true}, {0, 2, 1, 0.0, true}};
  LossParts parts = multitask_loss(c, {probs, values}, targets);
  EXPECT_NEAR(parts.ce, std::log(2.0) / 3.0, 1e-15);
  EXPECT_NEAR(parts.mse, 0.04, 1e-15);
  EXPECT_EQ(parts.ce_count, 3u);
  EXPECT_EQ(parts.mse_count, 1u);
  targets[0].is_null = true;
  parts = multitask_loss(c, {probs, values}, targets);
  EXPECT_EQ(parts.mse, 0.0);
  EXPECT_THROW(multitask_loss(c, {probs, values}, {}), ContractError);
}

TEST(Losses, MaskedLossMatchesForward) {
  const PreprocessedCorpus& data = toy(VocabMode::kContinuous);
  const ModelParams p = init_params(small(data.vocab), 1);
  const PaddedBatch batch = pad_batch(std::span(data.train).first(8));
  const LossParts parts = masked_loss(p, batch, {});
  const LossParts again = multitask_loss(p.config, forward_masked(p, batch, {}), batch.targets);
  EXPECT_EQ(parts.ce, again.ce);
  EXPECT_EQ(parts.mse, again.mse);
  EXPECT_NEAR(parts.total.item(), parts.ce + parts.mse, 1e-15);
}

// --- metrics ----------------------------------------------------------------

TEST(Metrics, Perplexity) {
  EXPECT_EQ(perplexity(0.0), 1.0);
  for (double v : {2.0, 22.0, 4251.0}) EXPECT_NEAR(perplexity(std::log(v)), v, 1e-9 * v);
  EXPECT_NEAR(perplexity(0.0198), 1.02, 5e-4);
  EXPECT_THROW(perplexity(-0.1), ContractError);
}

TEST(Metrics, PearsonExamples) {
  const Vec x{1, 2, 3, 4};
  EXPECT_NEAR(pearson_r(x, Vec{3, 5, 7, 9}), 1.0, 1e-15);
  EXPECT_NEAR(pearson_r(x, Vec{4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_THROW(pearson_r(x, Vec{1, 1, 1, 1}), DataError);
  EXPECT_THROW(pearson_r(Vec{1}, Vec{2}), ContractError);
  EXPECT_THROW(pearson_r(x, Vec{1, 2}), ContractError);
}

TEST(Metrics, PearsonMatchesLongDoubleOracle) {
  const Vec x{0.3, -1.2, 2.5, 0.0, 4.1}, y{1.0, 0.2, 2.2, -0.7, 3.3};
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    mx += x[i] / 5.0L;
    my += y[i] / 5.0L;
  }
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  EXPECT_NEAR(pearson_r(x, y), static_cast<double>(sxy / std::sqrt(sxx * syy)), 1e-14);
  EXPECT_NEAR(mean_squared_error(Vec{1, 2}, Vec{2, 4}), 2.5, 1e-15);
}

// --- pretraining --------------------------------------------------------------

TrainConfig quick(std::size_t steps) {
  TrainConfig t;
  t.steps = steps;
  t.batch_size = 8;
  t.checkpoint_interval = steps;
  t.seed = 4;
  return t;
}

TEST(Pretrain, FixedSeedIsDeterministic) {
  for (VocabMode mode : {VocabMode::kContinuous, VocabMode::kDecile}) {
    const PreprocessedCorpus& data = toy(mode);
    const ModelConfig c = small(data.vocab);
    const PretrainResult a = pretrain(init_params(c, 3), data.train, data.val, quick(15));
    const PretrainResult b = pretrain(init_params(c, 3), data.train, data.val, quick(15));
    const auto ta = a.params.named_tensors(), tb = b.params.named_tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) ASSERT_EQ(to_vec(ta[i].second), to_vec(tb[i].second)) << ta[i].first;
    ASSERT_EQ(a.log.size(), b.log.size());
    EXPECT_EQ(a.log.back().ce, b.log.back().ce);
  }
}

TEST(Pretrain, ZeroLearningRateLeavesWeightsUnchanged) {
  const PreprocessedCorpus& data = toy(VocabMode::kContinuous);
  const ModelParams start = init_params(small(data.vocab), 3);
  const ModelParams copy = clone_params(start);
  TrainConfig t = quick(5);
  t.learning_rate = 0.0;
  const PretrainResult r = pretrain(start, data.train, data.val, t);
  const auto a = r.params.named_tensors(), b = copy.named_tensors();
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(to_vec(a[i].second), to_vec(b[i].second)) << a[i].first;
}

TEST(Pretrain, ValidationLossFallsAndIsLogged) {
  const PreprocessedCorpus& data = toy(VocabMode::kContinuous);
  TrainConfig t = quick(300);
  t.checkpoint_interval = 100;
  t.remask = true;
  std::vector<MetricRow> seen;
  PretrainOutputs outputs;
  outputs.on_metric = [&](const MetricRow& row) { seen.push_back(row); };
  const PretrainResult r = pretrain(init_params(small(data.vocab), 3), data.train, data.val, t, outputs);
  std::vector<MetricRow> val;
  for (const MetricRow& row : r.log) {
    if (row.split == "val") val.push_back(row);
  }
  ASSERT_EQ(val.size(), 4u);
  EXPECT_EQ(val.front().step, 0u);
  EXPECT_EQ(val.back().step, 300u);
  EXPECT_LT(val.back().ce, val.front().ce);
  EXPECT_LT(val.back().mse, val.front().mse);
  EXPECT_EQ(seen.size(), r.log.size());
  EXPECT_EQ(metric_row_csv(val.front()).substr(0, 6), "0,val,");
}

TEST(Pretrain, InvalidConfigRaises) {
  TrainConfig t;
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = {};
  t.learning_rate = -1;
  EXPECT_THROW(t.validate(), ConfigError);
  const TrainConfig round = train_config_from_json(train_config_to_json(quick(7)));
  EXPECT_EQ(round.steps, 7u);
  EXPECT_EQ(round.batch_size, 8u);
}

TEST(Evaluate, BatchSizeDoesNotChangeMetrics) {
  const PreprocessedCorpus& data = toy(VocabMode::kContinuous);
  const ModelParams p = init_params(small(data.vocab), 5);
  const EvalMetrics a = evaluate_loss(p, data.val, 1), b = evaluate_loss(p, data.val, 256);
  EXPECT_NEAR(a.ce, b.ce, 1e-12);
  EXPECT_NEAR(a.mse, b.mse, 1e-12);
  EXPECT_EQ(a.masked, b.masked);
  EXPECT_NEAR(a.perplexity, std::exp(a.ce), 1e-12);
}

TEST(Evaluate, ConstantBaselineOracle) {
  const PreprocessedCorpus& data = toy(VocabMode::kContinuous);
  const ModelConfig c = small(data.vocab);
  double sq = 0;
  std::size_t n = 0, masked = 0;
  for (const LabBag& bag : data.val) {
    for (const MaskedTruth& m : bag.masked) {
      ++masked;
      if (m.is_null) continue;
      sq += (m.value - 0.5) * (m.value - 0.5);
      ++n;
    }
  }
  const EvalMetrics m = constant_baseline_metrics(c, data.val);
  EXPECT_NEAR(m.ce, std::log(static_cast<double>(c.head_width())), 1e-12);
  EXPECT_NEAR(m.mse, sq / static_cast<double>(n), 1e-12);
  EXPECT_EQ(m.masked, masked);
}

// --- decoding -----------------------------------------------------------------

struct DecileFixture {
  Vocab vocab = build_decile_vocab({{"a", build_ecdf("a", Vec{1, 2, 3})}, {"b", build_ecdf("b", Vec{1, 2})}},
                                   {{"a", 5}, {"b", 3}, {"flag", 2}}, {"flag"});
  std::vector<Real> row() const { return std::vector<Real>(static_cast<std::size_t>(vocab.size()), 0.0); }
  void put(std::vector<Real>& r, const std::string& code, int decile, Real p) const {
    r[static_cast<std::size_t>(vocab.decile_token(code, decile)) - 1] = p;
  }
};

TEST(Decode, HandExamples) {
  const DecileFixture f;
  auto r = f.row();
  f.put(r, "a", 0, 1.0);
  EXPECT_EQ(weighted_quantile_decode(r, "a", f.vocab), 0.0);
  EXPECT_EQ(argmax_decode(r, "a", f.vocab), 0.0);
  r = f.row();
  for (int d = 0; d < kNumDeciles; ++d) f.put(r, "a", d, 0.1);
  EXPECT_NEAR(weighted_quantile_decode(r, "a", f.vocab), 0.45, 1e-15);
  r = f.row();
  f.put(r, "b", 7, 1.0);
  EXPECT_NEAR(weighted_quantile_decode(r, "b", f.vocab), 0.7, 1e-15);
  EXPECT_NEAR(argmax_decode(r, "b", f.vocab), 0.7, 1e-15);
  r = f.row();
  f.put(r, "a", 2, 0.4);
  f.put(r, "a", 3, 0.4);
  f.put(r, "a", 9, 0.2);
  EXPECT_NEAR(argmax_decode(r, "a", f.vocab), 0.2, 1e-15);
}

TEST(Decode, WeightedMatchesHandFormula) {
  const DecileFixture f;
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto r = f.row();
    for (Real& v : r) v = init::uniform01(rng);
    double num = 0, den = 0;
    for (int d = 0; d < kNumDeciles; ++d) {
      const double p = r[static_cast<std::size_t>(f.vocab.decile_token("a", d)) - 1];
      num += p * d / 10.0;
      den += p;
    }
    EXPECT_NEAR(weighted_quantile_decode(r, "a", f.vocab), num / den, 1e-14);
  }
}

TEST(Decode, ErrorCases) {
  const DecileFixture f;
  auto r = f.row();
  r[static_cast<std::size_t>(f.vocab.missing_token("a")) - 1] = 1.0;
  EXPECT_THROW(weighted_quantile_decode(r, "a", f.vocab), DecodeError);
  EXPECT_THROW(weighted_quantile_decode(r, "flag", f.vocab), VocabError);
  EXPECT_THROW(argmax_decode(r, "zzz", f.vocab), VocabError);
  EXPECT_THROW(parse_decode_method("median"), ConfigError);
}

// --- imputation ---------------------------------------------------------------

TEST(Imputation, ReportsAndAblationTag) {
  const PreprocessedCorpus& data = toy(VocabMode::kContinuous);
  const ModelParams p = init_params(small(data.vocab), 6);
  const ImputationReport a = evaluate_imputation(p, data.test, data.vocab, DecodeMethod::kContinuous, false, 1);
  const ImputationReport b = evaluate_imputation(p, data.test, data.vocab, DecodeMethod::kContinuous, false, 1);
  EXPECT_EQ(a.predictions, b.predictions);
  EXPECT_FALSE(a.ablation);
  EXPECT_EQ(a.n, a.truths.size());
  EXPECT_NEAR(a.r, pearson_r(a.truths, a.predictions), 1e-12);
  EXPECT_NEAR(a.r2, a.r * a.r, 1e-12);
  const ImputationReport ab = evaluate_imputation(p, data.test, data.vocab, DecodeMethod::kContinuous, true, 1);
  EXPECT_TRUE(ab.ablation);
  EXPECT_EQ(ab.truths, a.truths);
  EXPECT_NE(ab.predictions, a.predictions);
  EXPECT_NE(imputation_report_to_json(ab).find("\"ablation\": true"), std::string::npos);
  EXPECT_THROW(evaluate_imputation(p, data.test, data.vocab, DecodeMethod::kWeighted, false, 1), ConfigError);
}

TEST(Imputation, BaselineDecodesBothWays) {
  const PreprocessedCorpus& data = toy(VocabMode::kDecile);
  const ModelParams p = init_params(small(data.vocab), 6);
  const ImputationReport w = evaluate_imputation(p, data.test, data.vocab, DecodeMethod::kWeighted, false, 1);
  const ImputationReport m = evaluate_imputation(p, data.test, data.vocab, DecodeMethod::kArgmax, false, 1);
  EXPECT_EQ(w.truths, m.truths);
  for (double v : m.predictions) EXPECT_EQ(std::round(v * 10) / 10, v);
  EXPECT_THROW(evaluate_imputation(p, data.test, data.vocab, DecodeMethod::kContinuous, false, 1), ConfigError);
}

// --- fine-tuning ----------------------------------------------------------------

TEST(Folds, BalancedAndDeterministic) {
  const auto a = fold_assignment(23, 5, 9);
  EXPECT_EQ(a, fold_assignment(23, 5, 9));
  EXPECT_NE(a, fold_assignment(23, 5, 10));
  std::vector<std::size_t> sizes(5, 0);
  for (std::size_t f : a) ++sizes.at(f);
  EXPECT_EQ(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
  EXPECT_NE(replicate_seed(1, 0), replicate_seed(1, 1));
}

TEST(FinetuneGrid, DefaultAndJson) {
  const FinetuneGrid g;
  EXPECT_EQ(g.cells(), 144u);
  const FinetuneGrid j = finetune_grid_from_json(R"({"epochs":[2],"batch_size":[4,8],"learning_rate":[0.01],"dropout":[0.1]})");
  EXPECT_EQ(j.cells(), 2u);
  EXPECT_THROW(finetune_grid_from_json(R"({"epochs":[]})"), ConfigError);
}

FinetuneDataset toy_dataset(TaskKind task, std::size_t n_extra = 1) {
  const PreprocessedCorpus& data = toy(VocabMode::kContinuous);
  return prepare_finetune_dataset(make_synthetic_finetune_table(toy_corpus(), task, 3, 4.0, n_extra), data.vocab,
                                  data.ecdfs);
}

FinetuneConfig tiny_search(std::size_t epochs = 3) {
  FinetuneConfig c;
  c.grid.epochs = {epochs};
  c.grid.batch_sizes = {16};
  c.grid.learning_rates = {1e-2};
  c.grid.dropouts = {0.1};
  c.k_folds = 3;
  c.replicates = 2;
  c.seed = 5;
  return c;
}

TEST(Finetune, DatasetLayout) {
  const FinetuneDataset d = toy_dataset(TaskKind::kBinary, 2);
  EXPECT_EQ(d.extra_columns.size(), 2u);
  EXPECT_EQ(d.extras.size(), d.rows() * 2);
  EXPECT_EQ(d.tabular.size(), d.rows() * d.tabular_width());
  EXPECT_EQ(d.n_classes, 2u);
  for (const LabBag& bag : d.bags) EXPECT_TRUE(bag.masked.empty());
  EXPECT_EQ(toy_dataset(TaskKind::kRegression).n_classes, 1u);
}

TEST(Finetune, FrozenBaseAndDeterminism) {
  const PreprocessedCorpus& data = toy(VocabMode::kContinuous);
  const ModelParams base = init_params(small(data.vocab), 8);
  const ModelParams copy = clone_params(base);
  const FinetuneDataset d = toy_dataset(TaskKind::kBinary);
  const GridSearchResult a = grid_search_finetune(base, d, tiny_search());
  const GridSearchResult b = grid_search_finetune(base, d, tiny_search());
  EXPECT_EQ(a.max_base_grad, 0.0);
  EXPECT_EQ(a.cells[0].replicate_metrics, b.cells[0].replicate_metrics);
  EXPECT_EQ(a.cells[0].replicate_metrics.size(), 2u);
  const auto x = base.named_tensors(), y = copy.named_tensors();
  for (std::size_t i = 0; i < x.size(); ++i) ASSERT_EQ(to_vec(x[i].second), to_vec(y[i].second));
}

TEST(Finetune, CellsDoNotDependOnTheRestOfTheGrid) {
  const FinetuneDataset d = toy_dataset(TaskKind::kMulticlass);
  const Tensor pooled = pooled_embeddings(init_params(small(toy(VocabMode::kContinuous).vocab), 8), d.bags);
  FinetuneConfig wide = tiny_search(4);
  wide.grid.epochs = {2, 4};
  wide.grid.dropouts = {0.1, 0.3};
  const GridSearchResult one = grid_search_on_embeddings(pooled, d, tiny_search(2));
  const GridSearchResult all = grid_search_on_embeddings(pooled, d, wide);
  ASSERT_EQ(all.cells.size(), 4u);
  const auto match = std::find_if(all.cells.begin(), all.cells.end(), [](const CellResult& c) {
    return c.cell.epochs == 2 && c.cell.dropout == 0.1;
  });
  ASSERT_NE(match, all.cells.end());
  EXPECT_EQ(match->replicate_metrics, one.cells[0].replicate_metrics);
}

TEST(Finetune, SeparableSignalBeatsChance) {
  FinetuneDataset d = toy_dataset(TaskKind::kBinary, 0);
  EXPECT_TRUE(d.extra_columns.empty());
  // Pooled features carry the label directly.
  std::vector<Real> feats(d.rows() * 2);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    feats[2 * i] = d.labels[i] > 0.5 ? 1.0 : -1.0;
    feats[2 * i + 1] = 0.1 * static_cast<double>(i % 7);
  }
  FinetuneConfig c = tiny_search(20);
  const GridSearchResult r = grid_search_on_embeddings(Tensor({d.rows(), 2}, feats), d, c);
  EXPECT_LT(r.best_cell().mean, 0.1 * std::log(2.0));
  EXPECT_LE(r.best_cell().min, r.best_cell().mean);
  EXPECT_GE(r.best_cell().max, r.best_cell().mean);
}

TEST(Finetune, SmallFoldsRaise) {
  const FinetuneDataset d = toy_dataset(TaskKind::kBinary);
  FinetuneConfig c = tiny_search();
  c.grid.batch_sizes = {d.rows()};
  EXPECT_THROW(grid_search_on_embeddings(Tensor({d.rows(), 2}, Real{0}), d, c), ConfigError);
}

TEST(Finetune, TaskLossOracle) {
  const Tensor p({2, 1}, std::vector<Real>{0.8, 0.3});
  EXPECT_NEAR(task_loss(TaskKind::kBinary, p, Vec{1, 0}).item(), -(std::log(0.8) + std::log(0.7)) / 2, 1e-12);
  EXPECT_NEAR(task_loss(TaskKind::kRegression, p, Vec{1, 0}).item(), (0.04 + 0.09) / 2, 1e-12);
  const Tensor q({1, 3}, std::vector<Real>{0.2, 0.5, 0.3});
  EXPECT_NEAR(task_loss(TaskKind::kMulticlass, q, Vec{2}).item(), -std::log(0.3), 1e-12);
}

TEST(Finetune, TablesShareOneFormat) {
  const FinetuneDataset d = toy_dataset(TaskKind::kBinary);
  const Tensor pooled = pooled_embeddings(init_params(small(toy(VocabMode::kContinuous).vocab), 8), d.bags);
  LinearBaselineConfig bc;
  bc.k_folds = 3;
  bc.replicates = 2;
  bc.seed = 5;
  const std::vector<GridSearchResult> results{grid_search_on_embeddings(pooled, d, tiny_search()),
                                              fit_linear_baseline(d, bc)};
  EXPECT_EQ(results[1].model, "logistic");
  EXPECT_EQ(results[1].cells.size(), 4u);
  const std::string grid = grid_table_csv(results);
  EXPECT_EQ(grid.substr(0, grid.find('\n')), "model,epochs,batch_size,learning_rate,dropout,c,metric,mean,min,max,best");
  EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 6);
  const std::string summary = summary_table_csv(results);
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "model,metric,mean,min,max,config");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 3);
  CellResult cell;
  cell.mean = 0.5;
  cell.min = 0.25;
  cell.max = 0.75;
  EXPECT_EQ(mean_min_max(cell, 2), "0.50 (0.25, 0.75)");
}

// --- linear baselines -------------------------------------------------------------

TEST(Baseline, OlsRecoversLine) {
  const Vec x{0, 1, 2, 3, 4}, y{1, 3, 5, 7, 9};
  const LinearModel m = fit_ols(x, 1, y);
  EXPECT_NEAR(m.weights[0], 2.0, 1e-8);
  EXPECT_NEAR(m.intercept[0], 1.0, 1e-8);
  EXPECT_TRUE(m.warning.empty());
}

TEST(Baseline, RankDeficientOlsWarns) {
  const Vec x{0, 0, 1, 1, 2, 2, 3, 3}, y{1, 3, 5, 7};
  const LinearModel m = fit_ols(x, 2, y);
  EXPECT_FALSE(m.warning.empty());
  EXPECT_NEAR(m.weights[0], m.weights[1], 1e-8);
  const Vec fit = predict_linear(m, x);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(fit[i], y[i], 1e-8);
}

// Newton's method on the same penalized objective, solved by Gaussian
// elimination.
Vec newton_logistic(const Vec& x, std::size_t p, const Vec& y, double c) {
  const std::size_t n = y.size(), m = p + 1;
  Vec theta(m, 0.0);
  for (int it = 0; it < 50; ++it) {
    std::vector<Vec> h(m, Vec(m + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double z = theta[p];
      for (std::size_t j = 0; j < p; ++j) z += theta[j] * x[i * p + j];
      const double pr = 1.0 / (1.0 + std::exp(-z));
      Vec row(x.begin() + static_cast<std::ptrdiff_t>(i * p), x.begin() + static_cast<std::ptrdiff_t>((i + 1) * p));
      row.push_back(1.0);
      for (std::size_t a = 0; a < m; ++a) {
        h[a][m] += (pr - y[i]) * row[a] / static_cast<double>(n);
        for (std::size_t b = 0; b < m; ++b) h[a][b] += pr * (1 - pr) * row[a] * row[b] / static_cast<double>(n);
      }
    }
    for (std::size_t j = 0; j < p; ++j) {
      h[j][m] += theta[j] / (c * static_cast<double>(n));
      h[j][j] += 1.0 / (c * static_cast<double>(n));
    }
    for (std::size_t col = 0; col < m; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < m; ++r) {
        if (std::abs(h[r][col]) > std::abs(h[piv][col])) piv = r;
      }
      std::swap(h[col], h[piv]);
      for (std::size_t r = 0; r < m; ++r) {
        if (r == col) continue;
        const double f = h[r][col] / h[col][col];
        for (std::size_t k = col; k <= m; ++k) h[r][k] -= f * h[col][k];
      }
    }
    for (std::size_t a = 0; a < m; ++a) theta[a] -= h[a][m] / h[a][a];
  }
  return theta;
}

TEST(Baseline, LogisticMatchesNewtonOracle) {
  Rng rng(12);
  const std::size_t n = 50, p = 3;
  Vec x(n * p), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.3;
    for (std::size_t j = 0; j < p; ++j) {
      x[i * p + j] = init::normal({1}, 1.0, rng).data()[0];
      z += (j == 0 ? 1.5 : -0.7) * x[i * p + j];
    }
    y[i] = init::uniform01(rng) < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
  }
  for (double c : {0.01, 1.0}) {
    LogisticOptions o;
    o.c = c;
    const LinearModel m = fit_logistic(x, p, y, 2, o);
    const Vec oracle = newton_logistic(x, p, y, c);
    for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(m.weights[j], oracle[j], 1e-4) << c;
    EXPECT_NEAR(m.intercept[0], oracle[p], 1e-4) << c;
  }
}

TEST(Baseline, SeparablePairLossVanishesAsCGrows) {
  const Vec x{-1, 1}, y{0, 1};
  double previous = std::log(2.0);
  for (double c : {1.0, 1e2, 1e4, 1e6}) {
    LogisticOptions o;
    o.c = c;
    const LinearModel m = fit_logistic(x, 1, y, 2, o);
    const double ce = linear_task_loss(TaskKind::kBinary, 1, predict_linear(m, x), y);
    EXPECT_LT(ce, previous) << c;
    previous = ce;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(Baseline, MultinomialProbabilitiesSumToOne) {
  Rng rng(4);
  Vec x(60), y(30);
  for (std::size_t i = 0; i < 30; ++i) {
    y[i] = static_cast<double>(i % 3);
    x[2 * i] = y[i] + 0.3 * init::uniform01(rng);
    x[2 * i + 1] = init::uniform01(rng);
  }
  const LinearModel m = fit_logistic(x, 2, y, 3, {});
  const Vec pr = predict_linear(m, x);
  ASSERT_EQ(pr.size(), 90u);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(pr[3 * i] + pr[3 * i + 1] + pr[3 * i + 2], 1.0, 1e-12);
  EXPECT_LT(linear_task_loss(TaskKind::kMulticlass, 3, pr, y), std::log(3.0));
}

TEST(Baseline, RegressionTaskFitsOneOlsCell) {
  LinearBaselineConfig bc;
  bc.k_folds = 3;
  bc.replicates = 2;
  const GridSearchResult r = fit_linear_baseline(toy_dataset(TaskKind::kRegression), bc);
  EXPECT_EQ(r.model, "ols");
  EXPECT_EQ(r.metric, "mse");
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_TRUE(std::isnan(r.cells[0].cell.c));
}

}  // namespace
}  // namespace labtx
