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

#include "labtx/train/baseline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "labtx/error.hpp"

namespace labtx {
namespace {

constexpr double kProbClamp = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> a) {
  double m = 0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Mean loss plus penalty and its gradient for parameters [W (p x k), b (k)].
class LogisticObjective {
 public:
  LogisticObjective(std::span<const double> x, std::size_t p, std::span<const double> y, std::size_t k, double c)
      : x_(x), p_(p), y_(y), k_(k), n_(y.size()), c_(c), logits_(k) {}

  std::size_t dimension() const { return p_ * k_ + k_; }

  double operator()(std::span<const double> theta, std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n_);
    double total = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double* xi = x_.data() + i * p_;
      for (std::size_t k = 0; k < k_; ++k) {
        double z = theta[p_ * k_ + k];
        for (std::size_t j = 0; j < p_; ++j) z += xi[j] * theta[j * k_ + k];
        logits_[k] = z;
      }
      const auto label = static_cast<std::size_t>(y_[i]);
      if (k_ == 1) {
        const double z = logits_[0];
        // log(1 + e^z) - y z, evaluated without overflow.
        total += (z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - (label == 1 ? z : 0.0);
        logits_[0] = 1.0 / (1.0 + std::exp(-z)) - (label == 1 ? 1.0 : 0.0);
      } else {
        const double top = *std::max_element(logits_.begin(), logits_.end());
        double sum = 0;
        for (double z : logits_) sum += std::exp(z - top);
        total += top + std::log(sum) - logits_[label];
        for (std::size_t k = 0; k < k_; ++k) {
          logits_[k] = std::exp(logits_[k] - top) / sum - (k == label ? 1.0 : 0.0);
        }
      }
      for (std::size_t k = 0; k < k_; ++k) {
        const double r = logits_[k] * inv_n;
        for (std::size_t j = 0; j < p_; ++j) grad[j * k_ + k] += xi[j] * r;
        grad[p_ * k_ + k] += r;
      }
    }
    const double lambda = inv_n / c_;
    double penalty = 0;
    for (std::size_t w = 0; w < p_ * k_; ++w) {
      penalty += theta[w] * theta[w];
      grad[w] += lambda * theta[w];
    }
    return total * inv_n + 0.5 * lambda * penalty;
  }

 private:
  std::span<const double> x_;
  std::size_t p_;
  std::span<const double> y_;
  std::size_t k_, n_;
  double c_;
  std::vector<double> logits_;
};

std::vector<double> lbfgs(LogisticObjective& objective, const LogisticOptions& options) {
  const std::size_t dim = objective.dimension();
  std::vector<double> theta(dim, 0.0), grad(dim), next(dim), next_grad(dim), dir(dim);
  double f = objective(theta, grad);
  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;
  std::vector<double> alpha;
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    if (max_abs(grad) < options.gradient_tolerance) break;
    // Two-loop recursion.
    for (std::size_t i = 0; i < dim; ++i) dir[i] = -grad[i];
    alpha.assign(memory.size(), 0.0);
    for (std::size_t m = memory.size(); m-- > 0;) {
      alpha[m] = memory[m].rho * dot(memory[m].s, dir);
      for (std::size_t i = 0; i < dim; ++i) dir[i] -= alpha[m] * memory[m].y[i];
    }
    if (!memory.empty()) {
      const Pair& last = memory.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& v : dir) v *= gamma;
    }
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const double beta = memory[m].rho * dot(memory[m].y, dir);
      for (std::size_t i = 0; i < dim; ++i) dir[i] += (alpha[m] - beta) * memory[m].s[i];
    }
    double slope = dot(grad, dir);
    if (!(slope < 0)) {
      memory.clear();
      for (std::size_t i = 0; i < dim; ++i) dir[i] = -grad[i];
      slope = dot(grad, dir);
    }
    double step = memory.empty() ? std::min(1.0, 1.0 / std::sqrt(dot(grad, grad))) : 1.0;
    double f_next = f;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t i = 0; i < dim; ++i) next[i] = theta[i] + step * dir[i];
      f_next = objective(next, next_grad);
      if (f_next <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    Pair pair{std::vector<double>(dim), std::vector<double>(dim), 0.0};
    for (std::size_t i = 0; i < dim; ++i) {
      pair.s[i] = next[i] - theta[i];
      pair.y[i] = next_grad[i] - grad[i];
    }
    const double sy = dot(pair.s, pair.y);
    theta.swap(next);
    grad.swap(next_grad);
    const double previous = f;
    f = f_next;
    if (sy > 1e-300) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (memory.size() > options.history) memory.pop_front();
    }
    if (previous - f <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f)) &&
        max_abs(grad) < std::sqrt(options.gradient_tolerance)) {
      break;
    }
  }
  return theta;
}

void check_design(std::span<const double> features, std::size_t n_features, std::size_t rows) {
  if (rows == 0) throw DataError("linear fit: no rows");
  if (features.size() != rows * n_features) {
    throw DimensionError("linear fit: " + std::to_string(features.size()) + " feature values for " +
                         std::to_string(rows) + " rows of " + std::to_string(n_features));
  }
  for (double v : features) {
    if (!std::isfinite(v)) throw DataError("linear fit: non-finite feature value");
  }
}

struct ColumnStats {
  std::vector<double> mean, sd;
};

ColumnStats column_stats(const FinetuneDataset& data, std::span<const std::size_t> rows) {
  const std::size_t w = data.tabular_width();
  ColumnStats stats{std::vector<double>(w, 0.0), std::vector<double>(w, 1.0)};
  for (std::size_t c = 0; c < w; ++c) {
    long double sum = 0, sq = 0;
    std::size_t count = 0;
    for (std::size_t r : rows) {
      const double v = data.tabular[r * w + c];
      if (std::isnan(v)) continue;
      sum += v;
      sq += static_cast<long double>(v) * v;
      ++count;
    }
    if (count == 0) continue;
    const double mean = static_cast<double>(sum / count);
    const double var = static_cast<double>(sq / count) - mean * mean;
    stats.mean[c] = mean;
    stats.sd[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  return stats;
}

std::vector<double> standardized(const FinetuneDataset& data, const ColumnStats& stats,
                                 std::span<const std::size_t> rows) {
  const std::size_t w = data.tabular_width();
  std::vector<double> out(rows.size() * w);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < w; ++c) {
      const double v = data.tabular[rows[i] * w + c];
      out[i * w + c] = std::isnan(v) ? 0.0 : (v - stats.mean[c]) / stats.sd[c];
    }
  }
  return out;
}

}  // namespace

LinearModel fit_logistic(std::span<const double> features, std::size_t n_features, std::span<const double> labels,
                         std::size_t n_classes, const LogisticOptions& options) {
  check_design(features, n_features, labels.size());
  if (n_classes < 2) throw ConfigError("logistic regression needs >= 2 classes");
  if (!(options.c > 0)) throw ConfigError("logistic regression needs C > 0");
  for (double y : labels) {
    if (y < 0 || y != std::floor(y) || y >= static_cast<double>(n_classes)) {
      throw DataError("logistic regression: label " + std::to_string(y) + " is not a class index");
    }
  }
  const std::size_t k = n_classes == 2 ? 1 : n_classes;
  LogisticObjective objective(features, n_features, labels, k, options.c);
  const std::vector<double> theta = lbfgs(objective, options);
  LinearModel model;
  model.task = n_classes == 2 ? TaskKind::kBinary : TaskKind::kMulticlass;
  model.n_features = n_features;
  model.n_outputs = k;
  model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(n_features * k));
  model.intercept.assign(theta.begin() + static_cast<std::ptrdiff_t>(n_features * k), theta.end());
  return model;
}

LinearModel fit_ols(std::span<const double> features, std::size_t n_features, std::span<const double> targets) {
  const std::size_t n = targets.size();
  check_design(features, n_features, n);
  Eigen::MatrixXd design(n, n_features + 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_features; ++j) design(i, j) = features[i * n_features + j];
    design(i, n_features) = 1.0;
    y(i) = targets[i];
  }
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  const Eigen::VectorXd beta = cod.solve(y);
  LinearModel model;
  model.task = TaskKind::kRegression;
  model.n_features = n_features;
  model.n_outputs = 1;
  model.weights.assign(beta.data(), beta.data() + n_features);
  model.intercept = {beta(n_features)};
  if (static_cast<std::size_t>(cod.rank()) < n_features + 1) {
    model.warning = "OLS design has rank " + std::to_string(cod.rank()) + " < " + std::to_string(n_features + 1) +
                    "; using the minimum-norm solution";
  }
  return model;
}

std::vector<double> predict_linear(const LinearModel& model, std::span<const double> features) {
  const std::size_t p = model.n_features, k = model.n_outputs;
  if (p == 0 ? !features.empty() : features.size() % p != 0) {
    throw DimensionError("predict_linear: feature count is not a multiple of " + std::to_string(p));
  }
  const std::size_t n = p == 0 ? 0 : features.size() / p;
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * k;
    for (std::size_t c = 0; c < k; ++c) {
      double z = model.intercept[c];
      for (std::size_t j = 0; j < p; ++j) z += features[i * p + j] * model.weights[j * k + c];
      row[c] = z;
    }
    if (model.task == TaskKind::kBinary) {
      row[0] = 1.0 / (1.0 + std::exp(-row[0]));
    } else if (model.task == TaskKind::kMulticlass) {
      const double top = *std::max_element(row, row + k);
      double sum = 0;
      for (std::size_t c = 0; c < k; ++c) sum += (row[c] = std::exp(row[c] - top));
      for (std::size_t c = 0; c < k; ++c) row[c] /= sum;
    }
  }
  return out;
}

double linear_task_loss(TaskKind task, std::size_t n_outputs, std::span<const double> predictions,
                        std::span<const double> labels) {
  const std::size_t n = labels.size();
  if (n == 0 || predictions.size() != n * n_outputs) throw DimensionError("linear_task_loss: size mismatch");
  long double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    switch (task) {
      case TaskKind::kBinary: {
        const double q = std::clamp(predictions[i], kProbClamp, 1.0 - kProbClamp);
        total -= labels[i] == 1.0 ? std::log(q) : std::log(1.0 - q);
        break;
      }
      case TaskKind::kMulticlass: {
        const auto label = static_cast<std::size_t>(labels[i]);
        total -= std::log(std::max(predictions[i * n_outputs + label], kProbClamp));
        break;
      }
      case TaskKind::kRegression: {
        const double e = predictions[i] - labels[i];
        total += e * e;
        break;
      }
    }
  }
  return static_cast<double>(total / static_cast<long double>(n));
}

GridSearchResult fit_linear_baseline(const FinetuneDataset& data, const LinearBaselineConfig& config) {
  const bool regression = data.task == TaskKind::kRegression;
  if (!regression && config.c_grid.empty()) throw ConfigError("logistic baseline: empty C grid");
  if (config.replicates < 1) throw ConfigError("linear baseline needs >= 1 replicate");
  for (double c : config.c_grid) {
    if (!(c > 0)) throw ConfigError("logistic baseline: C must be > 0");
  }
  const std::size_t n = data.rows(), w = data.tabular_width();
  const std::size_t outputs = data.task == TaskKind::kMulticlass ? data.n_classes : 1;
  const std::vector<double> cs =
      regression ? std::vector<double>{std::numeric_limits<double>::quiet_NaN()} : config.c_grid;

  GridSearchResult result;
  result.model = regression ? "ols" : "logistic";
  result.metric = task_metric_name(data.task);
  for (double c : cs) {
    CellResult cell;
    cell.cell.c = c;
    result.cells.push_back(cell);
  }
  for (std::size_t rep = 0; rep < config.replicates; ++rep) {
    const auto folds = fold_assignment(n, config.k_folds, replicate_seed(config.seed, rep));
    std::vector<std::vector<double>> oof(cs.size(), std::vector<double>(n * outputs));
    for (std::size_t f = 0; f < config.k_folds; ++f) {
      std::vector<std::size_t> train_rows, test_rows;
      for (std::size_t r = 0; r < n; ++r) (folds[r] == f ? test_rows : train_rows).push_back(r);
      const ColumnStats stats = column_stats(data, train_rows);
      const std::vector<double> x_train = standardized(data, stats, train_rows);
      const std::vector<double> x_test = standardized(data, stats, test_rows);
      std::vector<double> y_train;
      for (std::size_t r : train_rows) y_train.push_back(data.labels[r]);
      for (std::size_t ci = 0; ci < cs.size(); ++ci) {
        LinearModel model;
        if (regression) {
          model = fit_ols(x_train, w, y_train);
          if (!model.warning.empty() &&
              std::find(result.warnings.begin(), result.warnings.end(), model.warning) == result.warnings.end()) {
            result.warnings.push_back(model.warning);
          }
        } else {
          LogisticOptions options;
          options.c = cs[ci];
          model = fit_logistic(x_train, w, y_train, data.n_classes, options);
        }
        const std::vector<double> pred = predict_linear(model, x_test);
        for (std::size_t i = 0; i < test_rows.size(); ++i) {
          std::copy_n(pred.begin() + static_cast<std::ptrdiff_t>(i * outputs), outputs,
                      oof[ci].begin() + static_cast<std::ptrdiff_t>(test_rows[i] * outputs));
        }
      }
    }
    for (std::size_t ci = 0; ci < cs.size(); ++ci) {
      result.cells[ci].replicate_metrics.push_back(linear_task_loss(data.task, outputs, oof[ci], data.labels));
    }
  }
  for (CellResult& c : result.cells) {
    const auto& m = c.replicate_metrics;
    c.mean = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
    c.min = *std::min_element(m.begin(), m.end());
    c.max = *std::max_element(m.begin(), m.end());
  }
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    if (result.cells[i].mean < result.cells[result.best].mean) result.best = i;
  }
  return result;
}

}  // namespace labtx
