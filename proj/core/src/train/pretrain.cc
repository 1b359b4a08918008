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

#include "labtx/train/pretrain.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "labtx/ecdf/io.hpp"
#include "labtx/error.hpp"
#include "labtx/model/checkpoint.hpp"
#include "labtx/numerics/adam.hpp"
#include "labtx/numerics/init.hpp"
#include "labtx/train/losses.hpp"
#include "labtx/train/metrics.hpp"

namespace labtx {
namespace {

constexpr std::uint64_t kMaskStream = 0x6d61736b;
constexpr std::uint64_t kDropoutStream = 0x64726f70;

void append_number(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "nan";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

nlohmann::json batch_to_json(const PaddedBatch& batch, std::size_t step) {
  nlohmann::json targets = nlohmann::json::array();
  for (const MaskTarget& t : batch.targets) {
    targets.push_back({{"row", t.row}, {"position", t.position}, {"token", t.token}, {"value", t.value},
                       {"is_null", t.is_null}});
  }
  return {{"step", step},          {"batch", batch.batch},         {"length", batch.length},
          {"tokens", batch.tokens}, {"values", batch.values},       {"null_flags", batch.null_flags},
          {"pad_mask", batch.pad_mask}, {"targets", targets}};
}

std::string checkpoint_name(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step-%07zu", step);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("train config: steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("train config: learning_rate must be >= 0");
  if (dropout >= 1.0) throw ConfigError("train config: dropout must be < 1");
  if (checkpoint_interval < 1) throw ConfigError("train config: checkpoint_interval must be >= 1");
  if (mask_count < 1) throw ConfigError("train config: mask_count must be >= 1");
  if (eval_batch_size < 1) throw ConfigError("train config: eval_batch_size must be >= 1");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"dropout", c.dropout},
          {"seed", c.seed},
          {"checkpoint_interval", c.checkpoint_interval},
          {"mask_count", c.mask_count},
          {"remask", c.remask},
          {"eval_batch_size", c.eval_batch_size}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig c) {
  if (!doc.is_object()) throw ConfigError("train config must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "steps") {
        c.steps = value.get<std::size_t>();
      } else if (key == "batch_size") {
        c.batch_size = value.get<std::size_t>();
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
      } else if (key == "dropout") {
        c.dropout = value.get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "checkpoint_interval") {
        c.checkpoint_interval = value.get<std::size_t>();
      } else if (key == "mask_count") {
        c.mask_count = value.get<std::size_t>();
      } else if (key == "remask") {
        c.remask = value.get<bool>();
      } else if (key == "eval_batch_size") {
        c.eval_batch_size = value.get<std::size_t>();
      } else {
        throw ConfigError("unknown train config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

std::string metric_row_csv(const MetricRow& row) {
  std::string out = std::to_string(row.step) + "," + row.split + ",";
  append_number(out, row.ce);
  out += ',';
  append_number(out, row.mse);
  out += ',';
  append_number(out, row.perplexity);
  return out;
}

EvalMetrics evaluate_loss(const ModelParams& params, std::span<const LabBag> bags, std::size_t batch_size) {
  if (batch_size < 1) throw ConfigError("evaluate_loss: batch_size must be >= 1");
  NoGradGuard no_grad;
  long double ce_sum = 0, mse_sum = 0;
  std::size_t ce_n = 0, mse_n = 0;
  std::vector<LabBag> chunk;
  const auto flush = [&] {
    if (chunk.empty()) return;
    const LossParts parts = masked_loss(params, pad_batch(chunk), ForwardMode{});
    ce_sum += parts.ce * static_cast<long double>(parts.ce_count);
    ce_n += parts.ce_count;
    if (parts.mse_count > 0) {
      mse_sum += parts.mse * static_cast<long double>(parts.mse_count);
      mse_n += parts.mse_count;
    }
    chunk.clear();
  };
  for (const LabBag& bag : bags) {
    if (bag.masked.empty()) continue;
    chunk.push_back(bag);
    if (chunk.size() == batch_size) flush();
  }
  flush();
  if (ce_n == 0) throw ContractError("evaluate_loss: no masked positions");
  EvalMetrics m;
  m.ce = static_cast<double>(ce_sum / static_cast<long double>(ce_n));
  m.mse = mse_n > 0 ? static_cast<double>(mse_sum / static_cast<long double>(mse_n))
                    : std::numeric_limits<double>::quiet_NaN();
  m.perplexity = perplexity(m.ce);
  m.masked = ce_n;
  return m;
}

EvalMetrics constant_baseline_metrics(const ModelConfig& config, std::span<const LabBag> bags) {
  long double se = 0;
  std::size_t n_ce = 0, n_mse = 0;
  for (const LabBag& bag : bags) {
    for (const MaskedTruth& t : bag.masked) {
      ++n_ce;
      if (config.mode == ModelMode::kLabrador && !t.is_null) {
        se += (t.value - 0.5) * (t.value - 0.5);
        ++n_mse;
      }
    }
  }
  if (n_ce == 0) throw ContractError("constant_baseline_metrics: no masked positions");
  EvalMetrics m;
  m.ce = std::log(static_cast<double>(config.head_width()));
  m.perplexity = static_cast<double>(config.head_width());
  m.mse = n_mse > 0 ? static_cast<double>(se / static_cast<long double>(n_mse))
                    : std::numeric_limits<double>::quiet_NaN();
  m.masked = n_ce;
  return m;
}

PretrainResult pretrain(ModelParams params, std::span<const LabBag> train, std::span<const LabBag> val,
                        const TrainConfig& config, const PretrainOutputs& outputs) {
  config.validate();
  if (train.empty()) throw ContractError("pretrain: no training bags");
  if (config.dropout >= 0.0) params.config.dropout = config.dropout;
  params.config.validate();
  const Token mask_token = params.config.mask_token();
  const bool writing = !outputs.run_dir.empty();

  std::ofstream csv;
  if (writing) {
    std::filesystem::create_directories(outputs.run_dir);
    csv.open(outputs.run_dir / "metrics.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write metrics.csv in '" + outputs.run_dir.string() + "'");
    csv << kMetricsCsvHeader << '\n';
  }
  PretrainResult result;
  const auto emit = [&](MetricRow row) {
    if (writing) csv << metric_row_csv(row) << '\n' << std::flush;
    if (outputs.on_metric) outputs.on_metric(row);
    result.log.push_back(std::move(row));
  };
  const auto validate_at = [&](std::size_t step) {
    if (val.empty()) return;
    const EvalMetrics m = evaluate_loss(params, val, config.eval_batch_size);
    emit({step, "val", m.ce, m.mse, m.perplexity});
  };
  const auto checkpoint = [&](const std::string& name, std::size_t step) {
    if (!writing) return;
    save_checkpoint(outputs.run_dir / "checkpoints" / name, params,
                    {{"step", step}, {"train", train_config_to_json(config)}});
  };

  Rng order_rng(config.seed);
  Rng mask_rng(config.seed ^ kMaskStream);
  Rng dropout_rng(config.seed ^ kDropoutStream);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  init::shuffle(order, order_rng);
  std::size_t cursor = 0;

  Adam adam(params.trainables(), AdamOptions{config.learning_rate});
  validate_at(0);
  std::vector<LabBag> bags;
  bags.reserve(config.batch_size);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    bags.clear();
    for (std::size_t i = 0; i < config.batch_size; ++i) {
      if (cursor == order.size()) {
        init::shuffle(order, order_rng);
        cursor = 0;
      }
      const LabBag& bag = train[order[cursor++]];
      if (config.remask || bag.masked.empty()) {
        const LabBag plain = unmask(bag);
        bags.push_back(mask_bag(plain, mask_rng, std::min(config.mask_count, plain.size()), mask_token));
      } else {
        bags.push_back(bag);
      }
    }
    const PaddedBatch batch = pad_batch(bags);

    Tape tape;
    LossParts parts;
    {
      Tape::Recording recording(tape);
      parts = masked_loss(params, batch, ForwardMode{true, &dropout_rng});
    }
    if (!std::isfinite(static_cast<double>(parts.total.item()))) {
      std::string where;
      if (writing) {
        const auto dump = outputs.run_dir / "nonfinite-batch.json";
        write_text_file(dump, batch_to_json(batch, step).dump(1) + "\n");
        where = "; batch dumped to " + dump.string();
      }
      throw NumericError("non-finite training loss at step " + std::to_string(step) + " (ce " +
                         std::to_string(parts.ce) + ", mse " + std::to_string(parts.mse) + ")" + where);
    }
    adam.zero_grad();
    tape.backward(parts.total);
    adam.step();
    emit({step, "train", parts.ce, parts.mse, std::exp(parts.ce)});

    if (step % config.checkpoint_interval == 0 || step == config.steps) {
      validate_at(step);
      checkpoint(checkpoint_name(step), step);
    }
  }
  checkpoint("final", config.steps);
  result.params = std::move(params);
  return result;
}

}  // namespace labtx
