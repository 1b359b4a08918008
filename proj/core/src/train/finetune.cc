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

#include "labtx/train/finetune.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string_view>

#include "json.hpp"
#include "labtx/ecdf/io.hpp"
#include "labtx/error.hpp"
#include "labtx/numerics/adam.hpp"
#include "labtx/numerics/init.hpp"

namespace labtx {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) { return splitmix(a ^ splitmix(b)); }

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<double> parse_cell(std::string_view field, std::size_t line, const std::string& column) {
  if (field.empty() || field == "nan" || field == "NaN" || field == "NA") return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw DataError("fine-tune CSV line " + std::to_string(line) + ", column '" + column + "': '" +
                    std::string(field) + "' is not a finite number");
  }
  return v;
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

Tensor gather_matrix(std::span<const Real> source, std::size_t width, std::span<const std::size_t> rows) {
  std::vector<Real> out(rows.size() * width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(source.begin() + static_cast<std::ptrdiff_t>(rows[i] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return Tensor({rows.size(), width}, std::move(out));
}

Tensor activate(TaskKind task, const Tensor& logits) {
  switch (task) {
    case TaskKind::kBinary: return ops::sigmoid(logits);
    case TaskKind::kMulticlass: return ops::softmax(logits);
    case TaskKind::kRegression: return logits;
  }
  return logits;
}

// Extras z-scored with statistics of the training rows; missing -> 0.
std::vector<Real> normalize_extras(const FinetuneDataset& data, std::span<const std::size_t> train_rows) {
  const std::size_t e = data.extra_columns.size(), n = data.rows();
  std::vector<Real> out(n * e, Real{0});
  for (std::size_t c = 0; c < e; ++c) {
    long double sum = 0, sq = 0;
    std::size_t count = 0;
    for (std::size_t r : train_rows) {
      const double v = data.extras[r * e + c];
      if (std::isnan(v)) continue;
      sum += v;
      sq += static_cast<long double>(v) * v;
      ++count;
    }
    const double mean = count ? static_cast<double>(sum / count) : 0.0;
    double sd = count ? std::sqrt(std::max(0.0, static_cast<double>(sq / count) - mean * mean)) : 1.0;
    if (!(sd > 0.0)) sd = 1.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double v = data.extras[r * e + c];
      out[r * e + c] = std::isnan(v) ? Real{0} : static_cast<Real>((v - mean) / sd);
    }
  }
  return out;
}

bool better(const CellResult& a, const CellResult& b) {
  if (a.mean != b.mean) return a.mean < b.mean;
  if (a.cell.epochs != b.cell.epochs) return a.cell.epochs < b.cell.epochs;
  return a.cell.learning_rate < b.cell.learning_rate;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string cell_description(const GridCell& c) {
  if (c.epochs == 0) return std::isnan(c.c) ? std::string("unregularized") : "C=" + format_number(c.c);
  return "epochs=" + std::to_string(c.epochs) + " batch=" + std::to_string(c.batch_size) +
         " lr=" + format_number(c.learning_rate) + " dropout=" + format_number(c.dropout);
}

}  // namespace

const char* task_kind_name(TaskKind task) {
  switch (task) {
    case TaskKind::kBinary: return "binary";
    case TaskKind::kMulticlass: return "multiclass";
    case TaskKind::kRegression: return "regression";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "binary") return TaskKind::kBinary;
  if (name == "multiclass") return TaskKind::kMulticlass;
  if (name == "regression") return TaskKind::kRegression;
  throw ConfigError("unknown task '" + name + "' (binary, multiclass, regression)");
}

const char* task_metric_name(TaskKind task) { return task == TaskKind::kRegression ? "mse" : "ce"; }

FinetuneTable read_finetune_table(const std::filesystem::path& csv, const std::filesystem::path& sidecar) {
  FinetuneTable table;
  try {
    const auto doc = nlohmann::json::parse(read_text_file(sidecar));
    table.label_column = doc.value("label", std::string("label"));
    table.lab_columns = doc.value("lab_columns", std::vector<std::string>{});
    table.extra_columns = doc.value("extra_columns", std::vector<std::string>{});
    table.task = parse_task_kind(doc.value("task", std::string("binary")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("fine-tune sidecar '" + sidecar.string() + "': " + e.what());
  }
  const std::string text = read_text_file(csv);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> source;  // table column -> CSV field index
  std::size_t label_field = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      const auto header = split_commas(line);
      const auto find = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
          if (header[i] == name) return i;
        }
        throw DataError("fine-tune CSV '" + csv.string() + "' has no column '" + name + "'");
      };
      label_field = find(table.label_column);
      for (const auto& c : table.lab_columns) source.push_back(find(c));
      for (const auto& c : table.extra_columns) source.push_back(find(c));
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (line_no > 1 && fields.size() <= std::max(label_field, source.empty() ? 0 : *std::max_element(source.begin(), source.end()))) {
      throw DataError("fine-tune CSV line " + std::to_string(line_no) + " has too few fields");
    }
    const auto label = parse_cell(fields[label_field], line_no, table.label_column);
    if (!label) throw DataError("fine-tune CSV line " + std::to_string(line_no) + ": missing label");
    table.labels.push_back(*label);
    std::vector<std::optional<double>> row;
    for (std::size_t i = 0; i < source.size(); ++i) {
      const std::string& name =
          i < table.lab_columns.size() ? table.lab_columns[i] : table.extra_columns[i - table.lab_columns.size()];
      row.push_back(parse_cell(fields[source[i]], line_no, name));
    }
    table.rows.push_back(std::move(row));
  }
  if (line_no == 0) throw DataError("fine-tune CSV '" + csv.string() + "' is empty");
  return table;
}

void write_finetune_table(const std::filesystem::path& csv, const std::filesystem::path& sidecar,
                          const FinetuneTable& table) {
  std::string out = table.label_column;
  for (const auto& c : table.lab_columns) out += "," + c;
  for (const auto& c : table.extra_columns) out += "," + c;
  out += '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    append_double(out, table.labels[r]);
    for (const auto& cell : table.rows[r]) {
      out += ',';
      if (cell) append_double(out, *cell);
    }
    out += '\n';
  }
  write_text_file(csv, out);
  const nlohmann::json doc = {{"label", table.label_column},
                              {"lab_columns", table.lab_columns},
                              {"extra_columns", table.extra_columns},
                              {"task", task_kind_name(table.task)}};
  write_text_file(sidecar, doc.dump(1) + "\n");
}

FinetuneDataset prepare_finetune_dataset(const FinetuneTable& table, const Vocab& vocab, const EcdfTable& ecdfs) {
  FinetuneDataset data;
  data.task = table.task;
  std::vector<std::size_t> lab_source, extra_source;
  for (std::size_t i = 0; i < table.lab_columns.size(); ++i) {
    if (vocab.contains(table.lab_columns[i])) {
      data.lab_columns.push_back(table.lab_columns[i]);
      lab_source.push_back(i);
    }
  }
  for (std::size_t i = 0; i < table.extra_columns.size(); ++i) {
    data.extra_columns.push_back(table.extra_columns[i]);
    extra_source.push_back(table.lab_columns.size() + i);
  }
  for (std::size_t i = 0; i < table.lab_columns.size(); ++i) {
    if (!vocab.contains(table.lab_columns[i])) {
      data.extra_columns.push_back(table.lab_columns[i]);
      extra_source.push_back(i);
    }
  }
  if (data.lab_columns.empty()) throw DataError("fine-tune table has no in-vocabulary lab column");

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.lab_columns.size() + table.extra_columns.size()) {
      throw DataError("fine-tune row " + std::to_string(r) + " has the wrong width");
    }
    LabBag bag;
    for (std::size_t j = 0; j < lab_source.size(); ++j) {
      const auto& cell = row[lab_source[j]];
      const std::string& code = data.lab_columns[j];
      data.tabular.push_back(cell.value_or(std::nan("")));
      if (!cell) continue;
      const auto ecdf = ecdfs.find(code);
      std::optional<double> prob;
      if (ecdf != ecdfs.end()) prob = ecdf->second.apply(*cell);
      if (vocab.mode() == VocabMode::kContinuous) {
        bag.tokens.push_back(vocab.code_token(code));
      } else {
        bag.tokens.push_back(value_to_decile_token(vocab, code, prob));
        if (vocab.is_binary(code)) prob.reset();
      }
      bag.values.push_back(prob.value_or(0.0));
      bag.null_flags.push_back(prob ? 0 : 1);
    }
    for (std::size_t src : extra_source) {
      const double v = row[src].value_or(std::nan(""));
      data.extras.push_back(v);
      data.tabular.push_back(v);
    }
    if (bag.size() == 0) throw DataError("fine-tune row " + std::to_string(r) + " has no in-vocabulary lab value");
    data.bags.push_back(std::move(bag));
  }

  data.labels = table.labels;
  if (data.task == TaskKind::kRegression) {
    data.n_classes = 1;
  } else {
    std::size_t max_class = 0;
    for (double y : data.labels) {
      if (y < 0 || y != std::floor(y)) throw DataError("class label " + std::to_string(y) + " is not a class index");
      max_class = std::max(max_class, static_cast<std::size_t>(y));
    }
    if (data.task == TaskKind::kBinary && max_class > 1) throw DataError("binary task has a label above 1");
    data.n_classes = data.task == TaskKind::kBinary ? 2 : std::max<std::size_t>(2, max_class + 1);
  }
  if (data.rows() == 0) throw DataError("fine-tune table has no rows");
  return data;
}

FinetuneTable make_synthetic_finetune_table(const SyntheticCorpus& corpus, TaskKind task, std::uint64_t seed,
                                            double signal, std::size_t n_extra) {
  FinetuneTable table;
  table.task = task;
  std::map<std::string, std::size_t> column;
  for (const SyntheticCode& c : corpus.truth.codes) {
    column[c.id] = table.lab_columns.size();
    table.lab_columns.push_back(c.id);
  }
  for (std::size_t i = 0; i < n_extra; ++i) table.extra_columns.push_back("extra_" + std::to_string(i));

  std::map<std::pair<std::string, std::int64_t>, std::size_t> row_of;
  for (const SyntheticBag& bag : corpus.bags) {
    row_of[{bag.patient_id, bag.chart_time}] = table.rows.size();
    table.rows.emplace_back(table.lab_columns.size() + n_extra);
  }
  for (const LabEvent& ev : corpus.events) {
    const std::size_t r = row_of.at({ev.patient_id, ev.chart_time});
    // A valueless lab is recorded as present.
    table.rows[r][column.at(ev.code)] = ev.value.value_or(1.0);
  }
  Rng rng(seed);
  for (std::size_t r = 0; r < corpus.bags.size(); ++r) {
    const double z = corpus.bags[r].latent.at(0);
    double label = 0.0;
    switch (task) {
      case TaskKind::kBinary:
        label = init::uniform01(rng) < 1.0 / (1.0 + std::exp(-signal * z)) ? 1.0 : 0.0;
        break;
      case TaskKind::kMulticlass:
        label = z < -0.43 ? 0.0 : (z < 0.43 ? 1.0 : 2.0);
        break;
      case TaskKind::kRegression:
        label = z + init::standard_normal(rng) / signal;
        break;
    }
    table.labels.push_back(label);
    for (std::size_t i = 0; i < n_extra; ++i) {
      table.rows[r][table.lab_columns.size() + i] = init::standard_normal(rng);
    }
  }
  return table;
}

std::vector<Tensor> FinetuneHead::trainables() const {
  std::vector<Tensor> params;
  if (n_extra > 0) params = {extra.weight, extra.bias};
  for (const Tensor& t : {hidden.weight, hidden.bias, out.weight, out.bias}) params.push_back(t);
  return params;
}

FinetuneHead init_finetune_head(std::size_t embed_dim, std::size_t n_extra, TaskKind task, std::size_t n_classes,
                                std::uint64_t seed) {
  if (embed_dim < 1) throw ConfigError("fine-tune head: embedding width must be >= 1");
  FinetuneHead head;
  head.task = task;
  head.embed_dim = embed_dim;
  head.n_extra = n_extra;
  head.n_outputs = task == TaskKind::kMulticlass ? n_classes : 1;
  if (task == TaskKind::kMulticlass && n_classes < 2) throw ConfigError("multiclass head needs >= 2 classes");
  Rng rng(seed);
  const auto dense = [&](std::size_t in, std::size_t out) {
    DenseParams p{init::xavier_uniform(in, out, rng), Tensor({out}, Real{0})};
    p.weight.set_requires_grad(true);
    p.bias.set_requires_grad(true);
    return p;
  };
  if (n_extra > 0) head.extra = dense(n_extra, n_extra);
  const std::size_t width = embed_dim + n_extra;
  head.hidden = dense(width, width);
  head.out = dense(width, head.n_outputs);
  return head;
}

Tensor finetune_head_forward(const FinetuneHead& head, const Tensor& pooled, const Tensor& extras, double dropout,
                             ForwardMode mode) {
  if (pooled.rank() != 2 || pooled.dim(1) != head.embed_dim) {
    throw ConfigError("fine-tune head expects pooled [n," + std::to_string(head.embed_dim) + "], got " +
                      shape_string(pooled.shape()));
  }
  Tensor x = pooled;
  if (head.n_extra > 0) {
    if (!extras.defined() || extras.rank() != 2 || extras.dim(0) != pooled.dim(0) || extras.dim(1) != head.n_extra) {
      throw ConfigError("fine-tune head expects extras [n," + std::to_string(head.n_extra) + "]");
    }
    x = ops::concat_last(x, ops::relu(ops::linear(extras, head.extra.weight, head.extra.bias)));
  } else if (extras.defined() && extras.numel() > 0 && extras.dim(extras.rank() - 1) > 0) {
    throw ConfigError("fine-tune head has no extra-feature path but extras were given");
  }
  x = ops::relu(ops::linear(x, head.hidden.weight, head.hidden.bias));
  if (mode.training && dropout > 0.0) {
    if (!mode.rng) throw ContractError("training fine-tune forward needs an rng");
    x = ops::dropout(x, static_cast<Real>(dropout), *mode.rng, true);
  }
  return activate(head.task, ops::linear(x, head.out.weight, head.out.bias));
}

Tensor finetune_forward(const ModelParams& base, const PaddedBatch& batch, const Tensor& extras,
                        const FinetuneHead& head, double dropout, ForwardMode mode) {
  Tensor pooled;
  {
    NoGradGuard frozen;
    pooled = ops::masked_mean_pool(encode(base, batch, ForwardMode{}), batch.pad_mask);
  }
  return finetune_head_forward(head, pooled, extras, dropout, mode);
}

Tensor pooled_embeddings(const ModelParams& base, std::span<const LabBag> bags, std::size_t batch_size) {
  if (bags.empty()) throw ContractError("pooled_embeddings: no bags");
  if (batch_size < 1) throw ConfigError("pooled_embeddings: batch_size must be >= 1");
  NoGradGuard frozen;
  const std::size_t d = base.config.d_model;
  std::vector<Real> out;
  out.reserve(bags.size() * d);
  for (std::size_t start = 0; start < bags.size(); start += batch_size) {
    const auto chunk = bags.subspan(start, std::min(batch_size, bags.size() - start));
    const PaddedBatch batch = pad_batch(chunk);
    const Tensor pooled = ops::masked_mean_pool(encode(base, batch, ForwardMode{}), batch.pad_mask);
    out.insert(out.end(), pooled.data().begin(), pooled.data().end());
  }
  return Tensor({bags.size(), d}, std::move(out));
}

Tensor task_loss(TaskKind task, const Tensor& predictions, std::span<const double> labels) {
  switch (task) {
    case TaskKind::kBinary: {
      std::vector<Real> y(labels.begin(), labels.end());
      return ops::binary_cross_entropy(predictions, y);
    }
    case TaskKind::kMulticlass: {
      std::vector<std::size_t> y;
      for (double v : labels) y.push_back(static_cast<std::size_t>(v));
      return ops::nll_from_probs(predictions, y);
    }
    case TaskKind::kRegression: {
      std::vector<Real> y(labels.begin(), labels.end());
      return ops::mse(predictions, y);
    }
  }
  throw ConfigError("unknown task");
}

FinetuneGrid finetune_grid_from_json(const std::string& text) {
  FinetuneGrid grid;
  try {
    const auto doc = nlohmann::json::parse(text);
    grid.epochs = doc.value("epochs", grid.epochs);
    grid.batch_sizes = doc.value("batch_size", grid.batch_sizes);
    grid.learning_rates = doc.value("learning_rate", grid.learning_rates);
    grid.dropouts = doc.value("dropout", grid.dropouts);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("fine-tune grid: ") + e.what());
  }
  if (grid.cells() == 0) throw ConfigError("fine-tune grid is empty");
  return grid;
}

std::vector<std::size_t> fold_assignment(std::size_t rows, std::size_t k_folds, std::uint64_t seed) {
  if (k_folds < 2) throw ConfigError("k-fold CV needs k >= 2");
  if (rows < k_folds) throw ConfigError("k-fold CV: fewer rows than folds");
  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = i;
  Rng rng(seed);
  init::shuffle(order, rng);
  std::vector<std::size_t> fold(rows);
  for (std::size_t i = 0; i < rows; ++i) fold[order[i]] = i % k_folds;
  return fold;
}

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t replicate) { return mix_seed(seed, replicate + 1); }

GridSearchResult grid_search_on_embeddings(const Tensor& pooled, const FinetuneDataset& data,
                                           const FinetuneConfig& config) {
  const FinetuneGrid& grid = config.grid;
  if (grid.cells() == 0) throw ConfigError("fine-tune grid is empty");
  if (config.replicates < 1) throw ConfigError("fine-tune needs >= 1 replicate");
  const std::size_t n = data.rows();
  if (pooled.rank() != 2 || pooled.dim(0) != n) throw DimensionError("pooled embeddings do not match the dataset");
  const std::size_t d = pooled.dim(1), e = data.extra_columns.size();
  if (config.k_folds < 2) throw ConfigError("k-fold CV needs k >= 2");
  const std::size_t smallest_fold = n / config.k_folds;
  for (std::size_t b : grid.batch_sizes) {
    if (b < 1) throw ConfigError("batch size must be >= 1");
    if (smallest_fold < b) {
      throw ConfigError("held-out fold of " + std::to_string(smallest_fold) + " rows is smaller than batch size " +
                        std::to_string(b));
    }
  }
  for (std::size_t ep : grid.epochs) {
    if (ep < 1) throw ConfigError("epochs must be >= 1");
  }
  const std::size_t max_epochs = *std::max_element(grid.epochs.begin(), grid.epochs.end());
  const std::size_t outputs = data.task == TaskKind::kMulticlass ? data.n_classes : 1;

  GridSearchResult result;
  result.model = "finetune";
  result.metric = task_metric_name(data.task);
  const auto cell_index = [&](std::size_t ei, std::size_t bi, std::size_t li, std::size_t di) {
    return ((ei * grid.batch_sizes.size() + bi) * grid.learning_rates.size() + li) * grid.dropouts.size() + di;
  };
  result.cells.resize(grid.cells());
  for (std::size_t ei = 0; ei < grid.epochs.size(); ++ei) {
    for (std::size_t bi = 0; bi < grid.batch_sizes.size(); ++bi) {
      for (std::size_t li = 0; li < grid.learning_rates.size(); ++li) {
        for (std::size_t di = 0; di < grid.dropouts.size(); ++di) {
          result.cells[cell_index(ei, bi, li, di)].cell = {grid.epochs[ei], grid.batch_sizes[bi],
                                                           grid.learning_rates[li], grid.dropouts[di]};
        }
      }
    }
  }

  // A run for E epochs is the prefix of a run for more epochs with the same
  // seed, so one run per (batch, lr, dropout) serves every epoch count.
  for (std::size_t rep = 0; rep < config.replicates; ++rep) {
    const std::uint64_t rseed = replicate_seed(config.seed, rep);
    const auto folds = fold_assignment(n, config.k_folds, rseed);
    for (std::size_t bi = 0; bi < grid.batch_sizes.size(); ++bi) {
      for (std::size_t li = 0; li < grid.learning_rates.size(); ++li) {
        for (std::size_t di = 0; di < grid.dropouts.size(); ++di) {
          std::vector<std::vector<Real>> oof(grid.epochs.size(), std::vector<Real>(n * outputs));
          for (std::size_t f = 0; f < config.k_folds; ++f) {
            std::vector<std::size_t> train_rows, test_rows;
            for (std::size_t r = 0; r < n; ++r) (folds[r] == f ? test_rows : train_rows).push_back(r);
            const std::vector<Real> extras = normalize_extras(data, train_rows);
            const std::uint64_t fseed = mix_seed(rseed, f);
            const FinetuneHead head = init_finetune_head(d, e, data.task, data.n_classes, fseed);
            Adam adam(head.trainables(), AdamOptions{grid.learning_rates[li]});
            Rng rng(mix_seed(fseed, 0x5eed));
            const std::size_t batch = grid.batch_sizes[bi];
            const Tensor test_pooled = gather_matrix(pooled.data(), d, test_rows);
            const Tensor test_extras = e ? gather_matrix(extras, e, test_rows) : Tensor();
            for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
              init::shuffle(train_rows, rng);
              for (std::size_t start = 0; start < train_rows.size(); start += batch) {
                const std::span<const std::size_t> rows(train_rows.data() + start,
                                                        std::min(batch, train_rows.size() - start));
                std::vector<double> y;
                for (std::size_t r : rows) y.push_back(data.labels[r]);
                Tape tape;
                Tensor loss;
                {
                  Tape::Recording recording(tape);
                  const Tensor x = gather_matrix(pooled.data(), d, rows);
                  const Tensor ex = e ? gather_matrix(extras, e, rows) : Tensor();
                  loss = task_loss(data.task, finetune_head_forward(head, x, ex, grid.dropouts[di], {true, &rng}), y);
                }
                adam.zero_grad();
                tape.backward(loss);
                adam.step();
              }
              for (std::size_t ei = 0; ei < grid.epochs.size(); ++ei) {
                if (grid.epochs[ei] != epoch) continue;
                NoGradGuard no_grad;
                const Tensor pred = finetune_head_forward(head, test_pooled, test_extras, 0.0, ForwardMode{});
                for (std::size_t i = 0; i < test_rows.size(); ++i) {
                  std::copy_n(pred.data().begin() + static_cast<std::ptrdiff_t>(i * outputs), outputs,
                              oof[ei].begin() + static_cast<std::ptrdiff_t>(test_rows[i] * outputs));
                }
              }
            }
          }
          for (std::size_t ei = 0; ei < grid.epochs.size(); ++ei) {
            NoGradGuard no_grad;
            const Shape shape = outputs == 1 ? Shape{n} : Shape{n, outputs};
            const double metric = static_cast<double>(task_loss(data.task, Tensor(shape, oof[ei]), data.labels).item());
            result.cells[cell_index(ei, bi, li, di)].replicate_metrics.push_back(metric);
          }
        }
      }
    }
  }
  for (CellResult& c : result.cells) {
    const auto& m = c.replicate_metrics;
    long double sum = 0;
    for (double v : m) sum += v;
    c.mean = static_cast<double>(sum / static_cast<long double>(m.size()));
    c.min = *std::min_element(m.begin(), m.end());
    c.max = *std::max_element(m.begin(), m.end());
  }
  for (std::size_t i = 1; i < result.cells.size(); ++i) {
    if (better(result.cells[i], result.cells[result.best])) result.best = i;
  }
  return result;
}

GridSearchResult grid_search_finetune(const ModelParams& base, const FinetuneDataset& data,
                                      const FinetuneConfig& config) {
  // Freeze probe: one recorded forward/backward through the wrapper must
  // leave every base gradient at zero.
  base.zero_grad();
  double max_base_grad = 0.0;
  {
    const std::size_t probe_rows = std::min<std::size_t>(data.rows(), 16);
    const std::span<const LabBag> probe(data.bags.data(), probe_rows);
    const PaddedBatch batch = pad_batch(probe);
    const std::size_t e = data.extra_columns.size();
    std::vector<std::size_t> all(data.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const std::vector<Real> extras = normalize_extras(data, all);
    std::vector<std::size_t> rows(probe_rows);
    for (std::size_t i = 0; i < probe_rows; ++i) rows[i] = i;
    const Tensor ex = e ? gather_matrix(extras, e, rows) : Tensor();
    const FinetuneHead head = init_finetune_head(base.config.d_model, e, data.task, data.n_classes, config.seed);
    Tape tape;
    Tensor loss;
    {
      Tape::Recording recording(tape);
      loss = task_loss(data.task, finetune_forward(base, batch, ex, head, 0.0, ForwardMode{}),
                       std::span<const double>(data.labels.data(), probe_rows));
    }
    tape.backward(loss);
    for (const Tensor& t : base.trainables()) {
      for (Real g : t.grad()) max_base_grad = std::max(max_base_grad, std::abs(static_cast<double>(g)));
    }
  }
  GridSearchResult result = grid_search_on_embeddings(pooled_embeddings(base, data.bags), data, config);
  result.max_base_grad = max_base_grad;
  return result;
}

std::string grid_table_csv(std::span<const GridSearchResult> results) {
  std::string out = "model,epochs,batch_size,learning_rate,dropout,c,metric,mean,min,max,best\n";
  for (const GridSearchResult& res : results) {
    for (std::size_t i = 0; i < res.cells.size(); ++i) {
      const CellResult& c = res.cells[i];
      const bool baseline = c.cell.epochs == 0;
      out += res.model + ",";
      out += (baseline ? std::string() : std::to_string(c.cell.epochs)) + ",";
      out += (baseline ? std::string() : std::to_string(c.cell.batch_size)) + ",";
      out += (baseline ? std::string() : format_number(c.cell.learning_rate)) + ",";
      out += (baseline ? std::string() : format_number(c.cell.dropout)) + ",";
      out += format_number(c.cell.c) + "," + res.metric + "," + format_number(c.mean) + "," + format_number(c.min) +
             "," + format_number(c.max) + "," + (i == res.best ? "1" : "0") + "\n";
    }
  }
  return out;
}

std::string summary_table_csv(std::span<const GridSearchResult> results) {
  std::string out = "model,metric,mean,min,max,config\n";
  for (const GridSearchResult& res : results) {
    const CellResult& c = res.best_cell();
    out += res.model + "," + res.metric + "," + format_number(c.mean) + "," + format_number(c.min) + "," +
           format_number(c.max) + "," + cell_description(c.cell) + "\n";
  }
  return out;
}

std::string mean_min_max(const CellResult& cell, int precision) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*f (%.*f, %.*f)", precision, cell.mean, precision, cell.min, precision,
                cell.max);
  return buf;
}

}  // namespace labtx
