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

#include "commands.hpp"

#include <charconv>
#include <cstdio>
#include <optional>

#include "labtx/corpus/pipeline.hpp"
#include "labtx/corpus/synthetic.hpp"
#include "labtx/ecdf/io.hpp"
#include "labtx/error.hpp"
#include "labtx/model/checkpoint.hpp"
#include "labtx/model/forward.hpp"
#include "labtx/train/baseline.hpp"
#include "labtx/train/finetune.hpp"
#include "labtx/train/impute.hpp"
#include "labtx/train/pretrain.hpp"

namespace labtx::tools {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename T>
T get(const json& doc, const std::string& key) {
  try {
    return doc.at(json::json_pointer(key)).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("parameter '" + key.substr(1) + "': " + e.what());
  }
}

void write_config(OutputGuard& out, const std::string& command, const json& cfg) {
  write_text_file(out.file("config.json"), json{{"command", command}, {"params", cfg}}.dump(1) + "\n");
}

VocabMode vocab_mode_for(const std::string& name) {
  return parse_model_mode(name) == ModelMode::kLabrador ? VocabMode::kContinuous : VocabMode::kDecile;
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (train, val, test)");
}

struct Artifacts {
  Vocab vocab;
  EcdfTable ecdfs;
  std::string source;
};

// Vocabulary and eCDFs from --data when given, else stored with the checkpoint.
Artifacts load_artifacts(const fs::path& checkpoint, const std::string& data) {
  const fs::path dir = data.empty() ? checkpoint : fs::path(data);
  if (!fs::exists(dir / "vocab.json")) {
    throw ConfigError("no vocab.json in '" + dir.string() + "'; pass --data with a preprocessed directory");
  }
  return Artifacts{load_vocab(dir / "vocab.json"), load_ecdfs(dir / "ecdfs.json"), dir.string()};
}

void check_compatible(const ModelConfig& config, const fs::path& checkpoint, const Artifacts& artifacts) {
  const ModelConfig expected = config_for_vocab(artifacts.vocab, config);
  if (expected == config) return;
  throw ConfigError("checkpoint '" + checkpoint.string() + "' is a " + model_mode_name(config.mode) +
                    " model over vocab size " + std::to_string(config.vocab_size) + ", but '" + artifacts.source +
                    "' holds a " + vocab_mode_name(artifacts.vocab.mode()) + " vocabulary implying " +
                    model_mode_name(expected.mode) + " with vocab size " + std::to_string(expected.vocab_size));
}

std::vector<LabBag> split_bags(const std::string& data, const std::string& split) {
  const PreprocessedCorpus corpus = read_preprocessed(data);
  const auto bags = corpus.split(parse_split(split));
  if (bags.empty()) throw DataError("split '" + split + "' of '" + data + "' has no bags");
  return {bags.begin(), bags.end()};
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

Command synth(CLI::App& root) {
  CLI::App* app = root.add_subcommand("synth", "Generate a synthetic lab-event corpus");
  auto params = std::make_unique<ParamSet>(
      app, json{{"patients", 100},       {"codes", 10},           {"latent_dim", 2},       {"seed", 0},
                {"bag_rate", 3.0},       {"loading_strength", 1.0}, {"noise_sigma", 0.3}, {"cross_loading", 0.2},
                {"orthogonal", false},   {"panel_size", 5},       {"keep_prob", 0.85},     {"null_rate", 0.0},
                {"binary_codes", 0},     {"finetune_task", ""},   {"finetune_signal", 4.0}, {"finetune_extras", 1},
                {"out", ""}});
  params->option<std::size_t>("--patients", "/patients", "Number of patients");
  params->option<std::size_t>("--codes", "/codes", "Number of lab codes");
  params->option<std::size_t>("--latent-dim", "/latent_dim", "Latent factor dimension");
  params->option<std::uint64_t>("--seed", "/seed", "Random seed");
  params->option<double>("--bag-rate", "/bag_rate", "Mean bags per patient");
  params->option<double>("--loading-strength", "/loading_strength", "Primary loading magnitude");
  params->option<double>("--noise-sigma", "/noise_sigma", "Per-lab noise stddev");
  params->option<double>("--null-rate", "/null_rate", "Probability a numeric lab has no value");
  params->option<std::size_t>("--binary-codes", "/binary_codes", "Codes that never carry a value");
  params->option<std::string>("--finetune-task", "/finetune_task",
                              "Also write finetune.csv/.json for this task (binary, multiclass, regression)");
  params->option<std::string>("--out", "/out", "Output directory");
  return {std::move(params), [](const json& cfg) {
            SyntheticOptions o;
            o.n_patients = get<std::size_t>(cfg, "/patients");
            o.n_codes = get<std::size_t>(cfg, "/codes");
            o.latent_dim = get<std::size_t>(cfg, "/latent_dim");
            o.seed = get<std::uint64_t>(cfg, "/seed");
            o.bag_rate = get<double>(cfg, "/bag_rate");
            o.loading_strength = get<double>(cfg, "/loading_strength");
            o.noise_sigma = get<double>(cfg, "/noise_sigma");
            o.cross_loading = get<double>(cfg, "/cross_loading");
            o.orthogonal = get<bool>(cfg, "/orthogonal");
            o.panel_size = get<std::size_t>(cfg, "/panel_size");
            o.keep_prob = get<double>(cfg, "/keep_prob");
            o.null_rate = get<double>(cfg, "/null_rate");
            o.n_binary = get<std::size_t>(cfg, "/binary_codes");
            OutputGuard out(require_string(cfg, "/out"));
            const SyntheticCorpus corpus = generate_synthetic_corpus(o);
            write_events_csv(out.file("events.csv"), corpus.events);
            write_text_file(out.file("truth.json"), synthetic_truth_to_json(corpus.truth));
            const auto task = get<std::string>(cfg, "/finetune_task");
            if (!task.empty()) {
              const FinetuneTable table =
                  make_synthetic_finetune_table(corpus, parse_task_kind(task), o.seed + 1,
                                                get<double>(cfg, "/finetune_signal"),
                                                get<std::size_t>(cfg, "/finetune_extras"));
              write_finetune_table(out.file("finetune.csv"), out.file("finetune.json"), table);
            }
            write_config(out, "synth", cfg);
            std::printf("wrote %zu events in %zu bags for %zu patients to %s\n", corpus.events.size(),
                        corpus.bags.size(), o.n_patients, out.root().c_str());
            out.commit();
          }};
}

Command preprocess(CLI::App& root) {
  CLI::App* app = root.add_subcommand("preprocess", "Fit eCDFs and vocabulary, build bags and write shards");
  auto params = std::make_unique<ParamSet>(
      app, json{{"events", ""},
                {"min_count", 0},
                {"splits", {0.8, 0.1, 0.1}},
                {"mode", "labrador"},
                {"seed", 0},
                {"mask_count", 1},
                {"shard_size", 4096},
                {"out", ""}});
  params->option<std::string>("--events", "/events", "Events CSV (patient_id,chart_time,code_id,value)");
  params->option<std::size_t>("--min-count", "/min_count", "Keep codes with more than this many events");
  params->option<std::vector<double>>("--splits", "/splits", "Train,val,test patient fractions")
      ->delimiter(',')
      ->expected(3);
  params->option<std::string>("--mode", "/mode", "labrador (continuous) or bert (decile tokens)");
  params->option<std::uint64_t>("--seed", "/seed", "Split and masking seed");
  params->option<std::size_t>("--mask-count", "/mask_count", "Masks per bag");
  params->option<std::size_t>("--shard-size", "/shard_size", "Bags per shard file");
  params->option<std::string>("--out", "/out", "Output directory");
  return {std::move(params), [](const json& cfg) {
            PreprocessOptions o;
            o.min_count = get<std::size_t>(cfg, "/min_count");
            const auto splits = get<std::vector<double>>(cfg, "/splits");
            if (splits.size() != 3) throw ConfigError("splits needs three fractions");
            o.splits = {splits[0], splits[1], splits[2]};
            o.mode = vocab_mode_for(get<std::string>(cfg, "/mode"));
            o.seed = get<std::uint64_t>(cfg, "/seed");
            o.mask_count = get<std::size_t>(cfg, "/mask_count");
            o.shard_size = get<std::size_t>(cfg, "/shard_size");
            o.validate();
            const auto events = read_events_csv(require_string(cfg, "/events"));
            OutputGuard out(require_string(cfg, "/out"));
            for (const char* name : {"ecdfs.json", "vocab.json", "summary.json", "train", "val", "test"}) {
              out.file(name);
            }
            const PreprocessedCorpus corpus = preprocess_events(events, o);
            write_preprocessed(out.root(), corpus, o);
            write_config(out, "preprocess", cfg);
            const PreprocessSummary& s = corpus.summary;
            std::printf("codes kept %zu, dropped %zu\n", s.codes_kept, s.codes_dropped);
            std::printf("bags kept %zu, dropped %zu (train %zu, val %zu, test %zu)\n", s.bags_kept, s.bags_dropped,
                        s.split_bags[0], s.split_bags[1], s.split_bags[2]);
            std::printf("vocab size %zu (%s)\n", s.vocab_size, vocab_mode_name(corpus.vocab.mode()));
            out.commit();
          }};
}

Command pretrain_command(CLI::App& root) {
  CLI::App* app = root.add_subcommand("pretrain", "Masked-lab pre-training");
  const ModelConfig m;
  const TrainConfig t;
  auto params = std::make_unique<ParamSet>(
      app, json{{"data", ""},
                {"out", ""},
                {"log_every", 100},
                {"model", {{"d_model", m.d_model}, {"num_layers", m.num_layers}, {"num_heads", m.num_heads},
                           {"ff_dim", m.ff_dim}, {"key_dim", m.key_dim}, {"dropout", m.dropout}}},
                {"train", train_config_to_json(t)}});
  params->option<std::string>("--data", "/data", "Preprocessed directory");
  params->option<std::string>("--out", "/out", "Run directory");
  params->option<std::size_t>("--log-every", "/log_every", "Print every Nth training step");
  params->option<std::size_t>("--d-model", "/model/d_model", "Embedding width");
  params->option<std::size_t>("--layers", "/model/num_layers", "Transformer blocks");
  params->option<std::size_t>("--heads", "/model/num_heads", "Attention heads");
  params->option<std::size_t>("--ff-dim", "/model/ff_dim", "Feed-forward width");
  params->option<std::size_t>("--key-dim", "/model/key_dim", "Per-head key width (0: mode default)");
  params->option<double>("--dropout", "/model/dropout", "Dropout rate");
  params->option<std::size_t>("--steps", "/train/steps", "Optimizer steps");
  params->option<std::size_t>("--batch-size", "/train/batch_size", "Bags per step");
  params->option<double>("--lr", "/train/learning_rate", "Adam learning rate");
  params->option<std::uint64_t>("--seed", "/train/seed", "Initialization and training seed");
  params->option<std::size_t>("--checkpoint-interval", "/train/checkpoint_interval", "Validation/checkpoint cadence");
  params->option<std::size_t>("--mask-count", "/train/mask_count", "Masks per bag when masking online");
  params->flag("--remask", "/train/remask", "Draw fresh masks whenever a bag is batched");
  return {std::move(params), [](const json& cfg) {
            const std::string data_dir = require_string(cfg, "/data");
            const PreprocessedCorpus data = read_preprocessed(data_dir);
            const ModelConfig config = config_for_vocab(data.vocab, model_config_from_json(cfg.at("model")));
            const TrainConfig train = train_config_from_json(cfg.at("train"));
            train.validate();
            const std::size_t log_every = std::max<std::size_t>(1, get<std::size_t>(cfg, "/log_every"));
            OutputGuard out(require_string(cfg, "/out"));
            for (const char* name : {"metrics.csv", "checkpoints", "vocab.json", "ecdfs.json"}) out.file(name);
            out.keep("nonfinite-batch.json");
            write_config(out, "pretrain", cfg);
            save_vocab(out.root() / "vocab.json", data.vocab);
            save_ecdfs(out.root() / "ecdfs.json", data.ecdfs);
            const ParamCount count = count_params(config);
            std::printf("%s model, %zu parameters, %zu train / %zu val bags\n", model_mode_name(config.mode),
                        count.total, data.train.size(), data.val.size());
            PretrainOutputs outputs;
            outputs.run_dir = out.root();
            outputs.on_metric = [log_every](const MetricRow& row) {
              if (row.split == "train" && row.step % log_every != 0) return;
              std::printf("step %zu %s ce %.6f mse %.6f ppl %.4f\n", row.step, row.split.c_str(), row.ce, row.mse,
                          row.perplexity);
              std::fflush(stdout);
            };
            pretrain(init_params(config, train.seed), data.train, data.val, train, outputs);
            for (const auto& entry : fs::directory_iterator(out.root() / "checkpoints")) {
              if (!entry.is_directory()) continue;
              fs::copy_file(out.root() / "vocab.json", entry.path() / "vocab.json", fs::copy_options::overwrite_existing);
              fs::copy_file(out.root() / "ecdfs.json", entry.path() / "ecdfs.json", fs::copy_options::overwrite_existing);
            }
            out.commit();
          }};
}

Command impute(CLI::App& root) {
  CLI::App* app = root.add_subcommand("impute", "Masked-value imputation on a data split");
  auto params = std::make_unique<ParamSet>(app, json{{"checkpoint", ""},
                                                     {"data", ""},
                                                     {"split", "test"},
                                                     {"decode", ""},
                                                     {"ablation", false},
                                                     {"seed", 0},
                                                     {"pairs", false},
                                                     {"out", ""}});
  params->option<std::string>("--checkpoint", "/checkpoint", "Checkpoint directory");
  params->option<std::string>("--data", "/data", "Preprocessed directory");
  params->option<std::string>("--split", "/split", "train, val or test");
  params->option<std::string>("--decode", "/decode", "continuous, weighted or argmax (default by model)");
  params->flag("--ablation", "/ablation", "Replace trained weights with a fresh random initialization");
  params->option<std::uint64_t>("--seed", "/seed", "Mask-selection and ablation seed");
  params->flag("--pairs", "/pairs", "Include every (code, truth, prediction) in the report");
  params->option<std::string>("--out", "/out", "Output directory");
  return {std::move(params), [](const json& cfg) {
            const fs::path checkpoint = require_string(cfg, "/checkpoint");
            const std::string data = require_string(cfg, "/data");
            const ModelParams model = load_checkpoint(checkpoint);
            const Artifacts artifacts = load_artifacts(checkpoint, data);
            check_compatible(model.config, checkpoint, artifacts);
            const auto bags = split_bags(data, get<std::string>(cfg, "/split"));
            std::string decode = get<std::string>(cfg, "/decode");
            if (decode.empty()) decode = model.config.mode == ModelMode::kLabrador ? "continuous" : "weighted";
            const ImputationReport report =
                evaluate_imputation(model, bags, artifacts.vocab, parse_decode_method(decode),
                                    get<bool>(cfg, "/ablation"), get<std::uint64_t>(cfg, "/seed"));
            OutputGuard out(require_string(cfg, "/out"));
            write_text_file(out.file("report.json"), imputation_report_to_json(report, get<bool>(cfg, "/pairs")));
            write_config(out, "impute", cfg);
            std::printf("%s%s decode: n %zu, r %.4f, r2 %.4f, mse %.6f\n", decode.c_str(),
                        report.ablation ? " (ablation)" : "", report.n, report.r, report.r2, report.mse);
            out.commit();
          }};
}

Command finetune(CLI::App& root) {
  CLI::App* app = root.add_subcommand("finetune", "Frozen-base fine-tuning grid search with a linear baseline");
  auto params = std::make_unique<ParamSet>(app, json{{"checkpoint", ""},
                                                     {"data", ""},
                                                     {"dataset", ""},
                                                     {"sidecar", ""},
                                                     {"task", ""},
                                                     {"grid", ""},
                                                     {"folds", 5},
                                                     {"replicates", 5},
                                                     {"seed", 0},
                                                     {"baseline", true},
                                                     {"c_grid", {1e-4, 1e-3, 1e-2, 1e-1}},
                                                     {"out", ""}});
  params->option<std::string>("--checkpoint", "/checkpoint", "Checkpoint directory");
  params->option<std::string>("--data", "/data", "Preprocessed directory (default: files in the checkpoint)");
  params->option<std::string>("--dataset", "/dataset", "Labeled CSV");
  params->option<std::string>("--sidecar", "/sidecar", "Column sidecar JSON (default: dataset with .json)");
  params->option<std::string>("--task", "/task", "Override the sidecar task");
  params->option<std::string>("--grid", "/grid", "JSON grid {epochs, batch_size, learning_rate, dropout}");
  params->option<std::size_t>("--folds", "/folds", "Cross-validation folds");
  params->option<std::size_t>("--replicates", "/replicates", "Seeded replicates");
  params->option<std::uint64_t>("--seed", "/seed", "Fold and head seed");
  params->option<bool>("--baseline", "/baseline", "Also fit the linear baseline (true/false)");
  params->option<std::string>("--out", "/out", "Output directory");
  return {std::move(params), [](const json& cfg) {
            const fs::path checkpoint = require_string(cfg, "/checkpoint");
            const ModelParams model = load_checkpoint(checkpoint);
            const Artifacts artifacts = load_artifacts(checkpoint, get<std::string>(cfg, "/data"));
            check_compatible(model.config, checkpoint, artifacts);
            const fs::path dataset = require_string(cfg, "/dataset");
            fs::path sidecar = get<std::string>(cfg, "/sidecar");
            if (sidecar.empty()) sidecar = fs::path(dataset).replace_extension(".json");
            FinetuneTable table = read_finetune_table(dataset, sidecar);
            const auto task = get<std::string>(cfg, "/task");
            if (!task.empty()) table.task = parse_task_kind(task);
            const FinetuneDataset data = prepare_finetune_dataset(table, artifacts.vocab, artifacts.ecdfs);

            FinetuneConfig fc;
            const auto grid = get<std::string>(cfg, "/grid");
            if (!grid.empty()) fc.grid = finetune_grid_from_json(read_text_file(grid));
            fc.k_folds = get<std::size_t>(cfg, "/folds");
            fc.replicates = get<std::size_t>(cfg, "/replicates");
            fc.seed = get<std::uint64_t>(cfg, "/seed");
            OutputGuard out(require_string(cfg, "/out"));
            std::printf("%zu rows, %zu lab columns, %zu extra columns, %zu grid cells\n", data.rows(),
                        data.lab_columns.size(), data.extra_columns.size(), fc.grid.cells());
            std::vector<GridSearchResult> results;
            results.push_back(grid_search_finetune(model, data, fc));
            results.back().model = model_mode_name(model.config.mode);
            if (results.back().max_base_grad != 0.0) throw NumericError("frozen base received a gradient");
            write_text_file(out.file("grid.csv"), grid_table_csv(std::span(results)));
            if (get<bool>(cfg, "/baseline")) {
              LinearBaselineConfig lc;
              lc.c_grid = get<std::vector<double>>(cfg, "/c_grid");
              lc.k_folds = fc.k_folds;
              lc.replicates = fc.replicates;
              lc.seed = fc.seed;
              results.push_back(fit_linear_baseline(data, lc));
              for (const auto& w : results.back().warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
              write_text_file(out.file("baseline.csv"), grid_table_csv(std::span(results).subspan(1)));
            }
            write_text_file(out.file("summary.csv"), summary_table_csv(results));
            write_config(out, "finetune", cfg);
            for (const GridSearchResult& r : results) {
              std::printf("%-10s %s %s\n", r.model.c_str(), r.metric.c_str(), mean_min_max(r.best_cell()).c_str());
            }
            out.commit();
          }};
}

Command dump_embeddings(CLI::App& root) {
  CLI::App* app = root.add_subcommand("dump-embeddings", "Write final per-lab embeddings as CSV");
  auto params = std::make_unique<ParamSet>(
      app, json{{"checkpoint", ""}, {"data", ""}, {"split", "test"}, {"limit", 0}, {"out", ""}});
  params->option<std::string>("--checkpoint", "/checkpoint", "Checkpoint directory");
  params->option<std::string>("--data", "/data", "Preprocessed directory");
  params->option<std::string>("--split", "/split", "train, val or test");
  params->option<std::size_t>("--limit", "/limit", "At most this many bags (0: all)");
  params->option<std::string>("--out", "/out", "Output CSV");
  return {std::move(params), [](const json& cfg) {
            const fs::path checkpoint = require_string(cfg, "/checkpoint");
            const std::string data = require_string(cfg, "/data");
            const ModelParams model = load_checkpoint(checkpoint);
            const Artifacts artifacts = load_artifacts(checkpoint, data);
            check_compatible(model.config, checkpoint, artifacts);
            std::vector<LabBag> bags = split_bags(data, get<std::string>(cfg, "/split"));
            const auto limit = get<std::size_t>(cfg, "/limit");
            if (limit > 0 && bags.size() > limit) bags.resize(limit);
            for (LabBag& bag : bags) bag = unmask(bag);

            const std::size_t d = model.config.d_model;
            std::string csv = "bag,position,code,value";
            for (std::size_t k = 0; k < d; ++k) csv += ",e" + std::to_string(k);
            csv += '\n';
            NoGradGuard no_grad;
            constexpr std::size_t kChunk = 64;
            for (std::size_t start = 0; start < bags.size(); start += kChunk) {
              const auto chunk = std::span<const LabBag>(bags).subspan(start, std::min(kChunk, bags.size() - start));
              const PaddedBatch batch = pad_batch(chunk);
              const Tensor h = encode(model, batch, ForwardMode{});
              for (std::size_t b = 0; b < chunk.size(); ++b) {
                const LabBag& bag = chunk[b];
                for (std::size_t p = 0; p < bag.size(); ++p) {
                  csv += std::to_string(start + b) + "," + std::to_string(p) + "," +
                         artifacts.vocab.code_of(bag.tokens[p]) + ",";
                  if (!bag.null_flags[p]) append_number(csv, bag.values[p]);
                  const Real* row = h.data().data() + batch.flat(b, p) * d;
                  for (std::size_t k = 0; k < d; ++k) {
                    csv += ',';
                    append_number(csv, static_cast<double>(row[k]));
                  }
                  csv += '\n';
                }
              }
            }
            OutputGuard out(require_string(cfg, "/out"), false);
            write_text_file(out.root(), csv);
            std::printf("wrote embeddings of %zu bags to %s\n", bags.size(), out.root().c_str());
            out.commit();
          }};
}

}  // namespace

std::vector<Command> register_commands(CLI::App& app) {
  std::vector<Command> out;
  out.push_back(synth(app));
  out.push_back(preprocess(app));
  out.push_back(pretrain_command(app));
  out.push_back(impute(app));
  out.push_back(finetune(app));
  out.push_back(dump_embeddings(app));
  return out;
}

}  // namespace labtx::tools
