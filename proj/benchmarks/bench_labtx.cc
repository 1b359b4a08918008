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

#include <benchmark/benchmark.h>

#include <filesystem>

#include "labtx/corpus/bag.hpp"
#include "labtx/corpus/shard.hpp"
#include "labtx/ecdf/ecdf.hpp"
#include "labtx/model/forward.hpp"
#include "labtx/numerics/attention.hpp"
#include "labtx/numerics/init.hpp"
#include "labtx/numerics/ops.hpp"

namespace labtx {
namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = init::normal({n, n}, 1.0, rng), b = init::normal({n, n}, 1.0, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b).data().data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_MultiHeadAttention(benchmark::State& state) {
  const std::size_t b = 32, len = static_cast<std::size_t>(state.range(0)), d = 64, heads = 2;
  Rng rng(2);
  AttentionWeights w;
  w.query_w = init::xavier_uniform(d, heads * d, rng);
  w.key_w = init::xavier_uniform(d, heads * d, rng);
  w.value_w = init::xavier_uniform(d, heads * d, rng);
  w.output_w = init::xavier_uniform(heads * d, d, rng);
  w.query_b = w.key_b = w.value_b = Tensor({heads * d}, Real{0});
  w.output_b = Tensor({d}, Real{0});
  const Tensor x = init::normal({b, len, d}, 1.0, rng);
  const std::vector<std::uint8_t> pad(b * len, 0);
  for (auto _ : state) benchmark::DoNotOptimize(ops::multi_head_attention(x, w, d, heads, pad).data().data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * b));
}
BENCHMARK(BM_MultiHeadAttention)->Arg(8)->Arg(16)->Arg(32);

void BM_EcdfApply(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> train(static_cast<std::size_t>(state.range(0)));
  for (double& x : train) x = init::uniform01(rng);
  const CompressedEcdf e = build_ecdf("c", train);
  std::vector<double> queries(4096);
  for (double& x : queries) x = init::uniform01(rng);
  for (auto _ : state) {
    double acc = 0;
    for (double q : queries) acc += e.apply(q);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * queries.size()));
}
BENCHMARK(BM_EcdfApply)->Arg(1000)->Arg(100000);

void BM_ShardRead(benchmark::State& state) {
  Rng rng(4);
  std::vector<LabBag> bags;
  for (int i = 0; i < 10000; ++i) {
    LabBag bag;
    const std::size_t len = 3 + init::uniform_index(rng, 15);
    for (std::size_t p = 0; p < len; ++p) {
      bag.tokens.push_back(static_cast<Token>(1 + init::uniform_index(rng, 500)));
      bag.values.push_back(init::uniform01(rng));
      bag.null_flags.push_back(0);
    }
    bags.push_back(mask_bag(bag, rng, 1, 501));
  }
  const auto dir = std::filesystem::temp_directory_path() / "labtx_bench_shards";
  std::filesystem::remove_all(dir);
  write_shards(bags, dir, 4096);
  for (auto _ : state) benchmark::DoNotOptimize(read_shards(dir).size());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * bags.size()));
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_ShardRead)->Unit(benchmark::kMillisecond);

void BM_LabradorForward(benchmark::State& state) {
  ModelConfig c;
  c.vocab_size = 20;
  c.d_model = 64;
  c.num_layers = 4;
  c.num_heads = 2;
  c.ff_dim = 128;
  const ModelParams p = init_params(c, 5);
  Rng rng(6);
  std::vector<LabBag> bags;
  for (int i = 0; i < 32; ++i) {
    LabBag bag;
    for (std::size_t j = 0; j < 8; ++j) {
      bag.tokens.push_back(static_cast<Token>(1 + init::uniform_index(rng, 20)));
      bag.values.push_back(init::uniform01(rng));
      bag.null_flags.push_back(0);
    }
    bags.push_back(mask_bag(bag, rng, 1, c.mask_token()));
  }
  const PaddedBatch batch = pad_batch(bags);
  for (auto _ : state) benchmark::DoNotOptimize(forward_masked(p, batch, {}).values.data().data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * bags.size()));
}
BENCHMARK(BM_LabradorForward)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace labtx

BENCHMARK_MAIN();
