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

#include "labtx/model/params.hpp"

#include <algorithm>
#include <functional>

#include "labtx/numerics/init.hpp"

namespace labtx {
namespace {

constexpr double kEmbeddingStddev = 0.02;

enum class Kind { kWeight, kBias, kGain, kEmbedding };

using Visitor = std::function<void(const std::string& name, const Shape& shape, Kind kind, Tensor* slot)>;

// Walks the parameter layout of a config in canonical order. `params` may be
// null when only names and shapes are wanted.
void visit_layout(const ModelConfig& c, ModelParams* params, const Visitor& fn) {
  const std::size_t d = c.d_model;
  const auto slot = [&](auto getter) -> Tensor* { return params ? getter(*params) : nullptr; };
  const auto dense = [&](const std::string& name, std::size_t in, std::size_t out, auto getter) {
    fn(name + ".weight", {in, out}, Kind::kWeight, slot([&](ModelParams& p) { return &getter(p).weight; }));
    fn(name + ".bias", {out}, Kind::kBias, slot([&](ModelParams& p) { return &getter(p).bias; }));
  };
  const auto norm = [&](const std::string& name, auto getter) {
    fn(name + ".gain", {d}, Kind::kGain, slot([&](ModelParams& p) { return &getter(p).gain; }));
    fn(name + ".bias", {d}, Kind::kBias, slot([&](ModelParams& p) { return &getter(p).bias; }));
  };
  const bool labrador = c.mode == ModelMode::kLabrador;

  fn("token_embedding", {c.embedding_rows(), d}, Kind::kEmbedding,
     slot([](ModelParams& p) { return &p.token_embedding; }));
  if (labrador) {
    dense("continuous_embedding.value_proj", 1, d,
          [](ModelParams& p) -> DenseParams& { return p.continuous_embedding.value_proj; });
    dense("continuous_embedding.mix", d, d, [](ModelParams& p) -> DenseParams& { return p.continuous_embedding.mix; });
    norm("continuous_embedding.norm", [](ModelParams& p) -> LayerNormParams& { return p.continuous_embedding.norm; });
  }
  const std::size_t width = c.num_heads * c.resolved_key_dim();
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string b = "blocks." + std::to_string(l);
    const auto attn = [l](ModelParams& p) -> AttentionWeights& { return p.blocks[l].attention; };
    const auto proj = [&](const std::string& name, std::size_t in, std::size_t out, Tensor AttentionWeights::*w,
                          Tensor AttentionWeights::*bias) {
      fn(b + ".attention." + name + ".weight", {in, out}, Kind::kWeight,
         slot([&](ModelParams& p) { return &(attn(p).*w); }));
      fn(b + ".attention." + name + ".bias", {out}, Kind::kBias, slot([&](ModelParams& p) { return &(attn(p).*bias); }));
    };
    proj("query", d, width, &AttentionWeights::query_w, &AttentionWeights::query_b);
    proj("key", d, width, &AttentionWeights::key_w, &AttentionWeights::key_b);
    proj("value", d, width, &AttentionWeights::value_w, &AttentionWeights::value_b);
    proj("output", width, d, &AttentionWeights::output_w, &AttentionWeights::output_b);
    norm(b + ".attention_norm", [l](ModelParams& p) -> LayerNormParams& { return p.blocks[l].attention_norm; });
    dense(b + ".ff_in", d, c.ff_dim, [l](ModelParams& p) -> DenseParams& { return p.blocks[l].ff_in; });
    dense(b + ".ff_out", c.ff_dim, d, [l](ModelParams& p) -> DenseParams& { return p.blocks[l].ff_out; });
    norm(b + ".ff_norm", [l](ModelParams& p) -> LayerNormParams& { return p.blocks[l].ff_norm; });
  }
  const std::size_t v = c.head_width();
  dense("categorical_head.hidden", d, d, [](ModelParams& p) -> DenseParams& { return p.categorical_head.hidden; });
  dense("categorical_head.logits", d, v, [](ModelParams& p) -> DenseParams& { return p.categorical_head.logits; });
  if (labrador) {
    dense("continuous_head.hidden", d + v, d + v,
          [](ModelParams& p) -> DenseParams& { return p.continuous_head.hidden; });
    dense("continuous_head.out", d + v, 1, [](ModelParams& p) -> DenseParams& { return p.continuous_head.out; });
  }
}

std::string group_of(const std::string& name) { return name.substr(0, name.find('.')); }

}  // namespace

std::vector<std::pair<std::string, Tensor>> ModelParams::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto* self = const_cast<ModelParams*>(this);
  visit_layout(config, self, [&](const std::string& name, const Shape&, Kind, Tensor* t) { out.emplace_back(name, *t); });
  return out;
}

std::vector<Tensor> ModelParams::trainables() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_tensors()) out.push_back(t);
  return out;
}

void ModelParams::set_requires_grad(bool on) const {
  for (Tensor t : trainables()) t.set_requires_grad(on);
}

void ModelParams::zero_grad() const {
  for (Tensor t : trainables()) t.zero_grad();
}

std::vector<ParamShape> param_shapes(const ModelConfig& config) {
  config.validate();
  std::vector<ParamShape> out;
  visit_layout(config, nullptr, [&](const std::string& name, const Shape& shape, Kind, Tensor*) {
    out.push_back({name, shape});
  });
  return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params;
  params.config = config;
  params.blocks.resize(config.num_layers);
  Rng rng(seed);
  visit_layout(config, &params, [&](const std::string&, const Shape& shape, Kind kind, Tensor* t) {
    switch (kind) {
      case Kind::kWeight:
        *t = init::xavier_uniform(shape[0], shape[1], rng);
        break;
      case Kind::kBias:
        *t = Tensor(shape, Real{0});
        break;
      case Kind::kGain:
        *t = Tensor(shape, Real{1});
        break;
      case Kind::kEmbedding: {
        *t = init::normal(shape, kEmbeddingStddev, rng);
        auto row0 = t->mutable_data().subspan(0, shape[1]);
        std::fill(row0.begin(), row0.end(), Real{0});
        break;
      }
    }
    t->set_requires_grad(true);
  });
  return params;
}

ModelParams clone_params(const ModelParams& params) {
  ModelParams out;
  out.config = params.config;
  out.blocks.resize(params.config.num_layers);
  const auto source = params.named_tensors();
  std::size_t i = 0;
  visit_layout(out.config, &out, [&](const std::string&, const Shape&, Kind, Tensor* t) {
    const Tensor& src = source[i++].second;
    *t = src.clone();
    t->set_requires_grad(src.requires_grad());
  });
  return out;
}

ParamCount count_params(const ModelConfig& config) {
  ParamCount count;
  for (const ParamShape& p : param_shapes(config)) {
    const std::size_t n = shape_numel(p.shape);
    count.total += n;
    const std::string group = group_of(p.name);
    if (count.groups.empty() || count.groups.back().first != group) count.groups.emplace_back(group, 0);
    count.groups.back().second += n;
  }
  return count;
}

}  // namespace labtx
