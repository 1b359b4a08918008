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

#include "labtx/corpus/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "labtx/error.hpp"
#include "labtx/numerics/init.hpp"

namespace labtx {
namespace {

constexpr std::int64_t kHour = 3600;
constexpr std::size_t kMinPanel = 3;

// Knuth's multiplication method; means here are small.
std::size_t poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  const double limit = std::exp(-mean);
  std::size_t k = 0;
  double product = init::uniform01(rng);
  while (product > limit) {
    ++k;
    product *= init::uniform01(rng);
  }
  return k;
}

std::vector<std::vector<std::size_t>> make_panels(std::size_t n_codes, std::size_t panel_size) {
  std::vector<std::vector<std::size_t>> panels;
  for (std::size_t start = 0; start < n_codes; start += panel_size) {
    std::vector<std::size_t> panel;
    for (std::size_t j = start; j < std::min(n_codes, start + panel_size); ++j) panel.push_back(j);
    panels.push_back(std::move(panel));
  }
  // A trailing panel too small to form a bag joins its neighbour.
  if (panels.size() > 1 && panels.back().size() < kMinPanel) {
    auto tail = std::move(panels.back());
    panels.pop_back();
    panels.back().insert(panels.back().end(), tail.begin(), tail.end());
  }
  return panels;
}

}  // namespace

std::string synthetic_code_id(std::size_t index) { return std::to_string(50800 + index); }

SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& o) {
  if (o.n_codes < 3) throw ConfigError("synthetic corpus needs at least 3 codes");
  if (o.latent_dim < 1) throw ConfigError("latent_dim must be at least 1");
  if (o.panel_size < 3) throw ConfigError("panel_size must be at least 3");
  if (!(o.keep_prob > 0.0 && o.keep_prob <= 1.0)) throw ConfigError("keep_prob must lie in (0, 1]");
  if (!(o.null_rate >= 0.0 && o.null_rate < 1.0)) throw ConfigError("null_rate must lie in [0, 1)");
  if (!(o.bag_rate >= 1.0)) throw ConfigError("bag_rate must be at least 1");
  if (o.n_binary > o.n_codes) throw ConfigError("n_binary exceeds n_codes");
  if (o.noise_sigma < 0.0) throw ConfigError("noise_sigma must be non-negative");

  Rng rng(o.seed);
  SyntheticCorpus corpus;
  SyntheticTruth& truth = corpus.truth;
  truth.latent_dim = o.latent_dim;
  for (std::size_t j = 0; j < o.n_codes; ++j) {
    SyntheticCode code;
    code.id = synthetic_code_id(j);
    code.binary = j >= o.n_codes - o.n_binary;
    code.loadings.assign(o.latent_dim, 0.0);
    for (std::size_t k = 0; k < o.latent_dim; ++k) {
      if (o.unit_loadings) {
        code.loadings[k] = 1.0;
      } else if (k == j % o.latent_dim) {
        code.loadings[k] = o.loading_strength * (0.75 + 0.5 * init::uniform01(rng));
      } else if (!o.orthogonal) {
        code.loadings[k] = o.cross_loading * init::standard_normal(rng);
      }
    }
    code.sigma = o.noise_sigma;
    code.offset = 10.0 + 90.0 * init::uniform01(rng);
    code.scale = 1.0 + 9.0 * init::uniform01(rng);
    truth.codes.push_back(std::move(code));
  }
  truth.panels = make_panels(o.n_codes, o.panel_size);

  std::vector<double> panel_weight(truth.panels.size());
  double total_weight = 0.0;
  for (std::size_t p = 0; p < panel_weight.size(); ++p) total_weight += panel_weight[p] = 1.0 / static_cast<double>(p + 1);

  char pid[32];
  for (std::size_t patient = 0; patient < o.n_patients; ++patient) {
    std::snprintf(pid, sizeof(pid), "P%06zu", patient);
    const std::size_t n_bags = 1 + poisson(rng, o.bag_rate - 1.0);
    std::int64_t time = 0;
    for (std::size_t b = 0; b < n_bags; ++b) {
      time += kHour * static_cast<std::int64_t>(1 + init::uniform_index(rng, 48));
      SyntheticBag bag{pid, time, std::vector<double>(o.latent_dim)};
      for (double& z : bag.latent) z = init::standard_normal(rng);

      double u = init::uniform01(rng) * total_weight;
      std::size_t panel = 0;
      while (panel + 1 < panel_weight.size() && u >= panel_weight[panel]) u -= panel_weight[panel++];
      const auto& members = truth.panels[panel];

      std::vector<std::size_t> chosen;
      std::vector<std::size_t> dropped;
      for (std::size_t j : members) (init::uniform01(rng) < o.keep_prob ? chosen : dropped).push_back(j);
      while (chosen.size() < 3 && !dropped.empty()) {
        const std::size_t pick = init::uniform_index(rng, dropped.size());
        chosen.push_back(dropped[pick]);
        dropped.erase(dropped.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      std::sort(chosen.begin(), chosen.end());

      for (std::size_t j : chosen) {
        const SyntheticCode& code = truth.codes[j];
        LabEvent ev{bag.patient_id, time, code.id, std::nullopt};
        const double noise = init::standard_normal(rng);
        const bool null_draw = o.null_rate > 0.0 && init::uniform01(rng) < o.null_rate;
        if (!code.binary && !null_draw) {
          double signal = code.sigma * noise;
          for (std::size_t k = 0; k < o.latent_dim; ++k) signal += code.loadings[k] * bag.latent[k];
          ev.value = code.offset + code.scale * signal;
        }
        corpus.events.push_back(std::move(ev));
      }
      corpus.bags.push_back(std::move(bag));
    }
  }
  return corpus;
}

std::string synthetic_truth_to_json(const SyntheticTruth& truth) {
  nlohmann::json codes = nlohmann::json::array();
  for (const SyntheticCode& c : truth.codes) {
    codes.push_back({{"id", c.id},
                     {"loadings", c.loadings},
                     {"sigma", c.sigma},
                     {"offset", c.offset},
                     {"scale", c.scale},
                     {"binary", c.binary}});
  }
  nlohmann::json doc = {{"latent_dim", truth.latent_dim}, {"codes", codes}, {"panels", truth.panels}};
  return doc.dump(1) + "\n";
}

SyntheticTruth synthetic_truth_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    SyntheticTruth truth;
    truth.latent_dim = doc.at("latent_dim").get<std::size_t>();
    for (const auto& c : doc.at("codes")) {
      SyntheticCode code;
      code.id = c.at("id").get<std::string>();
      code.loadings = c.at("loadings").get<std::vector<double>>();
      code.sigma = c.at("sigma").get<double>();
      code.offset = c.value("offset", 0.0);
      code.scale = c.value("scale", 1.0);
      code.binary = c.value("binary", false);
      if (code.loadings.size() != truth.latent_dim) throw DataError("code " + code.id + " has wrong loading count");
      truth.codes.push_back(std::move(code));
    }
    truth.panels = doc.value("panels", std::vector<std::vector<std::size_t>>{});
    return truth;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad synthetic ground truth: ") + e.what());
  }
}

double synthetic_code_correlation(const SyntheticTruth& truth, std::size_t i, std::size_t j) {
  const SyntheticCode& a = truth.codes.at(i);
  const SyntheticCode& b = truth.codes.at(j);
  double cov = 0.0, va = a.sigma * a.sigma, vb = b.sigma * b.sigma;
  for (std::size_t k = 0; k < truth.latent_dim; ++k) {
    cov += a.loadings[k] * b.loadings[k];
    va += a.loadings[k] * a.loadings[k];
    vb += b.loadings[k] * b.loadings[k];
  }
  if (i == j) return 1.0;
  if (va == 0.0 || vb == 0.0) throw DataError("code without variance has no correlation");
  return cov / std::sqrt(va * vb);
}

}  // namespace labtx
