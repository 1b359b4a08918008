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

// Synthetic lab-event corpora driven by a Gaussian latent-factor model.
//
// Each bag draws z ~ N(0, I_latent_dim). Code j reports
//   raw_j = offset_j + scale_j * (a_j . z + sigma_j * eps),   eps ~ N(0, 1).
// Codes are grouped into panels; a bag orders one panel (lower panels are
// ordered more often) and keeps each of its codes with probability
// keep_prob, so which code is absent from a bag is partly predictable.

#ifndef LABTX_CORPUS_SYNTHETIC_HPP_
#define LABTX_CORPUS_SYNTHETIC_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "labtx/corpus/events.hpp"

namespace labtx {

struct SyntheticOptions {
  std::size_t n_patients = 100;
  std::size_t n_codes = 10;
  std::size_t latent_dim = 2;
  // Mean bags per patient (at least one bag each).
  double bag_rate = 3.0;
  std::uint64_t seed = 0;
  // Primary loading magnitude; each code's primary loading is drawn from
  // strength * [0.75, 1.25).
  double loading_strength = 1.0;
  double noise_sigma = 0.3;
  // Stddev of loadings on non-primary axes. Ignored when orthogonal.
  double cross_loading = 0.2;
  // Every code loads on exactly one axis (code index mod latent_dim).
  bool orthogonal = false;
  // Every loading equals 1 (degenerate generator).
  bool unit_loadings = false;
  std::size_t panel_size = 5;
  double keep_prob = 0.85;
  // Probability that a numeric lab is recorded without a value.
  double null_rate = 0.0;
  // The last n_binary codes never carry values.
  std::size_t n_binary = 0;
};

struct SyntheticCode {
  std::string id;
  std::vector<double> loadings;
  double sigma = 0.0;
  double offset = 0.0;
  double scale = 1.0;
  bool binary = false;
};

struct SyntheticTruth {
  std::size_t latent_dim = 0;
  std::vector<SyntheticCode> codes;
  std::vector<std::vector<std::size_t>> panels;  // indices into codes
};

// Latent state of one emitted bag, keyed like the bag itself.
struct SyntheticBag {
  std::string patient_id;
  std::int64_t chart_time = 0;
  std::vector<double> latent;
};

struct SyntheticCorpus {
  std::vector<LabEvent> events;
  SyntheticTruth truth;
  std::vector<SyntheticBag> bags;
};

// Raises ConfigError when n_codes < 3, latent_dim < 1 or a rate is out of
// range. Deterministic per seed.
SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& options);

std::string synthetic_code_id(std::size_t index);
std::string synthetic_truth_to_json(const SyntheticTruth& truth);
SyntheticTruth synthetic_truth_from_json(const std::string& text);

// Population correlation between the noisy latent signals of two numeric
// codes, before the monotone eCDF transform.
double synthetic_code_correlation(const SyntheticTruth& truth, std::size_t i, std::size_t j);

}  // namespace labtx

#endif  // LABTX_CORPUS_SYNTHETIC_HPP_
