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

#ifndef LABTX_CORPUS_EVENTS_HPP_
#define LABTX_CORPUS_EVENTS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "labtx/ecdf/vocab.hpp"

namespace labtx {

// One row of a lab-event stream.
struct LabEvent {
  std::string patient_id;
  std::int64_t chart_time = 0;  // epoch seconds, >= 0
  std::string code;
  std::optional<double> value;  // nullopt: recorded without a result

  bool operator==(const LabEvent&) const = default;
};

inline constexpr const char* kEventsCsvHeader = "patient_id,chart_time,code_id,value";

// CSV with header "patient_id,chart_time,code_id,value"; an empty value field
// means missing. Malformed rows raise DataError naming the 1-based line.
std::vector<LabEvent> parse_events_csv(const std::string& text);
std::vector<LabEvent> read_events_csv(const std::filesystem::path& path);
std::string events_to_csv(std::span<const LabEvent> events);
void write_events_csv(const std::filesystem::path& path, std::span<const LabEvent> events);

CodeCounts count_codes(std::span<const LabEvent> events);

// Keeps events whose code occurs strictly more than min_count times.
std::vector<LabEvent> filter_rare_codes(std::span<const LabEvent> events, std::size_t min_count);

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split split);

struct PatientSplit {
  std::set<std::string> train;
  std::set<std::string> val;
  std::set<std::string> test;

  Split of(const std::string& patient_id) const;
};

// Uniform random partition of the distinct patient ids. Sizes are
// round(f_train * n), round(f_val * n) and the remainder. Fractions must be
// non-negative and sum to 1 (ConfigError otherwise).
PatientSplit split_patients(std::span<const std::string> patient_ids, std::array<double, 3> fractions,
                            std::uint64_t seed);

std::vector<LabEvent> events_for(std::span<const LabEvent> events, const std::set<std::string>& patients);

}  // namespace labtx

#endif  // LABTX_CORPUS_EVENTS_HPP_
