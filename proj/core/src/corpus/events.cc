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

#include "labtx/corpus/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string_view>

#include "labtx/ecdf/io.hpp"
#include "labtx/error.hpp"
#include "labtx/numerics/init.hpp"

namespace labtx {
namespace {

[[noreturn]] void bad_row(std::size_t line, const std::string& what) {
  throw DataError("events CSV line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

std::vector<LabEvent> parse_events_csv(const std::string& text) {
  std::vector<LabEvent> events;
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.remove_prefix(3);  // BOM
      if (line != kEventsCsvHeader) {
        bad_row(line_no, "expected header '" + std::string(kEventsCsvHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 4) bad_row(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
    LabEvent ev;
    if (fields[0].empty()) bad_row(line_no, "empty patient_id");
    ev.patient_id = std::string(fields[0]);
    {
      auto [ptr, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), ev.chart_time);
      if (ec != std::errc() || ptr != fields[1].data() + fields[1].size()) {
        bad_row(line_no, "chart_time '" + std::string(fields[1]) + "' is not an integer");
      }
      if (ev.chart_time < 0) bad_row(line_no, "negative chart_time");
    }
    if (fields[2].empty()) bad_row(line_no, "empty code_id");
    ev.code = std::string(fields[2]);
    if (!fields[3].empty()) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), v);
      if (ec != std::errc() || ptr != fields[3].data() + fields[3].size() || !std::isfinite(v)) {
        bad_row(line_no, "value '" + std::string(fields[3]) + "' is not a finite number");
      }
      ev.value = v;
    }
    events.push_back(std::move(ev));
  }
  if (!header_seen) throw DataError("events CSV is empty (missing header)");
  return events;
}

std::vector<LabEvent> read_events_csv(const std::filesystem::path& path) {
  return parse_events_csv(read_text_file(path));
}

std::string events_to_csv(std::span<const LabEvent> events) {
  std::string out = kEventsCsvHeader;
  out += '\n';
  for (const LabEvent& ev : events) {
    out += ev.patient_id;
    out += ',';
    out += std::to_string(ev.chart_time);
    out += ',';
    out += ev.code;
    out += ',';
    if (ev.value) append_double(out, *ev.value);
    out += '\n';
  }
  return out;
}

void write_events_csv(const std::filesystem::path& path, std::span<const LabEvent> events) {
  write_text_file(path, events_to_csv(events));
}

CodeCounts count_codes(std::span<const LabEvent> events) {
  CodeCounts counts;
  for (const LabEvent& ev : events) ++counts[ev.code];
  return counts;
}

std::vector<LabEvent> filter_rare_codes(std::span<const LabEvent> events, std::size_t min_count) {
  const CodeCounts counts = count_codes(events);
  std::vector<LabEvent> kept;
  kept.reserve(events.size());
  for (const LabEvent& ev : events) {
    if (counts.at(ev.code) > min_count) kept.push_back(ev);
  }
  return kept;
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split PatientSplit::of(const std::string& patient_id) const {
  if (train.count(patient_id)) return Split::kTrain;
  if (val.count(patient_id)) return Split::kVal;
  if (test.count(patient_id)) return Split::kTest;
  throw ContractError("patient '" + patient_id + "' is not in any split");
}

PatientSplit split_patients(std::span<const std::string> patient_ids, std::array<double, 3> fractions,
                            std::uint64_t seed) {
  double total = 0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1, got " + std::to_string(total));

  std::set<std::string> unique(patient_ids.begin(), patient_ids.end());
  std::vector<std::string> ids(unique.begin(), unique.end());
  Rng rng(seed);
  init::shuffle(ids, rng);

  const std::size_t n = ids.size();
  const auto portion = [n](double f) {
    return std::min(n, static_cast<std::size_t>(std::llround(f * static_cast<double>(n))));
  };
  const std::size_t n_train = portion(fractions[0]);
  const std::size_t n_val = std::min(n - n_train, portion(fractions[1]));

  PatientSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) {
      split.train.insert(ids[i]);
    } else if (i < n_train + n_val) {
      split.val.insert(ids[i]);
    } else {
      split.test.insert(ids[i]);
    }
  }
  return split;
}

std::vector<LabEvent> events_for(std::span<const LabEvent> events, const std::set<std::string>& patients) {
  std::vector<LabEvent> out;
  for (const LabEvent& ev : events) {
    if (patients.count(ev.patient_id)) out.push_back(ev);
  }
  return out;
}

}  // namespace labtx
