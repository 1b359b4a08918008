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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "labtx/corpus/bag.hpp"
#include "labtx/corpus/events.hpp"
#include "labtx/corpus/pipeline.hpp"
#include "labtx/corpus/shard.hpp"
#include "labtx/corpus/synthetic.hpp"
#include "labtx/ecdf/io.hpp"
#include "labtx/error.hpp"
#include "labtx/numerics/init.hpp"

namespace labtx {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Events, ParsesRowsAndMissingValues) {
  const auto events = parse_events_csv("patient_id,chart_time,code_id,value\nP1,100,51221,4.5\nP1,100,50912,\n");
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0], (LabEvent{"P1", 100, "51221", 4.5}));
  EXPECT_FALSE(events[1].value.has_value());
}

TEST(Events, MalformedRowNamesTheLine) {
  const std::string text = "patient_id,chart_time,code_id,value\nP1,100,51221,4.5\nP1,abc,51221,1\n";
  try {
    parse_events_csv(text);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_events_csv("wrong,header\n"), DataError);
  EXPECT_THROW(parse_events_csv("patient_id,chart_time,code_id,value\nP1,1,2\n"), DataError);
  EXPECT_THROW(parse_events_csv("patient_id,chart_time,code_id,value\nP1,1,2,x\n"), DataError);
}

TEST(Events, CsvRoundTrip) {
  const std::vector<LabEvent> events{{"P1", 5, "a", 0.1}, {"P2", 7, "b", std::nullopt}, {"P2", 7, "c", -3e-17}};
  EXPECT_EQ(parse_events_csv(events_to_csv(events)), events);
}

TEST(Events, RareCodeFilter) {
  std::vector<LabEvent> events;
  for (int i = 0; i < 5; ++i) events.push_back({"P", i, "five", 1.0});
  for (int i = 0; i < 6; ++i) events.push_back({"P", i, "six", 1.0});
  EXPECT_EQ(filter_rare_codes(events, 0).size(), events.size());
  const auto kept = filter_rare_codes(events, 5);
  ASSERT_EQ(kept.size(), 6u);
  for (const auto& ev : kept) EXPECT_EQ(ev.code, "six");
}

TEST(Events, RareCodeFilterMatchesCountingOracle) {
  Rng rng(6);
  std::vector<LabEvent> events;
  for (int i = 0; i < 3000; ++i) {
    events.push_back({"P", i, "c" + std::to_string(init::uniform_index(rng, 40) * init::uniform_index(rng, 3)), 1.0});
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& ev : events) ++counts[ev.code];
  for (std::size_t min_count : {0u, 10u, 50u, 200u}) {
    std::set<std::string> expected, got;
    for (const auto& [code, n] : counts) {
      if (n > min_count) expected.insert(code);
    }
    for (const auto& ev : filter_rare_codes(events, min_count)) got.insert(ev.code);
    EXPECT_EQ(got, expected) << min_count;
  }
}

TEST(Split, ExactSizesDeterministicAndDisjoint) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("P" + std::to_string(i));
  const PatientSplit a = split_patients(ids, {0.7, 0.1, 0.2}, 3);
  EXPECT_EQ(a.train.size(), 7u);
  EXPECT_EQ(a.val.size(), 1u);
  EXPECT_EQ(a.test.size(), 2u);
  const PatientSplit b = split_patients(ids, {0.7, 0.1, 0.2}, 3);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  for (const auto& id : ids) {
    const int in = static_cast<int>(a.train.count(id) + a.val.count(id) + a.test.count(id));
    EXPECT_EQ(in, 1) << id;
  }
  EXPECT_THROW(split_patients(ids, {0.7, 0.7, 0.2}, 3), ConfigError);
}

Vocab toy_vocab() { return build_continuous_vocab({{"a", 3}, {"b", 2}, {"c", 1}}); }

EcdfTable toy_ecdfs() {
  EcdfTable t;
  for (const char* c : {"a", "b", "c"}) t.emplace(c, build_ecdf(c, std::vector<double>{1, 2, 3, 4}));
  return t;
}

TEST(Bags, SmallBagsAreDropped) {
  const std::vector<LabEvent> events{{"P", 1, "a", 1.0}, {"P", 1, "b", 2.0}};
  BagBuildStats stats;
  EXPECT_TRUE(build_bags(events, toy_vocab(), toy_ecdfs(), &stats).empty());
  EXPECT_EQ(stats.bags_too_small, 1u);
}

TEST(Bags, ValuelessLabBecomesNull) {
  const std::vector<LabEvent> events{{"P", 1, "a", 1.0}, {"P", 1, "b", std::nullopt}, {"P", 1, "c", 4.0}};
  const auto bags = build_bags(events, toy_vocab(), toy_ecdfs());
  ASSERT_EQ(bags.size(), 1u);
  EXPECT_EQ(bags[0].size(), 3u);
  EXPECT_EQ(bags[0].null_flags, (std::vector<std::uint8_t>{0, 1, 0}));
  EXPECT_EQ(bags[0].values[0], 0.25);
  EXPECT_EQ(bags[0].values[2], 1.0);
  EXPECT_EQ(bags[0].tokens, (std::vector<Token>{1, 2, 3}));
}

TEST(Bags, CountMatchesGroupByOracle) {
  SyntheticOptions o;
  o.n_patients = 200;
  o.n_codes = 6;
  o.seed = 12;
  o.keep_prob = 0.5;
  const SyntheticCorpus corpus = generate_synthetic_corpus(o);
  CodeCounts counts = count_codes(corpus.events);
  EcdfTable ecdfs;
  std::map<std::string, std::vector<double>> values;
  for (const auto& ev : corpus.events) values[ev.code].push_back(*ev.value);
  for (auto& [c, v] : values) ecdfs.emplace(c, build_ecdf(c, v));
  std::map<std::pair<std::string, std::int64_t>, std::size_t> groups;
  for (const auto& ev : corpus.events) ++groups[{ev.patient_id, ev.chart_time}];
  std::size_t expected = 0;
  for (const auto& [key, n] : groups) expected += n >= kMinBagSize ? 1 : 0;
  EXPECT_EQ(build_bags(corpus.events, build_continuous_vocab(counts), ecdfs).size(), expected);
}

LabBag toy_bag(std::size_t n) {
  LabBag bag;
  for (std::size_t i = 0; i < n; ++i) {
    bag.tokens.push_back(static_cast<Token>(1 + i % 3));
    bag.values.push_back(0.1 * static_cast<double>(i));
    bag.null_flags.push_back(i == 1 ? 1 : 0);
  }
  return bag;
}

TEST(Masking, SingleMaskIsRecoverable) {
  Rng rng(2);
  const LabBag bag = toy_bag(3);
  const LabBag masked = mask_bag(bag, rng, 1, 9);
  ASSERT_EQ(masked.masked.size(), 1u);
  const auto pos = masked.masked[0].position;
  EXPECT_EQ(masked.tokens[pos], 9);
  EXPECT_EQ(std::count(masked.tokens.begin(), masked.tokens.end(), 9), 1);
  EXPECT_TRUE(payload_equal(unmask(masked), bag));
}

TEST(Masking, AllPositionsAndDeterminism) {
  Rng a(5), b(5);
  const LabBag bag = toy_bag(4);
  const LabBag all = mask_bag(bag, a, 4, 9);
  EXPECT_EQ(all.tokens, (std::vector<Token>(4, 9)));
  const LabBag x = mask_bag(bag, a, 2, 9), y = mask_bag(bag, b, 4, 9);
  (void)y;
  Rng c(5), d(5);
  EXPECT_EQ(mask_bag(bag, c, 2, 9).masked, mask_bag(bag, d, 2, 9).masked);
  EXPECT_THROW(mask_bag(bag, a, 0, 9), ContractError);
  EXPECT_THROW(mask_bag(bag, a, 5, 9), ContractError);
  (void)x;
}

TEST(Padding, EqualLengthsHaveNoPadding) {
  const std::vector<LabBag> bags{toy_bag(3), toy_bag(3)};
  const PaddedBatch batch = pad_batch(bags);
  EXPECT_EQ(batch.length, 3u);
  EXPECT_EQ(batch.pad_mask, (std::vector<std::uint8_t>(6, 0)));
}

TEST(Padding, ShorterRowsArePadded) {
  Rng rng(1);
  const std::vector<LabBag> bags{mask_bag(toy_bag(3), rng, 1, 9), toy_bag(5)};
  const PaddedBatch batch = pad_batch(bags);
  EXPECT_EQ(batch.batch, 2u);
  EXPECT_EQ(batch.length, 5u);
  EXPECT_EQ(batch.pad_mask, (std::vector<std::uint8_t>{0, 0, 0, 1, 1, 0, 0, 0, 0, 0}));
  EXPECT_EQ(batch.tokens[3], kPadToken);
  ASSERT_EQ(batch.targets.size(), 1u);
  EXPECT_EQ(batch.targets[0].row, 0u);
}

std::vector<LabBag> random_bags(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabBag> bags;
  for (std::size_t i = 0; i < n; ++i) {
    LabBag bag;
    const std::size_t len = 3 + init::uniform_index(rng, 10);
    for (std::size_t p = 0; p < len; ++p) {
      const bool null = init::uniform01(rng) < 0.1;
      bag.tokens.push_back(static_cast<Token>(1 + init::uniform_index(rng, 20)));
      bag.values.push_back(null ? 0.0 : init::uniform01(rng));
      bag.null_flags.push_back(null ? 1 : 0);
    }
    bags.push_back(mask_bag(bag, rng, 1 + init::uniform_index(rng, 2), 21));
  }
  return bags;
}

TEST(Shards, RoundTripIsIdentity) {
  TempDir dir("labtx_shard_rt");
  const auto bags = random_bags(1000, 3);
  const auto files = write_shards(bags, dir.path(), 300, "train");
  EXPECT_EQ(files.size(), 4u);
  const auto back = read_shards(dir.path());
  ASSERT_EQ(back.size(), bags.size());
  for (std::size_t i = 0; i < bags.size(); ++i) ASSERT_TRUE(payload_equal(back[i], bags[i])) << i;
}

TEST(Shards, EmptyOrMissingDirectoryIsEmpty) {
  TempDir dir("labtx_shard_empty");
  EXPECT_TRUE(read_shards(dir.path()).empty());
  EXPECT_TRUE(read_shards(dir.path() / "nope").empty());
}

TEST(Shards, TruncatedFileNamesTheRecord) {
  TempDir dir("labtx_shard_trunc");
  const auto files = write_shards(random_bags(10, 4), dir.path(), 100);
  const auto path = files.at(0).path;
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 5);
  ShardReader reader(path);
  try {
    while (reader.next()) {
    }
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("record 9"), std::string::npos) << e.what();
  }
}

TEST(Shards, BadMagicAndManifestMismatchRaise) {
  TempDir dir("labtx_shard_bad");
  const auto files = write_shards(random_bags(5, 5), dir.path(), 100);
  std::string bytes = file_bytes(files[0].path);
  bytes[0] = 'X';
  std::ofstream(files[0].path, std::ios::binary | std::ios::trunc) << bytes;
  EXPECT_THROW(ShardReader{files[0].path}, FormatError);

  TempDir dir2("labtx_shard_manifest");
  write_shards(random_bags(5, 5), dir2.path(), 100);
  const auto other = write_shards(random_bags(3, 6), dir.path() / "tmp", 100);
  fs::copy_file(other[0].path, dir2.path() / "shard-00000.lbs", fs::copy_options::overwrite_existing);
  EXPECT_THROW(read_shards(dir2.path()), FormatError);
}

TEST(Shards, DecodeRejectsInconsistentPayload) {
  const auto bags = random_bags(1, 7);
  auto bytes = encode_bag(bags[0]);
  EXPECT_TRUE(payload_equal(decode_bag(bytes), bags[0]));
  bytes.push_back(0);
  EXPECT_THROW(decode_bag(bytes), FormatError);
  EXPECT_THROW(decode_bag(std::vector<std::uint8_t>{1, 2}), FormatError);
}

TEST(Synthetic, FixedSeedIsIdentical) {
  SyntheticOptions o;
  o.seed = 21;
  EXPECT_EQ(generate_synthetic_corpus(o).events, generate_synthetic_corpus(o).events);
  o.seed = 22;
  SyntheticOptions p = o;
  p.seed = 23;
  EXPECT_NE(generate_synthetic_corpus(o).events, generate_synthetic_corpus(p).events);
}

TEST(Synthetic, EventCountMatchesRecount) {
  SyntheticOptions o;
  o.n_patients = 150;
  o.seed = 2;
  const SyntheticCorpus corpus = generate_synthetic_corpus(o);
  std::map<std::pair<std::string, std::int64_t>, std::size_t> groups;
  for (const auto& ev : corpus.events) ++groups[{ev.patient_id, ev.chart_time}];
  EXPECT_EQ(groups.size(), corpus.bags.size());
  for (const auto& [key, n] : groups) EXPECT_GE(n, kMinBagSize);
  std::set<std::string> patients;
  for (const auto& ev : corpus.events) patients.insert(ev.patient_id);
  EXPECT_EQ(patients.size(), o.n_patients);
}

TEST(Synthetic, DegenerateGeneratorIsPerfectlyRankCorrelated) {
  SyntheticOptions o;
  o.n_patients = 100;
  o.n_codes = 5;
  o.latent_dim = 1;
  o.noise_sigma = 0.0;
  o.unit_loadings = true;
  o.seed = 9;
  const SyntheticCorpus corpus = generate_synthetic_corpus(o);
  // Every value is increasing in the bag's single latent.
  std::map<std::string, std::vector<std::pair<double, double>>> by_code;
  std::map<std::pair<std::string, std::int64_t>, double> latent;
  for (const auto& b : corpus.bags) latent[{b.patient_id, b.chart_time}] = b.latent[0];
  for (const auto& ev : corpus.events) by_code[ev.code].push_back({latent.at({ev.patient_id, ev.chart_time}), *ev.value});
  for (auto& [code, pairs] : by_code) {
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t i = 1; i < pairs.size(); ++i) EXPECT_LE(pairs[i - 1].second, pairs[i].second) << code;
  }
}

double sample_r(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

TEST(Synthetic, OrthogonalGroupsAreUncorrelated) {
  SyntheticOptions o;
  o.n_patients = 4000;
  o.n_codes = 4;
  o.panel_size = 4;
  o.keep_prob = 1.0;
  o.orthogonal = true;
  o.seed = 31;
  const SyntheticCorpus corpus = generate_synthetic_corpus(o);
  std::map<std::pair<std::string, std::int64_t>, std::map<std::string, double>> bags;
  for (const auto& ev : corpus.events) bags[{ev.patient_id, ev.chart_time}][ev.code] = *ev.value;
  // Codes 0 and 2 load on axis 0, codes 1 and 3 on axis 1.
  std::vector<double> a, b, same_a, same_b;
  for (const auto& [key, labs] : bags) {
    if (labs.count(synthetic_code_id(0)) && labs.count(synthetic_code_id(1))) {
      a.push_back(labs.at(synthetic_code_id(0)));
      b.push_back(labs.at(synthetic_code_id(1)));
    }
    if (labs.count(synthetic_code_id(0)) && labs.count(synthetic_code_id(2))) {
      same_a.push_back(labs.at(synthetic_code_id(0)));
      same_b.push_back(labs.at(synthetic_code_id(2)));
    }
  }
  ASSERT_GE(a.size(), 10000u);
  EXPECT_LT(std::abs(sample_r(a, b)), 0.05);
  EXPECT_GT(sample_r(same_a, same_b), 0.5);
  EXPECT_EQ(synthetic_code_correlation(corpus.truth, 0, 1), 0.0);
}

TEST(Synthetic, TruthJsonRoundTrip) {
  SyntheticOptions o;
  o.n_binary = 2;
  const SyntheticCorpus corpus = generate_synthetic_corpus(o);
  const SyntheticTruth back = synthetic_truth_from_json(synthetic_truth_to_json(corpus.truth));
  ASSERT_EQ(back.codes.size(), corpus.truth.codes.size());
  EXPECT_EQ(back.panels, corpus.truth.panels);
  for (std::size_t i = 0; i < back.codes.size(); ++i) {
    EXPECT_EQ(back.codes[i].loadings, corpus.truth.codes[i].loadings);
    EXPECT_EQ(back.codes[i].binary, corpus.truth.codes[i].binary);
  }
}

TEST(Synthetic, InvalidOptionsRaise) {
  SyntheticOptions o;
  o.n_codes = 2;
  EXPECT_THROW(generate_synthetic_corpus(o), ConfigError);
}

std::vector<LabEvent> toy_stream() {
  SyntheticOptions o;
  o.n_patients = 120;
  o.n_codes = 3;
  o.panel_size = 3;
  o.seed = 5;
  return generate_synthetic_corpus(o).events;
}

TEST(Pipeline, KeepsFrequentCodesAndReportsDecileSize) {
  PreprocessOptions o;
  o.min_count = 10;
  o.mode = VocabMode::kDecile;
  const PreprocessedCorpus corpus = preprocess_events(toy_stream(), o);
  EXPECT_EQ(corpus.summary.codes_dropped, 0u);
  EXPECT_EQ(corpus.summary.codes_kept, 3u);
  EXPECT_EQ(corpus.summary.vocab_size, 34u);
  EXPECT_EQ(corpus.summary.bags_kept, corpus.train.size() + corpus.val.size() + corpus.test.size());
  for (const LabBag& bag : corpus.train) EXPECT_EQ(bag.masked.size(), 1u);
}

TEST(Pipeline, RerunGivesIdenticalShardBytes) {
  TempDir a("labtx_pipe_a"), b("labtx_pipe_b");
  PreprocessOptions o;
  o.seed = 4;
  const auto events = toy_stream();
  write_preprocessed(a.path(), preprocess_events(events, o), o);
  write_preprocessed(b.path(), preprocess_events(events, o), o);
  for (const char* f : {"train/shard-00000.lbs", "val/shard-00000.lbs", "vocab.json", "ecdfs.json"}) {
    EXPECT_EQ(file_bytes(a.path() / f), file_bytes(b.path() / f)) << f;
  }
  const PreprocessedCorpus back = read_preprocessed(a.path());
  const PreprocessedCorpus direct = preprocess_events(events, o);
  ASSERT_EQ(back.train.size(), direct.train.size());
  for (std::size_t i = 0; i < back.train.size(); ++i) EXPECT_TRUE(payload_equal(back.train[i], direct.train[i]));
}

TEST(Pipeline, EcdfsAreFitOnTrainingPatientsOnly) {
  PreprocessOptions o;
  o.seed = 8;
  const auto events = toy_stream();
  const PreprocessedCorpus corpus = preprocess_events(events, o);
  std::set<std::string> ids;
  for (const auto& ev : events) ids.insert(ev.patient_id);
  const PatientSplit split = split_patients(std::vector<std::string>(ids.begin(), ids.end()), o.splits, o.seed);
  std::size_t train_values = 0;
  for (const auto& ev : events) train_values += split.train.count(ev.patient_id) && ev.value ? 1 : 0;
  std::size_t total = 0;
  for (const auto& [code, e] : corpus.ecdfs) total += e.n_train;
  EXPECT_EQ(total, train_values);
}

}  // namespace
}  // namespace labtx
