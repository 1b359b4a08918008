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

#include "labtx/ecdf/ecdf.hpp"
#include "labtx/ecdf/io.hpp"
#include "labtx/ecdf/vocab.hpp"
#include "labtx/error.hpp"
#include "labtx/numerics/init.hpp"

namespace labtx {
namespace {

// Full-sample eCDF: fraction of the raw list <= x.
double rank_oracle(const std::vector<double>& raw, double x) {
  std::size_t count = 0;
  for (double v : raw) count += v <= x ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(raw.size());
}

TEST(Ecdf, CountingDefinition) {
  const std::vector<double> raw{1, 2, 2, 4};
  const CompressedEcdf e = build_ecdf("x", raw);
  EXPECT_EQ(e.values, (std::vector<double>{1, 2, 4}));
  EXPECT_EQ(e.probs, (std::vector<double>{0.25, 0.75, 1.0}));
  EXPECT_EQ(e.n_train, 4u);
  const CompressedEcdf single = build_ecdf("y", std::vector<double>{5});
  EXPECT_EQ(single.values, (std::vector<double>{5}));
  EXPECT_EQ(single.probs, (std::vector<double>{1.0}));
}

TEST(Ecdf, RejectsEmptyAndNaN) {
  EXPECT_THROW(build_ecdf("x", std::vector<double>{}), DataError);
  EXPECT_THROW(build_ecdf("x", std::vector<double>{1, std::nan("")}), DataError);
  EXPECT_THROW(build_ecdf("x", std::vector<double>{1}).apply(std::nan("")), DataError);
}

TEST(Ecdf, ApplyIsAStepFunction) {
  const CompressedEcdf e = build_ecdf("x", std::vector<double>{1, 2, 2, 4});
  EXPECT_EQ(e.apply(2), 0.75);
  EXPECT_EQ(e.apply(0.5), 0.0);
  EXPECT_EQ(e.apply(3), 0.75);
  EXPECT_EQ(e.apply(4), 1.0);
  EXPECT_EQ(e.apply(1e9), 1.0);
}

TEST(Ecdf, InvertReturnsSmallestValueReachingP) {
  const CompressedEcdf e = build_ecdf("x", std::vector<double>{1, 2, 2, 4});
  EXPECT_EQ(e.invert(0.75), 2);
  EXPECT_EQ(e.invert(0.0), 1);
  EXPECT_EQ(e.invert(0.5), 2);
  EXPECT_EQ(e.invert(1.0), 4);
  EXPECT_THROW(e.invert(1.5), ContractError);
  EXPECT_THROW(e.invert(-0.1), ContractError);
}

TEST(Ecdf, LosslessAgainstFullRankOracle) {
  Rng rng(17);
  for (int code = 0; code < 4; ++code) {
    std::vector<double> raw(10000);
    // Rounded draws give many ties.
    for (double& v : raw) v = std::round(init::standard_normal(rng) * 20) / 4;
    const CompressedEcdf e = build_ecdf("c", raw);
    EXPECT_LT(e.values.size(), raw.size());
    for (double x : raw) ASSERT_EQ(e.apply(x), rank_oracle(raw, x));
    for (int i = 0; i < 200; ++i) {
      const double x = init::standard_normal(rng) * 6;
      ASSERT_EQ(e.apply(x), rank_oracle(raw, x));
    }
  }
}

TEST(Ecdf, InvertOfApplyRecoversTrainingValue) {
  Rng rng(4);
  std::vector<double> raw(3000);
  for (double& v : raw) v = std::round(init::uniform01(rng) * 300);
  const CompressedEcdf e = build_ecdf("c", raw);
  for (double x : raw) ASSERT_EQ(e.invert(e.apply(x)), x);
}

TEST(Ecdf, JsonRoundTripIsExact) {
  Rng rng(8);
  EcdfTable table;
  for (const char* code : {"50912", "51221"}) {
    std::vector<double> raw(500);
    for (double& v : raw) v = init::standard_normal(rng) * 3.3 + 10;
    table.emplace(code, build_ecdf(code, raw));
  }
  const EcdfTable back = ecdfs_from_json(ecdfs_to_json(table));
  ASSERT_EQ(back.size(), 2u);
  for (const auto& [code, e] : table) {
    EXPECT_EQ(back.at(code).values, e.values);
    EXPECT_EQ(back.at(code).probs, e.probs);
    EXPECT_EQ(back.at(code).n_train, e.n_train);
  }
}

TEST(Ecdf, CorruptJsonRaises) {
  EXPECT_ANY_THROW(ecdfs_from_json("[{\"code\": \"a\", \"n\": 2, \"values\": [2, 1], \"probs\": [0.5, 1]}]"));
  EXPECT_ANY_THROW(ecdfs_from_json("not json"));
}

TEST(Vocab, ContinuousRanksByFrequency) {
  const Vocab v = build_continuous_vocab({{"A", 10}, {"B", 5}, {"C", 1}});
  EXPECT_EQ(v.code_token("A"), 1);
  EXPECT_EQ(v.code_token("B"), 2);
  EXPECT_EQ(v.code_token("C"), 3);
  EXPECT_EQ(v.mask_token(), 4);
  EXPECT_EQ(v.null_token(), 5);
  EXPECT_EQ(v.size(), 5);
  EXPECT_EQ(v.code_of(2), "B");
  EXPECT_THROW(v.code_token("D"), VocabError);
}

TEST(Vocab, MostFrequentCodeGetsTokenOne) {
  const Vocab v = build_continuous_vocab({{"51221", 900}, {"50912", 800}, {"51006", 700}});
  EXPECT_EQ(v.code_token("51221"), 1);
}

TEST(Vocab, FrequencyTieGoesToLowerCodeId) {
  const CodeCounts counts{{"51221", 7}, {"50912", 7}, {"9", 7}};
  const Vocab v = build_continuous_vocab(counts);
  EXPECT_EQ(v.code_token("9"), 1);
  EXPECT_EQ(v.code_token("50912"), 2);
  EXPECT_EQ(v.code_token("51221"), 3);
  EXPECT_EQ(build_continuous_vocab(counts).code_token("50912"), 2);
}

EcdfTable unit_ecdfs(const std::vector<std::string>& codes) {
  EcdfTable t;
  for (const auto& c : codes) t.emplace(c, build_ecdf(c, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
  return t;
}

TEST(Vocab, DecileLayoutFollowsFrequency) {
  const Vocab v = build_decile_vocab(unit_ecdfs({"hct", "creat"}), {{"hct", 100}, {"creat", 90}}, {});
  EXPECT_EQ(v.decile_token("hct", 0), 1);
  EXPECT_EQ(v.decile_token("hct", 9), 10);
  EXPECT_EQ(v.missing_token("hct"), 11);
  EXPECT_EQ(v.decile_token("creat", 0), 12);
  EXPECT_EQ(v.missing_token("creat"), 22);
  EXPECT_EQ(v.mask_token(), 23);
  EXPECT_EQ(v.decile_of(15), 3);
  EXPECT_FALSE(v.decile_of(22).has_value());
}

TEST(Vocab, DecileSizes) {
  EXPECT_EQ(build_decile_vocab(unit_ecdfs({"a"}), {{"a", 3}}, {}).size(), 12);
  EXPECT_EQ(build_decile_vocab(unit_ecdfs({"a", "b", "c"}), {{"a", 3}, {"b", 2}, {"c", 1}}, {}).size(), 34);
}

TEST(Vocab, FullScaleDecileSizeIsBuilderArithmetic) {
  std::vector<std::string> numeric;
  CodeCounts counts;
  std::set<std::string> binary;
  for (int i = 0; i < 372; ++i) {
    numeric.push_back("n" + std::to_string(i));
    counts[numeric.back()] = 1000 - i;
  }
  for (int i = 0; i < 157; ++i) {
    const std::string code = "b" + std::to_string(i);
    binary.insert(code);
    counts[code] = 100;
  }
  const Vocab v = build_decile_vocab(unit_ecdfs(numeric), counts, binary);
  // 372 * 11 + 157 + 1 = 4250 with the mask; the stated figure is 4250 plus
  // the mask.
  EXPECT_EQ(v.size(), 4250);
  EXPECT_EQ(v.mask_token(), 4250);
}

TEST(Vocab, DecileTokenBoundaries) {
  const Vocab v = build_decile_vocab(unit_ecdfs({"a"}), {{"a", 3}}, {});
  EXPECT_EQ(value_to_decile_token(v, "a", 0.0), v.decile_token("a", 0));
  EXPECT_EQ(value_to_decile_token(v, "a", 1.0), v.decile_token("a", 9));
  EXPECT_EQ(value_to_decile_token(v, "a", 0.35), v.decile_token("a", 3));
  EXPECT_EQ(value_to_decile_token(v, "a", std::nullopt), v.missing_token("a"));
  EXPECT_THROW(value_to_decile_token(v, "zz", 0.5), VocabError);
}

TEST(Vocab, BinaryCodesOwnOneToken) {
  const Vocab v = build_decile_vocab(unit_ecdfs({"a"}), {{"a", 3}, {"flag", 9}}, {"flag"});
  EXPECT_TRUE(v.is_binary("flag"));
  EXPECT_EQ(value_to_decile_token(v, "flag", std::nullopt), value_to_decile_token(v, "flag", 0.7));
  EXPECT_EQ(v.size(), 13);
}

TEST(Vocab, DecileRequiresEcdfForNumericCodes) {
  EXPECT_THROW(build_decile_vocab({}, {{"a", 3}}, {}), ConfigError);
}

TEST(Vocab, JsonRoundTrip) {
  const Vocab cont = build_continuous_vocab({{"A", 10}, {"B", 5}});
  const Vocab dec = build_decile_vocab(unit_ecdfs({"a"}), {{"a", 3}, {"f", 2}}, {"f"});
  for (const Vocab* v : {&cont, &dec}) {
    const Vocab back = vocab_from_json(vocab_to_json(*v));
    EXPECT_EQ(back.mode(), v->mode());
    EXPECT_EQ(back.size(), v->size());
    EXPECT_EQ(back.mask_token(), v->mask_token());
    ASSERT_EQ(back.entries().size(), v->entries().size());
    for (std::size_t i = 0; i < back.entries().size(); ++i) {
      EXPECT_EQ(back.entries()[i].code, v->entries()[i].code);
      EXPECT_EQ(back.entries()[i].first_token, v->entries()[i].first_token);
      EXPECT_EQ(back.entries()[i].binary, v->entries()[i].binary);
    }
  }
}

TEST(Io, FilesRoundTripAndMissingFilesRaise) {
  const auto dir = std::filesystem::temp_directory_path() / "labtx_ecdf_io_test";
  std::filesystem::create_directories(dir);
  save_vocab(dir / "vocab.json", build_continuous_vocab({{"A", 2}}));
  EXPECT_EQ(load_vocab(dir / "vocab.json").code_token("A"), 1);
  EXPECT_THROW(load_vocab(dir / "missing.json"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace labtx
