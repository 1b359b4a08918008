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

#include "labtx/ecdf/io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "labtx/error.hpp"

namespace labtx {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string ecdfs_to_json(const EcdfTable& table) {
  json arr = json::array();
  for (const auto& [code, e] : table) {
    arr.push_back({{"code", e.code}, {"n", e.n_train}, {"values", e.values}, {"probs", e.probs}});
  }
  return arr.dump(1) + "\n";
}

EcdfTable ecdfs_from_json(const std::string& text) {
  EcdfTable table;
  try {
    const json arr = json::parse(text);
    if (!arr.is_array()) throw FormatError("ecdfs JSON must be an array");
    for (const json& item : arr) {
      CompressedEcdf e;
      e.code = item.at("code").get<std::string>();
      e.n_train = item.at("n").get<std::size_t>();
      e.values = item.at("values").get<std::vector<double>>();
      e.probs = item.at("probs").get<std::vector<double>>();
      if (e.values.empty() || e.values.size() != e.probs.size()) {
        throw FormatError("eCDF '" + e.code + "': values/probs length mismatch");
      }
      for (std::size_t i = 1; i < e.values.size(); ++i) {
        if (!(e.values[i] > e.values[i - 1]) || !(e.probs[i] > e.probs[i - 1])) {
          throw FormatError("eCDF '" + e.code + "': entries not strictly increasing");
        }
      }
      if (e.probs.back() != 1.0) throw FormatError("eCDF '" + e.code + "': final probability is not 1");
      std::string key = e.code;
      if (!table.emplace(std::move(key), std::move(e)).second) {
        throw FormatError("duplicate eCDF for code '" + item.at("code").get<std::string>() + "'");
      }
    }
  } catch (const json::exception& ex) {
    throw FormatError(std::string("ecdfs JSON: ") + ex.what());
  }
  return table;
}

void save_ecdfs(const std::filesystem::path& path, const EcdfTable& table) {
  write_text_file(path, ecdfs_to_json(table));
}

EcdfTable load_ecdfs(const std::filesystem::path& path) { return ecdfs_from_json(read_text_file(path)); }

std::string vocab_to_json(const Vocab& vocab) {
  json codes = json::array();
  for (const Vocab::Entry& e : vocab.entries()) {
    json item = {{"code", e.code}, {"token", e.first_token}};
    if (vocab.mode() == VocabMode::kDecile) {
      item["binary"] = e.binary;
      item["missing_token"] = vocab.missing_token(e.code);
    }
    codes.push_back(std::move(item));
  }
  json doc = {{"mode", vocab_mode_name(vocab.mode())},
              {"size", vocab.size()},
              {"mask_token", vocab.mask_token()},
              {"pad_token", kPadToken},
              {"codes", std::move(codes)}};
  if (vocab.mode() == VocabMode::kContinuous) doc["null_token"] = vocab.null_token();
  return doc.dump(1) + "\n";
}

Vocab vocab_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    const std::string mode_name = doc.at("mode").get<std::string>();
    VocabMode mode;
    if (mode_name == "continuous") {
      mode = VocabMode::kContinuous;
    } else if (mode_name == "decile") {
      mode = VocabMode::kDecile;
    } else {
      throw FormatError("vocab JSON: unknown mode '" + mode_name + "'");
    }
    std::vector<Vocab::Entry> entries;
    for (const json& item : doc.at("codes")) {
      entries.push_back({item.at("code").get<std::string>(), item.at("token").get<Token>(),
                         item.value("binary", false)});
    }
    Vocab vocab = Vocab::from_entries(mode, std::move(entries));
    if (doc.at("size").get<Token>() != vocab.size() || doc.at("mask_token").get<Token>() != vocab.mask_token()) {
      throw FormatError("vocab JSON: declared size/mask token disagree with the code layout");
    }
    return vocab;
  } catch (const json::exception& ex) {
    throw FormatError(std::string("vocab JSON: ") + ex.what());
  }
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) { write_text_file(path, vocab_to_json(vocab)); }

Vocab load_vocab(const std::filesystem::path& path) { return vocab_from_json(read_text_file(path)); }

}  // namespace labtx
