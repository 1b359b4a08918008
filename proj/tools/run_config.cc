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

#include "run_config.hpp"

#include <algorithm>

#include "labtx/ecdf/io.hpp"
#include "labtx/error.hpp"

namespace labtx::tools {
namespace {

// "/grid/epochs/2" -> "/grid/epochs": array elements may differ in count.
std::string strip_indices(const std::string& pointer) {
  std::string out = pointer;
  for (;;) {
    const auto slash = out.rfind('/');
    if (slash == std::string::npos || slash + 1 >= out.size()) return out;
    const std::string last = out.substr(slash + 1);
    if (last.find_first_not_of("0123456789") != std::string::npos) return out;
    out.resize(slash);
  }
}

}  // namespace

ParamSet::ParamSet(CLI::App* app, nlohmann::json defaults) : app_(app), defaults_(std::move(defaults)) {
  app_->add_option("--config", config_path_, "JSON file of parameters; flags take precedence");
}

CLI::Option* ParamSet::flag(const std::string& flag, const std::string& key, const std::string& help) {
  auto value = std::make_shared<bool>(false);
  CLI::Option* opt = app_->add_flag(flag, *value, help);
  overrides_.push_back([opt, value, key](nlohmann::json& doc) {
    if (opt->count() > 0) doc[nlohmann::json::json_pointer(key)] = *value;
  });
  return opt;
}

nlohmann::json ParamSet::resolve() const {
  nlohmann::json doc = defaults_;
  if (!config_path_.empty()) {
    nlohmann::json file;
    try {
      file = nlohmann::json::parse(read_text_file(config_path_));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config '" + config_path_ + "': " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config '" + config_path_ + "' must be a JSON object");
    for (const auto& [pointer, value] : file.flatten().items()) {
      const std::string key = strip_indices(pointer);
      if (!defaults_.contains(nlohmann::json::json_pointer(key))) {
        throw ConfigError("config '" + config_path_ + "': unknown parameter '" + key + "'");
      }
    }
    doc.merge_patch(file);
  }
  for (const auto& apply : overrides_) apply(doc);
  return doc;
}

std::string require_string(const nlohmann::json& doc, const std::string& key) {
  const auto& v = doc.at(nlohmann::json::json_pointer(key));
  if (!v.is_string() || v.get<std::string>().empty()) {
    throw ConfigError("parameter '" + key.substr(1) + "' is required");
  }
  return v.get<std::string>();
}

OutputGuard::OutputGuard(std::filesystem::path root, bool root_is_dir) : root_(std::move(root)), root_is_dir_(root_is_dir) {
  if (root_is_dir_) {
    created_ = !std::filesystem::exists(root_);
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw IoError("cannot create output directory '" + root_.string() + "': " + ec.message());
  } else {
    files_.push_back(root_);
  }
}

OutputGuard::~OutputGuard() {
  if (committed_) return;
  std::error_code ec;
  if (created_) {
    bool any_kept = false;
    for (const auto& entry : std::filesystem::directory_iterator(root_, ec)) {
      if (std::find(kept_.begin(), kept_.end(), entry.path()) != kept_.end()) {
        any_kept = true;
      } else {
        std::filesystem::remove_all(entry.path(), ec);
      }
    }
    if (!any_kept) std::filesystem::remove_all(root_, ec);
    return;
  }
  for (const auto& f : files_) std::filesystem::remove_all(f, ec);
}

std::filesystem::path OutputGuard::file(const std::string& name) {
  auto path = root_is_dir_ ? root_ / name : root_.parent_path() / name;
  files_.push_back(path);
  return path;
}

}  // namespace labtx::tools
