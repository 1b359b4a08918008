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

// Command parameters: JSON defaults, overlaid by an optional --config file,
// overlaid by flags given on the command line.

#ifndef LABTX_TOOLS_RUN_CONFIG_HPP_
#define LABTX_TOOLS_RUN_CONFIG_HPP_

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace labtx::tools {

class ParamSet {
 public:
  ParamSet(CLI::App* app, nlohmann::json defaults);

  // Binds --flag to the JSON pointer key ("/train/steps").
  template <typename T>
  CLI::Option* option(const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *value, help);
    overrides_.push_back([opt, value, key](nlohmann::json& doc) {
      if (opt->count() > 0) doc[nlohmann::json::json_pointer(key)] = *value;
    });
    return opt;
  }
  CLI::Option* flag(const std::string& flag, const std::string& key, const std::string& help);

  // Raises ConfigError for keys the command does not know.
  nlohmann::json resolve() const;

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  nlohmann::json defaults_;
  std::string config_path_;
  std::vector<std::function<void(nlohmann::json&)>> overrides_;
};

// Required string parameter.
std::string require_string(const nlohmann::json& doc, const std::string& key);

// Removes what a failed command produced. A directory the command created
// is removed apart from kept files; otherwise only the registered files go.
class OutputGuard {
 public:
  explicit OutputGuard(std::filesystem::path root, bool root_is_dir = true);
  ~OutputGuard();
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path file(const std::string& name);
  // Survives cleanup, e.g. a diagnostic dump.
  void keep(const std::string& name) { kept_.push_back(root_ / name); }
  void commit() { committed_ = true; }

 private:
  std::filesystem::path root_;
  bool created_ = false;
  bool root_is_dir_ = true;
  bool committed_ = false;
  std::vector<std::filesystem::path> files_;
  std::vector<std::filesystem::path> kept_;
};

}  // namespace labtx::tools

#endif  // LABTX_TOOLS_RUN_CONFIG_HPP_
