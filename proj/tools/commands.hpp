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

#ifndef LABTX_TOOLS_COMMANDS_HPP_
#define LABTX_TOOLS_COMMANDS_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "run_config.hpp"

namespace labtx::tools {

struct Command {
  std::unique_ptr<ParamSet> params;
  std::function<void(const nlohmann::json&)> run;
};

std::vector<Command> register_commands(CLI::App& app);

}  // namespace labtx::tools

#endif  // LABTX_TOOLS_COMMANDS_HPP_
