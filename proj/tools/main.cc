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

#include <cstdio>

#include "commands.hpp"
#include "labtx/error.hpp"

namespace {

int exit_code_for(const labtx::Error& e) {
  if (dynamic_cast<const labtx::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const labtx::IoError*>(&e)) return 4;
  if (dynamic_cast<const labtx::DataError*>(&e) || dynamic_cast<const labtx::FormatError*>(&e) ||
      dynamic_cast<const labtx::VocabError*>(&e) || dynamic_cast<const labtx::DecodeError*>(&e)) {
    return 3;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"labtx: masked lab-value transformers over bags of lab results"};
  app.require_subcommand(1);
  auto commands = labtx::tools::register_commands(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (auto& command : commands) {
    if (!command.params->app()->parsed()) continue;
    try {
      command.run(command.params->resolve());
      return 0;
    } catch (const labtx::Error& e) {
      std::fprintf(stderr, "labtx %s: error: %s\n", command.params->app()->get_name().c_str(), e.what());
      return exit_code_for(e);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "labtx %s: error: %s\n", command.params->app()->get_name().c_str(), e.what());
      return 1;
    }
  }
  return 1;
}
