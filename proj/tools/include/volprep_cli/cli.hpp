// Copyright 2026 The volprep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: subcommands foreground, detect-anon, simulate-anon,
// eval, sample and info. Every run writes <out>/report.json.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace volprep::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCaseFailures = 1,
  kExitConfigError = 2,
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "VOLPREP_OUT";
/// Environment variable giving the default modality hint (ct, mr, unknown).
inline constexpr const char* kModalityEnv = "VOLPREP_MODALITY";

/// Runs one invocation. `args` excludes the program name. `out` receives help
/// text and the `info` dump; `err` receives progress lines.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(const std::vector<std::string>& args);

int main_entry(int argc, char** argv);

}  // namespace volprep::cli
