// Copyright 2026 The Prosody Authors
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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prosody/chunker.hpp"
#include "prosody/models.hpp"

namespace prosody::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kIo = 2,
  kValidation = 3,
  kNumeric = 4,
};

// Missing or unreadable input, unwritable output.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunPaths {
  std::filesystem::path corpus;
  std::filesystem::path bundle;
  std::filesystem::path output;
};

// Everything one training or synthesis invocation needs.
struct RunConfig {
  RunPaths paths;
  VariantFlags flags;
  ChunkPolicy chunk_policy;
  TrainConfig train;
  std::uint64_t seed = 1;

  Variant variant() const;
};

// Table-row label of a variant: Baseline, MT, MTB, MLTB.
std::string row_label(Variant variant);

// `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace prosody::cli
