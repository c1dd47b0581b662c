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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prosody/nnet/tensor.hpp"

namespace prosody::nn {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedParameter>;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat little-endian binary:
//   magic "PRCK" | u32 version | u32 parameter count
//   per parameter: u32 name length | name bytes | u32 rank | u32 dims[rank] | f32 data
void save_checkpoint(const std::filesystem::path& path, const ParameterList& params);

// Reads every record in file order.
ParameterList read_checkpoint(const std::filesystem::path& path);

// Copies values into `params` by name. Every parameter must be present with
// an identical shape; extra records in the file are an error too.
void load_checkpoint(const std::filesystem::path& path, ParameterList& params);

// Deep copy of parameter values, used for best-checkpoint snapshots.
std::vector<std::vector<float>> snapshot_values(const ParameterList& params);
void restore_values(ParameterList& params, const std::vector<std::vector<float>>& values);

}  // namespace prosody::nn
