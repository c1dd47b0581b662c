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

#include "prosody/nnet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace prosody::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'P', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in, const std::string& what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw CheckpointError("checkpoint truncated while reading " + what);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    const auto data = tensor.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
  }
  if (!out) throw CheckpointError("write failed for " + path.string());
}

ParameterList read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError(path.string() + ": bad checkpoint magic");
  }
  const auto version = read_u32(in, "version");
  if (version != kVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  const auto count = read_u32(in, "parameter count");
  ParameterList params;
  params.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_u32(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw CheckpointError("checkpoint truncated in name");
    const auto rank = read_u32(in, "rank of " + name);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(read_u32(in, "dims of " + name));
    std::vector<float> data(shape_size(shape));
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(float)))) {
      throw CheckpointError("checkpoint truncated in data of " + name);
    }
    params.push_back({std::move(name), Tensor::from_data(std::move(shape), std::move(data))});
  }
  return params;
}

void load_checkpoint(const std::filesystem::path& path, ParameterList& params) {
  auto stored = read_checkpoint(path);
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& p : stored) by_name.emplace(p.name, &p.tensor);
  if (stored.size() != params.size()) {
    throw CheckpointError(path.string() + ": expected " + std::to_string(params.size()) +
                          " parameters, found " + std::to_string(stored.size()));
  }
  for (auto& [name, tensor] : params) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError(path.string() + ": missing parameter " + name);
    if (it->second->shape() != tensor.shape()) {
      throw CheckpointError(path.string() + ": parameter " + name + " has shape " +
                            shape_string(it->second->shape()) + ", expected " +
                            shape_string(tensor.shape()));
    }
    auto src = it->second->data();
    std::copy(src.begin(), src.end(), tensor.mutable_data().begin());
  }
}

std::vector<std::vector<float>> snapshot_values(const ParameterList& params) {
  std::vector<std::vector<float>> values;
  values.reserve(params.size());
  for (const auto& p : params) values.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return values;
}

void restore_values(ParameterList& params, const std::vector<std::vector<float>>& values) {
  if (values.size() != params.size()) throw CheckpointError("snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    if (dst.size() != values[i].size()) throw CheckpointError("snapshot shape mismatch");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace prosody::nn
