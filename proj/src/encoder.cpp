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

#include "prosody/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace prosody {

nn::Tensor glorot_uniform(nn::Shape shape, Rng& rng) {
  if (shape.size() < 2) throw nn::ShapeError("glorot_uniform needs rank >= 2");
  std::size_t receptive = 1;
  for (std::size_t i = 0; i + 2 < shape.size(); ++i) receptive *= shape[i];
  const double fan_in = static_cast<double>(shape[shape.size() - 2] * receptive);
  const double fan_out = static_cast<double>(shape.back() * receptive);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<float> data(nn::shape_size(shape));
  for (auto& v : data) v = static_cast<float>(rng.uniform(-limit, limit));
  return nn::Tensor::from_data(std::move(shape), std::move(data), true);
}

nn::Tensor zeros_parameter(nn::Shape shape) { return nn::Tensor::zeros(std::move(shape), true); }

FftBlockParams FftBlockParams::init(const EncoderDims& dims, Rng& rng) {
  const std::size_t d = dims.model_dim, f = dims.filter_dim, k = dims.kernel_size;
  FftBlockParams p;
  p.attention.query_weight = glorot_uniform({d, d}, rng);
  p.attention.query_bias = zeros_parameter({d});
  p.attention.key_weight = glorot_uniform({d, d}, rng);
  p.attention.key_bias = zeros_parameter({d});
  p.attention.value_weight = glorot_uniform({d, d}, rng);
  p.attention.value_bias = zeros_parameter({d});
  p.attention.output_weight = glorot_uniform({d, d}, rng);
  p.attention.output_bias = zeros_parameter({d});
  p.conv1_kernel = glorot_uniform({k, d, f}, rng);
  p.conv1_bias = zeros_parameter({f});
  p.conv2_kernel = glorot_uniform({k, f, d}, rng);
  p.conv2_bias = zeros_parameter({d});
  p.norm1 = {nn::Tensor::full({d}, 1.0f, true), zeros_parameter({d})};
  p.norm2 = {nn::Tensor::full({d}, 1.0f, true), zeros_parameter({d})};
  return p;
}

void FftBlockParams::collect(const std::string& prefix, nn::ParameterList& out) const {
  out.push_back({prefix + "attn.q.w", attention.query_weight});
  out.push_back({prefix + "attn.q.b", attention.query_bias});
  out.push_back({prefix + "attn.k.w", attention.key_weight});
  out.push_back({prefix + "attn.k.b", attention.key_bias});
  out.push_back({prefix + "attn.v.w", attention.value_weight});
  out.push_back({prefix + "attn.v.b", attention.value_bias});
  out.push_back({prefix + "attn.o.w", attention.output_weight});
  out.push_back({prefix + "attn.o.b", attention.output_bias});
  out.push_back({prefix + "conv1.w", conv1_kernel});
  out.push_back({prefix + "conv1.b", conv1_bias});
  out.push_back({prefix + "conv2.w", conv2_kernel});
  out.push_back({prefix + "conv2.b", conv2_bias});
  out.push_back({prefix + "norm1.g", norm1.gain});
  out.push_back({prefix + "norm1.b", norm1.bias});
  out.push_back({prefix + "norm2.g", norm2.gain});
  out.push_back({prefix + "norm2.b", norm2.bias});
}

nn::Tensor fft_block_forward(const nn::Tensor& x, const FftBlockParams& params,
                             const EncoderDims& dims, nn::KeyMask mask, nn::ForwardMode& mode) {
  if (x.rank() != 2 || x.cols() != dims.model_dim) {
    throw nn::ShapeError("fft_block_forward: expected [n x " + std::to_string(dims.model_dim) +
                         "], got " + nn::shape_string(x.shape()));
  }
  const nn::Tensor attended = nn::multi_head_self_attention(x, params.attention, dims.heads, mask);
  const nn::Tensor y = nn::layer_norm(nn::add(x, nn::dropout(attended, dims.dropout, mode)),
                                      params.norm1.gain, params.norm1.bias);

  nn::Tensor hidden = nn::conv1d(nn::mask_rows(y, mask), params.conv1_kernel, params.conv1_bias);
  hidden = nn::relu(hidden);
  hidden = nn::conv1d(nn::mask_rows(hidden, mask), params.conv2_kernel, params.conv2_bias);
  return nn::layer_norm(nn::add(y, nn::dropout(hidden, dims.dropout, mode)), params.norm2.gain,
                        params.norm2.bias);
}

nn::Tensor encoder_forward(const nn::Tensor& x, const std::vector<FftBlockParams>& blocks,
                           const EncoderDims& dims, nn::KeyMask mask, nn::ForwardMode& mode) {
  if (blocks.size() != dims.blocks) {
    throw std::invalid_argument("encoder_forward: expected " + std::to_string(dims.blocks) +
                                " blocks, got " + std::to_string(blocks.size()));
  }
  if (x.rank() != 2 || x.cols() != dims.model_dim) {
    throw nn::ShapeError("encoder_forward: expected [n x " + std::to_string(dims.model_dim) +
                         "], got " + nn::shape_string(x.shape()));
  }
  nn::Tensor h = nn::add(x, nn::sinusoidal_positions(x.rows(), dims.model_dim));
  for (const auto& block : blocks) h = fft_block_forward(h, block, dims, mask, mode);
  return h;
}

Encoder Encoder::init(const EncoderDims& dims, Rng& rng) {
  Encoder enc;
  enc.dims = dims;
  for (std::size_t b = 0; b < dims.blocks; ++b) enc.blocks.push_back(FftBlockParams::init(dims, rng));
  return enc;
}

void Encoder::collect(const std::string& prefix, nn::ParameterList& out) const {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b].collect(prefix + "block" + std::to_string(b) + ".", out);
  }
}

}  // namespace prosody
