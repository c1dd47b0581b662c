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

#include <cstddef>
#include <string>
#include <vector>

#include "prosody/nnet/checkpoint.hpp"
#include "prosody/nnet/ops.hpp"
#include "prosody/random.hpp"

namespace prosody {

// Shape of one feed-forward Transformer encoder stack.
struct EncoderDims {
  std::size_t model_dim = 256;
  std::size_t filter_dim = 1024;
  std::size_t kernel_size = 9;
  std::size_t heads = 2;
  std::size_t blocks = 4;
  float dropout = 0.1f;

  static EncoderDims paper() { return {}; }
  // Scaled-down stack for single-core training runs.
  static EncoderDims desk() { return {64, 128, 9, 2, 4, 0.1f}; }

  bool operator==(const EncoderDims&) const = default;
};

struct LayerNormParams {
  nn::Tensor gain;
  nn::Tensor bias;
};

struct FftBlockParams {
  nn::AttentionParams attention;
  nn::Tensor conv1_kernel, conv1_bias;  // model -> filter
  nn::Tensor conv2_kernel, conv2_bias;  // filter -> model
  LayerNormParams norm1, norm2;

  static FftBlockParams init(const EncoderDims& dims, Rng& rng);
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

// Glorot-uniform weight of the given shape, fan-in/out taken from the last
// two dims times any leading receptive-field dims.
nn::Tensor glorot_uniform(nn::Shape shape, Rng& rng);
nn::Tensor zeros_parameter(nn::Shape shape);

// y = LayerNorm(x + Dropout(SelfAttn(x)));  out = LayerNorm(y + Dropout(Conv(ReLU(Conv(y)))))
// With a mask, padded rows are zeroed before each convolution and excluded
// as attention keys, so real positions never see padded values.
nn::Tensor fft_block_forward(const nn::Tensor& x, const FftBlockParams& params,
                             const EncoderDims& dims, nn::KeyMask mask, nn::ForwardMode& mode);

// Adds sinusoidal positions, then runs the blocks in order. The block count
// must equal dims.blocks.
nn::Tensor encoder_forward(const nn::Tensor& x, const std::vector<FftBlockParams>& blocks,
                           const EncoderDims& dims, nn::KeyMask mask, nn::ForwardMode& mode);

struct Encoder {
  EncoderDims dims;
  std::vector<FftBlockParams> blocks;

  static Encoder init(const EncoderDims& dims, Rng& rng);
  nn::Tensor forward(const nn::Tensor& x, nn::KeyMask mask, nn::ForwardMode& mode) const {
    return encoder_forward(x, blocks, dims, mask, mode);
  }
  void collect(const std::string& prefix, nn::ParameterList& out) const;
};

}  // namespace prosody
