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

// Differentiable primitives. Matrices are rank-2 [rows x cols]; bias and
// gain vectors are rank-1. Every op records a backward rule when any input
// tracks gradients.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prosody/nnet/tensor.hpp"

namespace prosody::nn {

// Per-position validity for sequences: 1 = real, 0 = padding.
using KeyMask = std::span<const std::uint8_t>;

// Counter-based key source for dropout. Every dropout call draws a fresh key,
// so a forward pass is reproducible from (seed, call order).
class DropoutKeys {
 public:
  explicit DropoutKeys(std::uint64_t seed) : seed_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

struct ForwardMode {
  bool train = false;
  DropoutKeys* dropout_keys = nullptr;

  static ForwardMode eval() { return {}; }
};

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T
Tensor matmul_transposed(const Tensor& a, const Tensor& b);
// x[n x d_in] * w[d_in x d_out] + b[d_out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor relu(const Tensor& x);

// Row-wise softmax. Columns with mask[c] == 0 get exactly zero weight.
// A row whose every column is masked yields all zeros.
Tensor softmax_rows(const Tensor& x, KeyMask key_mask = {});

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  float epsilon = 1e-5f);

// Inverted dropout: survivors are scaled by 1/(1-p). Identity when !train.
Tensor dropout(const Tensor& x, float p, bool train, std::uint64_t key);
Tensor dropout(const Tensor& x, float p, ForwardMode& mode);

// Temporal convolution with zero "same" padding. kernel is [k x c_in x c_out]
// with odd k; output row t sums kernel tap j against input row t + j - k/2.
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);

// Row i of x is emitted counts[i] times, in order.
Tensor repeat_rows(const Tensor& x, std::span<const int> counts);

// Row r of the output is table row indices[r]; index -1 yields a zero row.
Tensor gather_rows(const Tensor& table, std::span<const int> indices);

// Zeroes rows whose mask entry is 0.
Tensor mask_rows(const Tensor& x, KeyMask row_mask);

// Mean over all elements; both return a single-element tensor.
Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor l1_loss(const Tensor& pred, const Tensor& target);

// Standard sinusoidal table [n x d]; d must be even.
Tensor sinusoidal_positions(std::size_t n, std::size_t d);

struct AttentionParams {
  Tensor query_weight, query_bias;
  Tensor key_weight, key_bias;
  Tensor value_weight, value_bias;
  Tensor output_weight, output_bias;
};

// Scaled dot-product self-attention with `heads` heads, concatenated and
// projected. When `weights_out` is given it receives the per-head attention
// matrices [n x n].
Tensor multi_head_self_attention(const Tensor& x, const AttentionParams& params,
                                 std::size_t heads, KeyMask key_mask = {},
                                 std::vector<Tensor>* weights_out = nullptr);

}  // namespace prosody::nn
