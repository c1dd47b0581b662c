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

#include "prosody/nnet/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace prosody::nn {

AdamState make_adam_state(std::span<const Tensor> params, float learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.size(), 0.0f);
    state.second_moment.emplace_back(p.size(), 0.0f);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(static_cast<double>(state.beta1), state.step);
  const double correction2 = 1.0 - std::pow(static_cast<double>(state.beta2), state.step);
  const float step_size = static_cast<float>(state.learning_rate / correction1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(correction2));

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].mutable_data();
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != value.size()) {
      throw ShapeError("adam_step: moment buffer size mismatch for parameter " + std::to_string(k));
    }
    if (!params[k].has_grad()) continue;
    auto grad = params[k].grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const float g = grad[i];
      m[i] = state.beta1 * m[i] + (1.0f - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0f - state.beta2) * g * g;
      value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + state.epsilon);
    }
  }
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace prosody::nn
