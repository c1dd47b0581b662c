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

#include "prosody/nnet/ops.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>

#include "prosody/random.hpp"

namespace prosody::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::RowVectorXf>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXf>;

using detail::Node;
using detail::make_result;

MatMap as_matrix(Buffer& v, std::size_t r, std::size_t c) {
  return MatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_vector(const Tensor& t, std::size_t n, const char* op, const char* what) {
  if (t.rank() != 1 || t.shape()[0] != n) {
    throw ShapeError(std::string(op) + ": " + what + " must have shape [" + std::to_string(n) +
                     "], got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

bool tracks(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

}  // namespace

std::uint64_t DropoutKeys::next() { return splitmix64(seed_ ^ splitmix64(counter_++)); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()));
  }
  Buffer out(n * m);
  as_matrix(out, n, m).noalias() =
      as_matrix(a.node()->value, n, k) * as_matrix(b.node()->value, k, m);
  return make_result({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    auto dy = as_matrix(self.grad, n, m);
    if (tracks(self, 0)) {
      as_matrix(self.inputs[0]->ensure_grad(), n, k).noalias() +=
          dy * as_matrix(self.inputs[1]->value, k, m).transpose();
    }
    if (tracks(self, 1)) {
      as_matrix(self.inputs[1]->ensure_grad(), k, m).noalias() +=
          as_matrix(self.inputs[0]->value, n, k).transpose() * dy;
    }
  });
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_transposed");
  require_rank2(b, "matmul_transposed");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_transposed: inner dimensions differ " + shape_string(a.shape()) +
                     " * " + shape_string(b.shape()) + "^T");
  }
  Buffer out(n * m);
  as_matrix(out, n, m).noalias() =
      as_matrix(a.node()->value, n, k) * as_matrix(b.node()->value, m, k).transpose();
  return make_result({n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
    auto dy = as_matrix(self.grad, n, m);
    if (tracks(self, 0)) {
      as_matrix(self.inputs[0]->ensure_grad(), n, k).noalias() +=
          dy * as_matrix(self.inputs[1]->value, m, k);
    }
    if (tracks(self, 1)) {
      as_matrix(self.inputs[1]->ensure_grad(), m, k).noalias() +=
          dy.transpose() * as_matrix(self.inputs[0]->value, n, k);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank2(x, "linear");
  require_rank2(w, "linear");
  const std::size_t n = x.rows(), din = x.cols(), dout = w.cols();
  if (w.rows() != din) {
    throw ShapeError("linear: input width " + std::to_string(din) + " does not match weight " +
                     shape_string(w.shape()));
  }
  require_vector(b, dout, "linear", "bias");
  Buffer out(n * dout);
  auto y = as_matrix(out, n, dout);
  y.noalias() = as_matrix(x.node()->value, n, din) * as_matrix(w.node()->value, din, dout);
  y.rowwise() += ConstVecMap(b.node()->value.data(), static_cast<Eigen::Index>(dout));
  return make_result({n, dout}, std::move(out), {x, w, b}, [n, din, dout](Node& self) {
    auto dy = as_matrix(self.grad, n, dout);
    if (tracks(self, 0)) {
      as_matrix(self.inputs[0]->ensure_grad(), n, din).noalias() +=
          dy * as_matrix(self.inputs[1]->value, din, dout).transpose();
    }
    if (tracks(self, 1)) {
      as_matrix(self.inputs[1]->ensure_grad(), din, dout).noalias() +=
          as_matrix(self.inputs[0]->value, n, din).transpose() * dy;
    }
    if (tracks(self, 2)) {
      VecMap(self.inputs[2]->ensure_grad().data(), static_cast<Eigen::Index>(dout)) +=
          dy.colwise().sum();
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Buffer out(a.node()->value);
  const auto& bv = b.node()->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!tracks(self, k)) continue;
      auto& g = self.inputs[k]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor scale(const Tensor& a, float factor) {
  Buffer out(a.node()->value);
  for (auto& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  Buffer out(x.node()->value);
  for (auto& v : out) v = v > 0.0f ? v : 0.0f;
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (self.value[i] > 0.0f) g[i] += self.grad[i];
    }
  });
}

Tensor softmax_rows(const Tensor& x, KeyMask key_mask) {
  require_rank2(x, "softmax_rows");
  const std::size_t n = x.rows(), m = x.cols();
  if (!key_mask.empty() && key_mask.size() != m) {
    throw ShapeError("softmax_rows: mask length " + std::to_string(key_mask.size()) +
                     " does not match width " + std::to_string(m));
  }
  const auto& xv = x.node()->value;
  Buffer out(n * m, 0.0f);
  for (std::size_t r = 0; r < n; ++r) {
    const float* in = xv.data() + r * m;
    float* y = out.data() + r * m;
    float peak = -std::numeric_limits<float>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
      if (key_mask.empty() || key_mask[c]) peak = std::max(peak, in[c]);
    }
    if (!std::isfinite(peak)) continue;
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      if (key_mask.empty() || key_mask[c]) {
        y[c] = std::exp(in[c] - peak);
        total += y[c];
      }
    }
    const float inv = static_cast<float>(1.0 / total);
    for (std::size_t c = 0; c < m; ++c) y[c] *= inv;
  }
  return make_result({n, m}, std::move(out), {x}, [n, m](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < n; ++r) {
      const float* y = self.value.data() + r * m;
      const float* dy = self.grad.data() + r * m;
      double dot = 0.0;
      for (std::size_t c = 0; c < m; ++c) dot += static_cast<double>(dy[c]) * y[c];
      for (std::size_t c = 0; c < m; ++c) {
        g[r * m + c] += y[c] * (dy[c] - static_cast<float>(dot));
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, float epsilon) {
  require_rank2(x, "layer_norm");
  const std::size_t n = x.rows(), d = x.cols();
  require_vector(gain, d, "layer_norm", "gain");
  require_vector(bias, d, "layer_norm", "bias");
  const auto& xv = x.node()->value;
  const auto& gv = gain.node()->value;
  const auto& bv = bias.node()->value;
  auto normalized = std::make_shared<Buffer>(n * d);
  auto inv_std = std::make_shared<Buffer>(n);
  Buffer out(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    const float* in = xv.data() + r * d;
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += in[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + epsilon);
    (*inv_std)[r] = static_cast<float>(inv);
    for (std::size_t c = 0; c < d; ++c) {
      const float xhat = static_cast<float>((in[c] - mean) * inv);
      (*normalized)[r * d + c] = xhat;
      out[r * d + c] = gv[c] * xhat + bv[c];
    }
  }
  return make_result({n, d}, std::move(out), {x, gain, bias},
                     [n, d, normalized, inv_std](Node& self) {
    const auto& gv = self.inputs[1]->value;
    const auto& xhat = *normalized;
    if (tracks(self, 1)) {
      auto& gg = self.inputs[1]->ensure_grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) gg[c] += self.grad[r * d + c] * xhat[r * d + c];
    }
    if (tracks(self, 2)) {
      auto& gb = self.inputs[2]->ensure_grad();
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) gb[c] += self.grad[r * d + c];
    }
    if (tracks(self, 0)) {
      auto& gx = self.inputs[0]->ensure_grad();
      for (std::size_t r = 0; r < n; ++r) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double dxhat = static_cast<double>(self.grad[r * d + c]) * gv[c];
          mean_dxhat += dxhat;
          mean_dxhat_xhat += dxhat * xhat[r * d + c];
        }
        mean_dxhat /= static_cast<double>(d);
        mean_dxhat_xhat /= static_cast<double>(d);
        const double inv = (*inv_std)[r];
        for (std::size_t c = 0; c < d; ++c) {
          const double dxhat = static_cast<double>(self.grad[r * d + c]) * gv[c];
          gx[r * d + c] += static_cast<float>(
              inv * (dxhat - mean_dxhat - xhat[r * d + c] * mean_dxhat_xhat));
        }
      }
    }
  });
}

Tensor dropout(const Tensor& x, float p, bool train, std::uint64_t key) {
  if (p < 0.0f || p >= 1.0f) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (!train || p == 0.0f) return x;
  const std::size_t size = x.size();
  const float keep_scale = 1.0f / (1.0f - p);
  auto factors = std::make_shared<Buffer>(size);
  Buffer out(x.node()->value);
  for (std::size_t i = 0; i < size; ++i) {
    const double u = unit_interval(splitmix64(key ^ splitmix64(i)));
    (*factors)[i] = u < p ? 0.0f : keep_scale;
    out[i] *= (*factors)[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [factors](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*factors)[i] * self.grad[i];
  });
}

Tensor dropout(const Tensor& x, float p, ForwardMode& mode) {
  if (!mode.train) return x;
  if (mode.dropout_keys == nullptr) {
    throw std::logic_error("dropout in train mode needs a key source");
  }
  return dropout(x, p, true, mode.dropout_keys->next());
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  require_rank2(x, "conv1d");
  if (kernel.rank() != 3) {
    throw ShapeError("conv1d: kernel must be [k x c_in x c_out], got " +
                     shape_string(kernel.shape()));
  }
  const std::size_t n = x.rows(), cin = x.cols();
  const std::size_t k = kernel.shape()[0], cout = kernel.shape()[2];
  if (kernel.shape()[1] != cin) {
    throw ShapeError("conv1d: kernel " + shape_string(kernel.shape()) +
                     " does not match input channels " + std::to_string(cin));
  }
  if (k % 2 == 0) throw ShapeError("conv1d: kernel size must be odd for same padding");
  require_vector(bias, cout, "conv1d", "bias");
  const std::size_t half = k / 2, width = k * cin;

  // im2col: cols[t, j*cin + c] = x[t + j - half, c], zero outside [0, n).
  auto cols = std::make_shared<Buffer>(n * width, 0.0f);
  const auto& xv = x.node()->value;
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(half);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
      std::copy_n(xv.data() + src * cin, cin, cols->data() + t * width + j * cin);
    }
  }
  Buffer out(n * cout);
  auto y = as_matrix(out, n, cout);
  y.noalias() = as_matrix(*cols, n, width) * as_matrix(kernel.node()->value, width, cout);
  y.rowwise() += ConstVecMap(bias.node()->value.data(), static_cast<Eigen::Index>(cout));

  return make_result({n, cout}, std::move(out), {x, kernel, bias},
                     [n, cin, cout, k, half, width, cols](Node& self) {
    auto dy = as_matrix(self.grad, n, cout);
    if (tracks(self, 1)) {
      as_matrix(self.inputs[1]->ensure_grad(), width, cout).noalias() +=
          as_matrix(*cols, n, width).transpose() * dy;
    }
    if (tracks(self, 2)) {
      VecMap(self.inputs[2]->ensure_grad().data(), static_cast<Eigen::Index>(cout)) +=
          dy.colwise().sum();
    }
    if (tracks(self, 0)) {
      RowMat dcols = dy * as_matrix(self.inputs[1]->value, width, cout).transpose();
      auto& gx = self.inputs[0]->ensure_grad();
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(half);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
          const float* d = dcols.data() + t * width + j * cin;
          float* g = gx.data() + src * cin;
          for (std::size_t c = 0; c < cin; ++c) g[c] += d[c];
        }
      }
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_rank2(x, "slice_cols");
  const std::size_t n = x.rows(), m = x.cols();
  if (begin + count > m) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") exceeds width " + std::to_string(m));
  }
  Buffer out(n * count);
  const auto& xv = x.node()->value;
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(xv.data() + r * m + begin, count, out.data() + r * count);
  }
  return make_result({n, count}, std::move(out), {x}, [n, m, begin, count](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < count; ++c) g[r * m + begin + c] += self.grad[r * count + c];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != n) {
      throw ShapeError("concat_cols: row count mismatch " + shape_string(parts[0].shape()) +
                       " vs " + shape_string(p.shape()));
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  Buffer out(n * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].node()->value;
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(pv.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    }
    offset += widths[k];
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result({n, total}, std::move(out), std::move(inputs),
                     [n, total, widths](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (tracks(self, k)) {
        auto& g = self.inputs[k]->ensure_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c)
            g[r * widths[k] + c] += self.grad[r * total + offset + c];
      }
      offset += widths[k];
    }
  });
}

Tensor repeat_rows(const Tensor& x, std::span<const int> counts) {
  require_rank2(x, "repeat_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (counts.size() != n) {
    throw ShapeError("repeat_rows: " + std::to_string(counts.size()) + " counts for " +
                     std::to_string(n) + " rows");
  }
  std::size_t total = 0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("repeat_rows: negative repeat count");
    total += static_cast<std::size_t>(c);
  }
  Buffer out(total * d);
  const auto& xv = x.node()->value;
  std::size_t row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int rep = 0; rep < counts[i]; ++rep, ++row) {
      std::copy_n(xv.data() + i * d, d, out.data() + row * d);
    }
  }
  std::vector<int> saved(counts.begin(), counts.end());
  return make_result({total, d}, std::move(out), {x}, [d, saved](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    std::size_t row = 0;
    for (std::size_t i = 0; i < saved.size(); ++i) {
      for (int rep = 0; rep < saved[i]; ++rep, ++row) {
        for (std::size_t c = 0; c < d; ++c) g[i * d + c] += self.grad[row * d + c];
      }
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const int> indices) {
  require_rank2(table, "gather_rows");
  const std::size_t rows = table.rows(), d = table.cols();
  for (int idx : indices) {
    if (idx < -1 || idx >= static_cast<int>(rows)) {
      throw std::out_of_range("gather_rows: index " + std::to_string(idx) + " outside table of " +
                              std::to_string(rows) + " rows");
    }
  }
  const std::size_t n = indices.size();
  Buffer out(n * d, 0.0f);
  const auto& tv = table.node()->value;
  for (std::size_t r = 0; r < n; ++r) {
    if (indices[r] >= 0) std::copy_n(tv.data() + indices[r] * d, d, out.data() + r * d);
  }
  std::vector<int> saved(indices.begin(), indices.end());
  return make_result({n, d}, std::move(out), {table}, [d, saved](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < saved.size(); ++r) {
      if (saved[r] < 0) continue;
      for (std::size_t c = 0; c < d; ++c) g[saved[r] * d + c] += self.grad[r * d + c];
    }
  });
}

Tensor mask_rows(const Tensor& x, KeyMask row_mask) {
  require_rank2(x, "mask_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (row_mask.empty()) return x;
  if (row_mask.size() != n) {
    throw ShapeError("mask_rows: mask length " + std::to_string(row_mask.size()) +
                     " does not match rows " + std::to_string(n));
  }
  Buffer out(x.node()->value);
  for (std::size_t r = 0; r < n; ++r) {
    if (!row_mask[r]) std::fill_n(out.data() + r * d, d, 0.0f);
  }
  std::vector<std::uint8_t> saved(row_mask.begin(), row_mask.end());
  return make_result({n, d}, std::move(out), {x}, [d, saved](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < saved.size(); ++r) {
      if (!saved[r]) continue;
      for (std::size_t c = 0; c < d; ++c) g[r * d + c] += self.grad[r * d + c];
    }
  });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  const auto& p = pred.node()->value;
  const auto& t = target.node()->value;
  const std::size_t size = p.size();
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double diff = static_cast<double>(p[i]) - t[i];
    total += diff * diff;
  }
  const float loss = size ? static_cast<float>(total / static_cast<double>(size)) : 0.0f;
  return make_result({1}, {loss}, {pred, target}, [size](Node& self) {
    if (size == 0) return;
    const auto& p = self.inputs[0]->value;
    const auto& t = self.inputs[1]->value;
    const float factor = 2.0f * self.grad[0] / static_cast<float>(size);
    for (std::size_t k = 0; k < 2; ++k) {
      if (!tracks(self, k)) continue;
      auto& g = self.inputs[k]->ensure_grad();
      const float sign = k == 0 ? 1.0f : -1.0f;
      for (std::size_t i = 0; i < size; ++i) g[i] += sign * factor * (p[i] - t[i]);
    }
  });
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l1_loss");
  const auto& p = pred.node()->value;
  const auto& t = target.node()->value;
  const std::size_t size = p.size();
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) total += std::fabs(static_cast<double>(p[i]) - t[i]);
  const float loss = size ? static_cast<float>(total / static_cast<double>(size)) : 0.0f;
  return make_result({1}, {loss}, {pred, target}, [size](Node& self) {
    if (size == 0) return;
    const auto& p = self.inputs[0]->value;
    const auto& t = self.inputs[1]->value;
    const float factor = self.grad[0] / static_cast<float>(size);
    for (std::size_t k = 0; k < 2; ++k) {
      if (!tracks(self, k)) continue;
      auto& g = self.inputs[k]->ensure_grad();
      const float sign = k == 0 ? 1.0f : -1.0f;
      for (std::size_t i = 0; i < size; ++i) {
        const float diff = p[i] - t[i];
        if (diff > 0.0f) g[i] += sign * factor;
        if (diff < 0.0f) g[i] -= sign * factor;
      }
    }
  });
}

Tensor sinusoidal_positions(std::size_t n, std::size_t d) {
  if (d % 2 != 0) {
    throw ShapeError("sinusoidal_positions: dimension must be even, got " + std::to_string(d));
  }
  Buffer out(n * d);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, 2.0 * static_cast<double>(i) / d);
      out[pos * d + 2 * i] = static_cast<float>(std::sin(angle));
      out[pos * d + 2 * i + 1] = static_cast<float>(std::cos(angle));
    }
  }
  return Tensor::from_buffer({n, d}, std::move(out));
}

Tensor multi_head_self_attention(const Tensor& x, const AttentionParams& params,
                                 std::size_t heads, KeyMask key_mask,
                                 std::vector<Tensor>* weights_out) {
  require_rank2(x, "multi_head_self_attention");
  const std::size_t d = x.cols();
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("multi_head_self_attention: model dim " + std::to_string(d) +
                     " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = d / heads;
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(head_dim));

  const Tensor q = linear(x, params.query_weight, params.query_bias);
  const Tensor k = linear(x, params.key_weight, params.key_bias);
  const Tensor v = linear(x, params.value_weight, params.value_bias);

  std::vector<Tensor> per_head;
  per_head.reserve(heads);
  if (weights_out) weights_out->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t begin = h * head_dim;
    if (heads == 1) {
      const Tensor scores = scale(matmul_transposed(q, k), inv_sqrt);
      const Tensor weights = softmax_rows(scores, key_mask);
      if (weights_out) weights_out->push_back(weights);
      per_head.push_back(matmul(weights, v));
      break;
    }
    const Tensor qh = slice_cols(q, begin, head_dim);
    const Tensor kh = slice_cols(k, begin, head_dim);
    const Tensor vh = slice_cols(v, begin, head_dim);
    const Tensor weights = softmax_rows(scale(matmul_transposed(qh, kh), inv_sqrt), key_mask);
    if (weights_out) weights_out->push_back(weights);
    per_head.push_back(matmul(weights, vh));
  }
  const Tensor merged = heads == 1 ? per_head.front() : concat_cols(per_head);
  return linear(merged, params.output_weight, params.output_bias);
}

}  // namespace prosody::nn
