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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "prosody/nnet/checkpoint.hpp"
#include "prosody/nnet/ops.hpp"
#include "prosody/nnet/optim.hpp"
#include "support/grad_cases.hpp"
#include "support/test_support.hpp"

namespace prosody {
namespace {

using nn::Tensor;
using testing::random_tensor;

TEST(GradientCheck, EveryPrimitiveOnThreeShapes) {
  for (const auto& c : testing::gradient_cases()) {
    for (int s = 0; s < 3; ++s) {
      Rng rng(1000 + static_cast<std::uint64_t>(s));
      auto inst = c.make(rng, s);
      const auto r = testing::check_gradients(inst.fn, inst.inputs, 7 + static_cast<std::uint64_t>(s));
      EXPECT_LT(r.relative_error, 1e-3) << c.name << " shape " << s << " input " << r.worst_input;
    }
  }
}

TEST(Matmul, MatchesNaiveProduct) {
  Rng rng(3);
  Tensor a = random_tensor({4, 6}, rng, false), b = random_tensor({6, 5}, rng, false);
  Tensor c = nn::matmul(a, b);
  ASSERT_EQ(c.shape(), (nn::Shape{4, 5}));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double ref = 0;
      for (std::size_t k = 0; k < 6; ++k) ref += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), ref, 1e-5);
    }
  Tensor bt = random_tensor({5, 6}, rng, false);
  Tensor d = nn::matmul_transposed(a, bt);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double ref = 0;
      for (std::size_t k = 0; k < 6; ++k) ref += a.at(i, k) * bt.at(j, k);
      EXPECT_NEAR(d.at(i, j), ref, 1e-5);
    }
}

TEST(Matmul, RejectsMismatchedShapes) {
  Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({4, 2});
  EXPECT_THROW(nn::matmul(a, b), nn::ShapeError);
  EXPECT_THROW(nn::add(a, b), nn::ShapeError);
}

TEST(Softmax, RowsSumToOneAndMaskedColumnsAreZero) {
  Rng rng(4);
  Tensor x = random_tensor({3, 5}, rng, false);
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0};
  Tensor y = nn::softmax_rows(x, mask);
  for (std::size_t r = 0; r < 3; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 5; ++c) total += y.at(r, c);
    EXPECT_NEAR(total, 1.0, 1e-6);
    EXPECT_EQ(y.at(r, 1), 0.0f);
    EXPECT_EQ(y.at(r, 4), 0.0f);
  }
  const std::vector<std::uint8_t> none(5, 0);
  Tensor z = nn::softmax_rows(x, none);
  for (float v : z.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Softmax, LargeLogitsStayFinite) {
  Tensor x = Tensor::from_data({1, 3}, {1000.0f, 999.0f, -1000.0f});
  Tensor y = nn::softmax_rows(x);
  for (float v : y.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(y.at(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-6);
}

TEST(LayerNorm, NormalisesEachRow) {
  Rng rng(5);
  Tensor x = random_tensor({4, 16}, rng, false);
  Tensor y = nn::layer_norm(x, Tensor::full({16}, 1.0f), Tensor::zeros({16}));
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 16; ++c) mean += y.at(r, c);
    mean /= 16;
    for (std::size_t c = 0; c < 16; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean);
    var /= 16;
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(Dropout, IdentityInEvalAndDeterministicPerKey) {
  Rng rng(6);
  Tensor x = random_tensor({50, 40}, rng, false);
  Tensor e = nn::dropout(x, 0.5f, false, 1);
  EXPECT_TRUE(std::equal(e.data().begin(), e.data().end(), x.data().begin()));

  Tensor a = nn::dropout(x, 0.25f, true, 11), b = nn::dropout(x, 0.25f, true, 11),
         c = nn::dropout(x, 0.25f, true, 12);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (a.data()[i] == 0.0f) {
      ++zeros;
    } else {
      EXPECT_NEAR(a.data()[i], x.data()[i] / 0.75f, 1e-6);
    }
  }
  EXPECT_NEAR(static_cast<double>(zeros) / x.size(), 0.25, 0.05);
}

TEST(Conv1d, MatchesDirectLoop) {
  Rng rng(8);
  const std::size_t n = 7, cin = 3, cout = 4, k = 5;
  Tensor x = random_tensor({n, cin}, rng, false), w = random_tensor({k, cin, cout}, rng, false),
         b = random_tensor({cout}, rng, false);
  Tensor y = nn::conv1d(x, w, b);
  ASSERT_EQ(y.shape(), (nn::Shape{n, cout}));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t o = 0; o < cout; ++o) {
      double ref = b.data()[o];
      for (std::size_t j = 0; j < k; ++j) {
        const long src = static_cast<long>(t + j) - static_cast<long>(k / 2);
        if (src < 0 || src >= static_cast<long>(n)) continue;
        for (std::size_t i = 0; i < cin; ++i) ref += x.at(src, i) * w.data()[(j * cin + i) * cout + o];
      }
      EXPECT_NEAR(y.at(t, o), ref, 1e-5);
    }
}

TEST(Conv1d, KernelOneEqualsLinear) {
  Rng rng(9);
  Tensor x = random_tensor({5, 3}, rng, false), w = random_tensor({1, 3, 2}, rng, false),
         b = random_tensor({2}, rng, false);
  Tensor y = nn::conv1d(x, w, b);
  Tensor z = nn::linear(x, Tensor::from_data({3, 2}, {w.data().begin(), w.data().end()}), b);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data()[i], z.data()[i], 1e-6);
}

TEST(Conv1d, RejectsEvenKernel) {
  EXPECT_THROW(nn::conv1d(Tensor::zeros({3, 2}), Tensor::zeros({2, 2, 2}), Tensor::zeros({2})),
               nn::ShapeError);
}

TEST(GatherRows, NegativeIndexGivesZeroRow) {
  Tensor table = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  const std::vector<int> idx{1, -1, 0};
  Tensor y = nn::gather_rows(table, idx);
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{3, 4, 0, 0, 1, 2}));
  const std::vector<int> bad{2};
  EXPECT_THROW(nn::gather_rows(table, bad), std::out_of_range);
}

TEST(RepeatRows, ZeroCountsDropRows) {
  Tensor x = Tensor::from_data({3, 1}, {1, 2, 3});
  const std::vector<int> counts{0, 2, 1};
  Tensor y = nn::repeat_rows(x, counts);
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{2, 2, 3}));
}

TEST(Positions, SinusoidTableAndOddDimension) {
  Tensor p = nn::sinusoidal_positions(3, 4);
  EXPECT_FLOAT_EQ(p.at(0, 0), 0.0f);
  EXPECT_FLOAT_EQ(p.at(0, 1), 1.0f);
  EXPECT_NEAR(p.at(1, 0), std::sin(1.0), 1e-6);
  EXPECT_THROW(nn::sinusoidal_positions(3, 5), nn::ShapeError);
}

TEST(Autograd, SharedInputsAccumulate) {
  Tensor x = Tensor::from_data({1, 2}, {1.0f, -2.0f}, true);
  Tensor y = nn::add(x, x);
  nn::mse_loss(y, Tensor::zeros({1, 2})).backward();
  // d/dx mean((2x)^2) = 4x
  EXPECT_NEAR(x.grad()[0], 4.0f, 1e-6);
  EXPECT_NEAR(x.grad()[1], -8.0f, 1e-6);
}

TEST(Autograd, NoGradGuardStopsRecording) {
  Tensor x = Tensor::full({2, 2}, 1.0f, true);
  {
    nn::NoGradGuard guard;
    EXPECT_FALSE(nn::relu(x).requires_grad());
  }
  EXPECT_TRUE(nn::relu(x).requires_grad());
}

TEST(Autograd, BackwardNeedsScalar) {
  Tensor x = Tensor::full({2, 2}, 1.0f, true);
  EXPECT_THROW(nn::relu(x).backward(), nn::ShapeError);
}

TEST(Adam, MinimisesQuadratic) {
  Tensor w = Tensor::from_data({3}, {5.0f, -3.0f, 2.0f}, true);
  const Tensor target = Tensor::from_data({3}, {1.0f, 2.0f, -1.0f});
  std::vector<Tensor> params{w};
  auto state = nn::make_adam_state(params, 0.05f);
  for (int i = 0; i < 2000; ++i) {
    nn::zero_grads(params);
    nn::mse_loss(w, target).backward();
    nn::adam_step(params, state);
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(w.data()[i], target.data()[i], 1e-2);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor w = Tensor::from_data({2}, {1.0f, 1.0f}, true);
  std::vector<Tensor> params{w};
  auto state = nn::make_adam_state(params, 0.1f);
  nn::mse_loss(w, Tensor::from_data({2}, {0.0f, 3.0f})).backward();
  nn::adam_step(params, state);
  EXPECT_NEAR(w.data()[0], 0.9f, 1e-5);
  EXPECT_NEAR(w.data()[1], 1.1f, 1e-5);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("prosody_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(CheckpointTest, RoundTripsByName) {
  Rng rng(10);
  nn::ParameterList params{{"a", random_tensor({2, 3}, rng)}, {"b", random_tensor({4}, rng)}};
  nn::save_checkpoint(dir_ / "m.ckpt", params);
  nn::ParameterList loaded{{"b", Tensor::zeros({4})}, {"a", Tensor::zeros({2, 3})}};
  nn::load_checkpoint(dir_ / "m.ckpt", loaded);
  EXPECT_TRUE(std::equal(loaded[1].tensor.data().begin(), loaded[1].tensor.data().end(),
                         params[0].tensor.data().begin()));
  EXPECT_TRUE(std::equal(loaded[0].tensor.data().begin(), loaded[0].tensor.data().end(),
                         params[1].tensor.data().begin()));
}

TEST_F(CheckpointTest, RejectsShapeMismatchMissingAndExtraNames) {
  nn::ParameterList params{{"a", Tensor::zeros({2, 3})}, {"b", Tensor::zeros({4})}};
  nn::save_checkpoint(dir_ / "m.ckpt", params);
  nn::ParameterList wrong_shape{{"a", Tensor::zeros({3, 2})}, {"b", Tensor::zeros({4})}};
  EXPECT_THROW(nn::load_checkpoint(dir_ / "m.ckpt", wrong_shape), nn::CheckpointError);
  nn::ParameterList missing{{"a", Tensor::zeros({2, 3})}, {"c", Tensor::zeros({4})}};
  EXPECT_THROW(nn::load_checkpoint(dir_ / "m.ckpt", missing), nn::CheckpointError);
  nn::ParameterList fewer{{"a", Tensor::zeros({2, 3})}};
  EXPECT_THROW(nn::load_checkpoint(dir_ / "m.ckpt", fewer), nn::CheckpointError);
}

TEST_F(CheckpointTest, RejectsGarbageAndMissingFile) {
  std::ofstream(dir_ / "bad.ckpt") << "not a checkpoint";
  EXPECT_THROW(nn::read_checkpoint(dir_ / "bad.ckpt"), nn::CheckpointError);
  EXPECT_THROW(nn::read_checkpoint(dir_ / "absent.ckpt"), nn::CheckpointError);
}

}  // namespace
}  // namespace prosody
