#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "fcppn/kernels.hpp"
#include "fcppn/rng.hpp"

namespace fcppn::kernels {
namespace {

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform() * 2.0 - 1.0;
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b,
                  double tol = 1e-12) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_NEAR(a[i], b[i], tol) << "index " << i;
  }
}

class ConvShapes : public ::testing::TestWithParam<ConvDims> {};

TEST_P(ConvShapes, Conv1x1MatchesReference) {
  const ConvDims d = GetParam();
  const auto x = random_buffer(d.pixels() * d.cin, 1);
  const auto w = random_buffer(d.cin * d.cout, 2);
  const auto b = random_buffer(d.cout, 3);
  const auto dy = random_buffer(d.pixels() * d.cout, 4);
  std::vector<double> y1(d.pixels() * d.cout), y2(y1.size());
  conv1x1_forward(x.data(), w.data(), b.data(), y1.data(), d);
  reference::conv1x1_forward(x.data(), w.data(), b.data(), y2.data(), d);
  expect_close(y1, y2);

  // Backward kernels accumulate, so start from a non-zero buffer.
  std::vector<double> dx1(x.size(), 0.5), dx2(x.size(), 0.5);
  conv1x1_backward_input(dy.data(), w.data(), dx1.data(), d);
  reference::conv1x1_backward_input(dy.data(), w.data(), dx2.data(), d);
  expect_close(dx1, dx2);

  std::vector<double> dw1(w.size(), 0.25), dw2(w.size(), 0.25);
  std::vector<double> db1(b.size(), -1.0), db2(b.size(), -1.0);
  conv1x1_backward_params(x.data(), dy.data(), dw1.data(), db1.data(), d);
  reference::conv1x1_backward_params(x.data(), dy.data(), dw2.data(),
                                     db2.data(), d);
  expect_close(dw1, dw2);
  expect_close(db1, db2);
}

TEST_P(ConvShapes, Conv3x3MatchesReference) {
  const ConvDims d = GetParam();
  const auto x = random_buffer(d.pixels() * d.cin, 5);
  const auto w = random_buffer(9 * d.cin * d.cout, 6);
  const auto b = random_buffer(d.cout, 7);
  const auto dy = random_buffer(d.pixels() * d.cout, 8);
  std::vector<double> y1(d.pixels() * d.cout), y2(y1.size());
  conv3x3_forward(x.data(), w.data(), b.data(), y1.data(), d);
  reference::conv3x3_forward(x.data(), w.data(), b.data(), y2.data(), d);
  expect_close(y1, y2);

  std::vector<double> dx1(x.size(), 0.5), dx2(x.size(), 0.5);
  conv3x3_backward_input(dy.data(), w.data(), dx1.data(), d);
  reference::conv3x3_backward_input(dy.data(), w.data(), dx2.data(), d);
  expect_close(dx1, dx2);

  std::vector<double> dw1(w.size(), 0.25), dw2(w.size(), 0.25);
  std::vector<double> db1(b.size(), -1.0), db2(b.size(), -1.0);
  conv3x3_backward_params(x.data(), dy.data(), dw1.data(), db1.data(), d);
  reference::conv3x3_backward_params(x.data(), dy.data(), dw2.data(),
                                     db2.data(), d);
  expect_close(dw1, dw2);
  expect_close(db1, db2);
}

TEST_P(ConvShapes, PoolingMatchesReference) {
  const ConvDims c = GetParam();
  const PoolDims d{c.height, c.width, c.cin};
  const std::size_t out = d.out_height() * d.out_width() * d.channels;
  const auto x = random_buffer(c.pixels() * c.cin, 9);
  const auto dy = random_buffer(out, 10);

  std::vector<double> y1(out), y2(out);
  std::vector<std::size_t> a1(out), a2(out);
  maxpool2x2_forward(x.data(), y1.data(), a1.data(), d);
  reference::maxpool2x2_forward(x.data(), y2.data(), a2.data(), d);
  EXPECT_EQ(y1, y2);
  EXPECT_EQ(a1, a2);
  std::vector<double> dx1(x.size(), 1.0), dx2(x.size(), 1.0);
  maxpool2x2_backward(dy.data(), a1.data(), dx1.data(), d);
  reference::maxpool2x2_backward(dy.data(), a2.data(), dx2.data(), d);
  expect_close(dx1, dx2);

  avgpool2x2_forward(x.data(), y1.data(), d);
  reference::avgpool2x2_forward(x.data(), y2.data(), d);
  expect_close(y1, y2);
  std::fill(dx1.begin(), dx1.end(), 1.0);
  std::fill(dx2.begin(), dx2.end(), 1.0);
  avgpool2x2_backward(dy.data(), dx1.data(), d);
  reference::avgpool2x2_backward(dy.data(), dx2.data(), d);
  expect_close(dx1, dx2);
}

INSTANTIATE_TEST_SUITE_P(Kernels, ConvShapes,
                         ::testing::Values(ConvDims{1, 1, 1, 1},
                                           ConvDims{5, 7, 3, 4},
                                           ConvDims{16, 16, 8, 16},
                                           ConvDims{33, 17, 6, 5}),
                         [](const auto& info) {
                           const ConvDims& d = info.param;
                           return std::to_string(d.height) + "x" +
                                  std::to_string(d.width) + "_" +
                                  std::to_string(d.cin) + "to" +
                                  std::to_string(d.cout);
                         });

TEST(Matmul, AllTransposeCombinationsMatchReference) {
  const std::size_t m = 7, k = 13, n = 5;
  const auto a = random_buffer(m * k, 11);
  const auto b = random_buffer(k * n, 12);
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      std::vector<double> c1(m * n, 0.5), c2(m * n, 0.5);
      matmul_accumulate(a.data(), b.data(), c1.data(), m, k, n, ta, tb);
      reference::matmul_accumulate(a.data(), b.data(), c2.data(), m, k, n, ta,
                                   tb);
      expect_close(c1, c2);
    }
  }
}

TEST(Matmul, ReferenceMatchesHandComputedProduct) {
  const std::vector<double> a{1, 2, 3, 4, 5, 6};  // [2,3]
  const std::vector<double> b{1, 0, 0, 1, 1, 1};  // [3,2]
  std::vector<double> c(4, 0.0);
  reference::matmul_accumulate(a.data(), b.data(), c.data(), 2, 3, 2, false,
                               false);
  EXPECT_EQ(c, (std::vector<double>{4, 5, 10, 11}));
}

TEST(Kernels, FloatResultsAreRepeatable) {
  const ConvDims d{31, 29, 48, 24};
  Xoshiro256 rng(13);
  std::vector<float> x(d.pixels() * d.cin), w(d.cin * d.cout), b(d.cout);
  for (float& v : x) v = static_cast<float>(rng.uniform());
  for (float& v : w) v = static_cast<float>(rng.uniform() - 0.5);
  std::vector<float> y1(d.pixels() * d.cout), y2(y1.size());
  conv1x1_forward(x.data(), w.data(), b.data(), y1.data(), d);
  conv1x1_forward(x.data(), w.data(), b.data(), y2.data(), d);
  EXPECT_EQ(y1, y2);
}

}  // namespace
}  // namespace fcppn::kernels
