#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "fcppn/container.hpp"
#include "fcppn/gradcheck.hpp"
#include "fcppn/perceptual.hpp"
#include "fcppn/rng.hpp"

namespace fcppn {
namespace {

template <typename T>
Tensor<T> random_image(std::uint64_t seed, Shape shape) {
  Xoshiro256 rng(seed);
  Tensor<T> t(std::move(shape));
  for (T& v : t.values()) v = static_cast<T>(rng.uniform());
  return t;
}

TEST(Extract, PixelIsIdentity) {
  const auto img = random_image<double>(1, {6, 5, 3});
  const FeatureStack<double> s = extract(Extractor::pixel(), img);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], img);
}

TEST(Extract, PyramidTapShapes) {
  const auto s = extract(Extractor::pyramid(0), random_image<float>(2, {64, 64, 3}));
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].shape(), (Shape{64, 64, 16}));
  EXPECT_EQ(s[1].shape(), (Shape{32, 32, 32}));
  EXPECT_EQ(s[2].shape(), (Shape{16, 16, 64}));
}

TEST(Extract, PyramidIsDeterministicPerSeed) {
  const auto img = random_image<float>(3, {16, 16, 3});
  const auto a = extract(Extractor::pyramid(5), img);
  const auto b = extract(Extractor::pyramid(5), img);
  const auto c = extract(Extractor::pyramid(6), img);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(a[l], b[l]);
  EXPECT_NE(a[0], c[0]);
}

TEST(Extract, RejectsNonRgb) {
  EXPECT_THROW(extract(Extractor::pixel(), Tensor<float>({4, 4, 1})),
               ShapeError);
}

TEST(ExtractorSpec, Parsing) {
  EXPECT_EQ(make_extractor("pixel").kind(), Extractor::Kind::pixel);
  EXPECT_EQ(make_extractor("pyramid:7").kind(), Extractor::Kind::pyramid);
  EXPECT_THROW(make_extractor("pyramid:x"), ConfigError);
  EXPECT_THROW(make_extractor("vgg"), ConfigError);
  EXPECT_THROW(make_extractor("container:/nonexistent/file.fcwt"), IoError);
}

TEST(ContentLoss, Examples) {
  const FeatureStack<double> a{Tensor<double>({1, 1, 1}, {1.0})};
  const FeatureStack<double> b{Tensor<double>({1, 1, 1}, {3.0})};
  EXPECT_EQ(content_loss(a, b), 4.0);
  EXPECT_EQ(content_loss(a, a), 0.0);
  const FeatureStack<double> wrong{Tensor<double>({1, 1, 2})};
  EXPECT_THROW(content_loss(a, wrong), ShapeError);
}

TEST(ContentLoss, MatchesLoopOracle) {
  const FeatureStack<double> a{random_image<double>(4, {4, 5, 3}),
                               random_image<double>(5, {2, 3, 7})};
  const FeatureStack<double> b{random_image<double>(6, {4, 5, 3}),
                               random_image<double>(7, {2, 3, 7})};
  double expected = 0;
  for (std::size_t l = 0; l < 2; ++l) {
    double s = 0;
    for (std::size_t i = 0; i < a[l].size(); ++i) {
      s += (a[l][i] - b[l][i]) * (a[l][i] - b[l][i]);
    }
    expected += s / double(a[l].size());
  }
  expected /= 2;
  EXPECT_NEAR(content_loss(a, b), expected, 1e-10);
  EXPECT_GE(content_loss(a, b), 0.0);

  Graph<double> g;
  std::vector<NodeId> na, nb;
  for (const auto& t : a) na.push_back(g.constant(t));
  for (const auto& t : b) nb.push_back(g.constant(t));
  EXPECT_NEAR(g.value(content_loss(g, std::span<const NodeId>(na),
                                   std::span<const NodeId>(nb)))
                  .item(),
              expected, 1e-10);
}

TEST(Gram, Examples) {
  const FeatureStack<double> constant{Tensor<double>({3, 4, 1}, 0.7)};
  EXPECT_NEAR(gram(constant)[0].item(), 0.49, 1e-15);

  // Channel 0 lives on the left column, channel 1 on the right.
  Tensor<double> disjoint({2, 2, 2});
  disjoint.at(0, 0, 0) = 1;
  disjoint.at(1, 0, 0) = 2;
  disjoint.at(0, 1, 1) = 3;
  disjoint.at(1, 1, 1) = 4;
  const Tensor<double> gm = gram(FeatureStack<double>{disjoint})[0];
  EXPECT_EQ(gm[1], 0.0);
  EXPECT_EQ(gm[2], 0.0);
}

TEST(Gram, MatchesTripleLoopOracle) {
  const auto act = random_image<double>(8, {4, 4, 3});
  const Tensor<double> gm = gram(FeatureStack<double>{act})[0];
  ASSERT_EQ(gm.shape(), (Shape{3, 3}));
  const std::size_t m = 16, n = 3;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < m; ++k) s += act[k * n + i] * act[k * n + j];
      EXPECT_NEAR(gm[i * n + j], s / double(n * m), 1e-10);
    }
  }
}

TEST(Gram, SymmetricAndPositiveSemidefinite) {
  const auto act = random_image<double>(9, {6, 5, 4});
  Graph<double> g;
  const Tensor<double>& gm = g.value(gram(g, g.constant(act)));
  const std::size_t n = 4;
  double trace = 0;
  for (std::size_t i = 0; i < n; ++i) {
    trace += gm[i * n + i];
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(gm[i * n + j], gm[j * n + i], 1e-12);
    }
  }
  // PSD check via quadratic forms on random directions.
  Xoshiro256 rng(10);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(n);
    double norm2 = 0;
    for (double& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
    double q = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) q += v[i] * gm[i * n + j] * v[j];
    }
    EXPECT_GE(q / norm2, -1e-8 * trace);
  }
}

TEST(StyleLoss, Examples) {
  const GramSet<double> a{Tensor<double>({1, 1}, {2.0})};
  const GramSet<double> b{Tensor<double>({1, 1}, {5.0})};
  EXPECT_EQ(style_loss(a, b), 9.0);
  EXPECT_EQ(style_loss(a, a), 0.0);
  EXPECT_THROW(style_loss(a, GramSet<double>{Tensor<double>({2, 2})}),
               ShapeError);
}

TEST(StyleLoss, InvariantUnderSpatialPermutation) {
  const auto act = random_image<double>(11, {5, 6, 3});
  const auto other = random_image<double>(12, {5, 6, 3});
  Tensor<double> perm(act.shape());
  const std::size_t m = 30, n = 3;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t to = (11 * k + 4) % m;
    for (std::size_t c = 0; c < n; ++c) perm[to * n + c] = act[k * n + c];
  }
  const auto ref = gram(FeatureStack<double>{other});
  EXPECT_NEAR(style_loss(gram(FeatureStack<double>{act}), ref),
              style_loss(gram(FeatureStack<double>{perm}), ref), 1e-12);
}

// Shifting a periodic target whose extent is a whole number of periods only
// permutes its pixel sites.
TEST(StyleLoss, ShiftedPeriodicTargetHasSameStyleLoss) {
  const std::size_t n = 16, period = 4;
  Tensor<double> img({n, n, 3});
  Tensor<double> shifted({n, n, 3});
  Xoshiro256 rng(13);
  std::vector<double> tile(period * period * 3);
  for (double& v : tile) v = rng.uniform();
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(y, x, c) = tile[((y % period) * period + x % period) * 3 + c];
        shifted.at(y, x, c) =
            tile[(((y + 1) % period) * period + (x + 3) % period) * 3 + c];
      }
    }
  }
  const auto probe = random_image<double>(14, {n, n, 3});
  const Extractor px = Extractor::pixel();
  const auto gp = gram(extract(px, probe));
  EXPECT_NEAR(style_loss(gram(extract(px, img)), gp),
              style_loss(gram(extract(px, shifted)), gp), 1e-6);
}

TEST(Losses, GradientsThroughPyramid) {
  const auto target = random_image<double>(15, {16, 16, 3});
  const Extractor ex = Extractor::pyramid(2);
  for (bool style : {false, true}) {
    Graph<double> g;
    const NodeId img = g.parameter(random_image<double>(16, {16, 16, 3}));
    const std::vector<NodeId> taps = ex.extract(g, img);
    std::vector<NodeId> ours, theirs;
    NodeId loss;
    if (style) {
      for (NodeId t : taps) ours.push_back(gram(g, t));
      for (const auto& m : gram(extract(ex, target))) theirs.push_back(g.constant(m));
      loss = style_loss(g, std::span<const NodeId>(ours),
                        std::span<const NodeId>(theirs));
    } else {
      for (const auto& f : extract(ex, target)) theirs.push_back(g.constant(f));
      loss = content_loss(g, std::span<const NodeId>(taps),
                          std::span<const NodeId>(theirs));
    }
    GradCheckOptions opts;
    opts.max_samples = 200;
    const GradCheckReport r = gradient_check(g, loss, img, opts);
    EXPECT_TRUE(r.passed) << (style ? "style " : "content ")
                          << r.max_relative_error;
  }
}

// A small two-level extractor container: conv(3->4) relu pool conv(4->2).
Container tiny_extractor(const std::string& pool = "max") {
  Container c;
  Xoshiro256 rng(17);
  Tensor<float> w1({3, 3, 3, 4}), b1({4}), w2({3, 3, 4, 2}), b2({2});
  for (auto* t : {&w1, &b1, &w2, &b2}) {
    for (float& v : t->values()) v = static_cast<float>(rng.normal() * 0.3);
  }
  c.tensors = {{"conv1.w", w1}, {"conv1.b", b1}, {"conv2.w", w2}, {"conv2.b", b2}};
  c.header = R"({"format": "fcppn-extractor",
    "preprocess": {"scale": 255.0, "mean": [100.0, 110.0, 120.0],
                   "channel_order": "bgr"},
    "pool": ")" + pool + R"(",
    "layers": [
      {"name": "conv1", "op": "conv3x3", "weight": "conv1.w", "bias": "conv1.b"},
      {"name": "relu1", "op": "relu"},
      {"name": "pool1", "op": "pool"},
      {"name": "conv2", "op": "conv3x3", "weight": "conv2.w", "bias": "conv2.b"}
    ],
    "taps": ["relu1", "pool1", "conv2"]})";
  return c;
}

TEST(Container, RoundTrip) {
  const Container c = tiny_extractor();
  const auto bytes = encode_container(c);
  EXPECT_EQ(std::memcmp(bytes.data(), "FCWT", 4), 0);
  const Container back = decode_container(bytes);
  ASSERT_EQ(back.tensors.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.tensors[i].name, c.tensors[i].name);
    EXPECT_EQ(back.tensors[i].value, c.tensors[i].value);
  }
  EXPECT_EQ(back.header, c.header);
  EXPECT_EQ(encode_container(back), bytes);
}

TEST(Container, TruncationNamesTensorAndOffset) {
  auto bytes = encode_container(tiny_extractor());
  bytes.resize(60);
  try {
    decode_container(bytes);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("conv1.w"), std::string::npos) << msg;
    EXPECT_NE(msg.find("offset"), std::string::npos) << msg;
  }
}

TEST(Container, RejectsBadMagicVersionAndTrailingBytes) {
  auto bytes = encode_container(tiny_extractor());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_container(bad_magic), ParseError);
  auto v2 = bytes;
  v2[4] = 2;
  EXPECT_THROW(decode_container(v2), ParseError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_container(trailing), ParseError);
}

TEST(LoadedExtractor, RunsLayerProgramWithPreprocessing) {
  const Extractor ex = Extractor::from_container(tiny_extractor());
  EXPECT_EQ(ex.kind(), Extractor::Kind::loaded);
  EXPECT_EQ(ex.pool_mode(), PoolMode::max);
  const auto img = random_image<double>(18, {6, 7, 3});
  const auto feats = extract(ex, img);
  ASSERT_EQ(feats.size(), 3u);
  EXPECT_EQ(feats[0].shape(), (Shape{6, 7, 4}));
  EXPECT_EQ(feats[1].shape(), (Shape{3, 4, 4}));
  EXPECT_EQ(feats[2].shape(), (Shape{3, 4, 2}));

  // relu1 by hand: preprocess then conv1 then relu.
  const Container c = tiny_extractor();
  const Tensor<float>& w = c.tensors[0].value;
  const Tensor<float>& b = c.tensors[1].value;
  const double mean[3] = {100, 110, 120};
  const auto pre = [&](long y, long x, std::size_t j) {
    if (y < 0 || x < 0 || y >= 6 || x >= 7) return 0.0;
    return 255.0 * img.at(y, x, 2 - j) - mean[j];
  };
  for (long y = 0; y < 6; ++y) {
    for (long x = 0; x < 7; ++x) {
      for (std::size_t o = 0; o < 4; ++o) {
        double acc = b[o];
        for (long dy = -1; dy <= 1; ++dy) {
          for (long dx = -1; dx <= 1; ++dx) {
            for (std::size_t i = 0; i < 3; ++i) {
              acc += pre(y + dy, x + dx, i) *
                     w[(((dy + 1) * 3 + (dx + 1)) * 3 + i) * 4 + o];
            }
          }
        }
        EXPECT_NEAR(feats[0].at(y, x, o), std::max(acc, 0.0), 1e-4 * (1 + std::abs(acc)));
      }
    }
  }
  EXPECT_EQ(content_loss(feats, extract(ex, img)), 0.0);
}

TEST(LoadedExtractor, PoolOverrideAndValidation) {
  EXPECT_EQ(Extractor::from_container(tiny_extractor(), PoolMode::avg).pool_mode(),
            PoolMode::avg);
  EXPECT_EQ(Extractor::from_container(tiny_extractor("avg")).pool_mode(),
            PoolMode::avg);

  Container bad = tiny_extractor();
  bad.tensors[0].value = Tensor<float>({3, 3, 2, 4});
  EXPECT_THROW(Extractor::from_container(bad), ShapeError);

  Container missing = tiny_extractor();
  missing.tensors.pop_back();
  EXPECT_THROW(Extractor::from_container(missing), ConfigError);

  Container bad_tap = tiny_extractor();
  bad_tap.header.replace(bad_tap.header.find("\"conv2\"]"), 7, "\"convX\"");
  EXPECT_THROW(Extractor::from_container(bad_tap), ConfigError);
}

TEST(LoadedExtractor, LoadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "fcppn_tiny.fcwt";
  write_container(path, tiny_extractor());
  const Extractor ex = make_extractor("container:" + path.string());
  EXPECT_EQ(ex.taps().size(), 3u);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace fcppn
