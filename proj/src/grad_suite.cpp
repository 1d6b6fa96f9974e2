#include "fcppn/grad_suite.hpp"

#include <functional>

#include "fcppn/coordnet.hpp"
#include "fcppn/perceptual.hpp"
#include "fcppn/rng.hpp"

namespace fcppn {

namespace {

Tensor<double> random_tensor(Xoshiro256& rng, Shape shape, double lo = -1.0,
                             double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

// Values in +-[0.1, 1], keeping relu inputs away from its kink.
Tensor<double> away_from_zero(Xoshiro256& rng, Shape shape) {
  Tensor<double> t = random_tensor(rng, std::move(shape), 0.1, 1.0);
  for (double& v : t.values()) {
    if (rng.uniform() < 0.5) v = -v;
  }
  return t;
}

void merge(GradCheckReport& into, const GradCheckReport& r) {
  const std::size_t checked = into.checked + r.checked;
  const std::size_t excluded = into.excluded + r.excluded;
  if (into.checked == 0 || r.max_relative_error > into.max_relative_error) {
    into = r;
  }
  into.checked = checked;
  into.excluded = excluded;
}

void finish(GradCheckReport& r, const GradCheckOptions& options) {
  r.passed = r.checked > 0 && r.max_relative_error < options.tolerance;
}

// Builds op(inputs); the suite reduces it to a scalar with a fixed random
// projection so every output element gets a distinct weight.
using OpBuilder =
    std::function<NodeId(Graph<double>&, Xoshiro256&, std::vector<NodeId>&)>;

GradCheckReport check_op(const OpBuilder& build, std::uint64_t seed,
                         std::size_t trials, const GradCheckOptions& options) {
  GradCheckReport total;
  for (std::size_t t = 0; t < trials; ++t) {
    Xoshiro256 rng(Xoshiro256::derive_seed(seed, t));
    Graph<double> g;
    std::vector<NodeId> inputs;
    const NodeId out = build(g, rng, inputs);
    const NodeId proj = g.constant(random_tensor(rng, g.value(out).shape()));
    const NodeId loss = g.reduce_sum(g.mul(out, proj));
    for (NodeId leaf : inputs) merge(total, gradient_check(g, loss, leaf, options));
  }
  finish(total, options);
  return total;
}

NodeId param(Graph<double>& g, std::vector<NodeId>& inputs, Tensor<double> v) {
  inputs.push_back(g.parameter(std::move(v)));
  return inputs.back();
}

std::vector<std::pair<std::string, OpBuilder>> op_builders() {
  using R = Xoshiro256;
  using In = std::vector<NodeId>;
  const Shape s{3, 4, 2};
  std::vector<std::pair<std::string, OpBuilder>> b;
  const auto unary = [s](NodeId (Graph<double>::*op)(NodeId)) {
    return [s, op](Graph<double>& g, R& r, In& in) {
      return (g.*op)(param(g, in, random_tensor(r, s)));
    };
  };
  const auto binary = [s](NodeId (Graph<double>::*op)(NodeId, NodeId)) {
    return [s, op](Graph<double>& g, R& r, In& in) {
      const NodeId a = param(g, in, random_tensor(r, s));
      return (g.*op)(a, param(g, in, random_tensor(r, s)));
    };
  };
  b.emplace_back("leaf", [s](Graph<double>& g, R& r, In& in) {
    return param(g, in, random_tensor(r, s));
  });
  b.emplace_back("add", binary(&Graph<double>::add));
  b.emplace_back("sub", binary(&Graph<double>::sub));
  b.emplace_back("mul", binary(&Graph<double>::mul));
  b.emplace_back("scale", [s](Graph<double>& g, R& r, In& in) {
    return g.scale(param(g, in, random_tensor(r, s)), -1.7);
  });
  b.emplace_back("arctan", [s](Graph<double>& g, R& r, In& in) {
    return g.arctan(param(g, in, random_tensor(r, s, -3.0, 3.0)));
  });
  b.emplace_back("square", unary(&Graph<double>::square));
  b.emplace_back("sigmoid", [s](Graph<double>& g, R& r, In& in) {
    return g.sigmoid(param(g, in, random_tensor(r, s, -4.0, 4.0)));
  });
  b.emplace_back("relu", [s](Graph<double>& g, R& r, In& in) {
    return g.relu(param(g, in, away_from_zero(r, s)));
  });
  b.emplace_back("conv1x1", [](Graph<double>& g, R& r, In& in) {
    const NodeId x = param(g, in, random_tensor(r, {4, 5, 3}));
    const NodeId w = param(g, in, random_tensor(r, {3, 4}));
    return g.conv1x1(x, w, param(g, in, random_tensor(r, {4})));
  });
  b.emplace_back("conv3x3", [](Graph<double>& g, R& r, In& in) {
    const NodeId x = param(g, in, random_tensor(r, {5, 6, 3}));
    const NodeId w = param(g, in, random_tensor(r, {3, 3, 3, 4}));
    return g.conv3x3(x, w, param(g, in, random_tensor(r, {4})));
  });
  // Odd extents exercise the ragged last window.
  b.emplace_back("maxpool2x2", [](Graph<double>& g, R& r, In& in) {
    return g.maxpool2x2(param(g, in, random_tensor(r, {5, 7, 2})));
  });
  b.emplace_back("avgpool2x2", [](Graph<double>& g, R& r, In& in) {
    return g.avgpool2x2(param(g, in, random_tensor(r, {5, 7, 2})));
  });
  b.emplace_back("concat_channels", [](Graph<double>& g, R& r, In& in) {
    const NodeId a = param(g, in, random_tensor(r, {3, 4, 2}));
    return g.concat_channels(a, param(g, in, random_tensor(r, {3, 4, 3})));
  });
  b.emplace_back("reduce_mean", unary(&Graph<double>::reduce_mean));
  b.emplace_back("reduce_sum", unary(&Graph<double>::reduce_sum));
  b.emplace_back("matmul", [](Graph<double>& g, R& r, In& in) {
    const NodeId a = param(g, in, random_tensor(r, {4, 3}));
    return g.matmul(a, param(g, in, random_tensor(r, {3, 5})));
  });
  b.emplace_back("matmul_transposed", [](Graph<double>& g, R& r, In& in) {
    const NodeId a = param(g, in, random_tensor(r, {3, 4}));
    return g.matmul(a, param(g, in, random_tensor(r, {5, 3})), true, true);
  });
  return b;
}

GradCheckReport check_pipeline(Head head, bool style, std::uint64_t seed,
                               const GradCheckOptions& options) {
  NetworkConfig net;
  net.depth = 3;
  net.filters = 8;
  net.head = head;
  net.freq_w = 4;
  net.freq_h = 4;
  net.seed = seed;

  Graph<double> g;
  const Params<double> params = init_params(net).cast<double>();
  const ParamNodes nodes = add_params(g, params, true);
  const ImageNodes img = build_image(g, net, nodes, make_grid(16, 16));

  Xoshiro256 rng(Xoshiro256::derive_seed(seed, 1000));
  const Tensor<double> target = random_tensor(rng, {16, 16, 3}, 0.0, 1.0);
  const Extractor extractor = Extractor::pyramid(seed);
  const std::vector<NodeId> taps = extractor.extract(g, img.image);
  std::vector<NodeId> ours;
  std::vector<NodeId> theirs;
  NodeId loss = 0;
  if (style) {
    for (NodeId t : taps) ours.push_back(gram(g, t));
    for (const auto& m : gram(extract(extractor, target))) {
      theirs.push_back(g.constant(m));
    }
    loss = style_loss(g, std::span<const NodeId>(ours),
                      std::span<const NodeId>(theirs));
  } else {
    for (const auto& f : extract(extractor, target)) {
      theirs.push_back(g.constant(f));
    }
    loss = content_loss(g, std::span<const NodeId>(taps),
                        std::span<const NodeId>(theirs));
  }

  GradCheckOptions sampled = options;
  if (sampled.max_samples == 0) sampled.max_samples = 24;
  GradCheckReport total;
  for (std::size_t l = 0; l < nodes.weights.size(); ++l) {
    sampled.seed = Xoshiro256::derive_seed(seed, 2 * l);
    merge(total, gradient_check(g, loss, nodes.weights[l], sampled));
    sampled.seed = Xoshiro256::derive_seed(seed, 2 * l + 1);
    merge(total, gradient_check(g, loss, nodes.biases[l], sampled));
  }
  finish(total, options);
  return total;
}

}  // namespace

std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed,
                                           std::size_t trials,
                                           const GradCheckOptions& options) {
  std::vector<GradSuiteEntry> out;
  std::uint64_t stream = 0;
  for (const auto& [name, build] : op_builders()) {
    out.push_back({name, check_op(build, Xoshiro256::derive_seed(seed, stream++),
                                  trials, options)});
  }
  out.push_back({"cppn_content_16x16",
                 check_pipeline(Head::cppn, false, seed, options)});
  out.push_back({"fcppn_style_16x16",
                 check_pipeline(Head::fcppn, true, seed, options)});
  return out;
}

}  // namespace fcppn
