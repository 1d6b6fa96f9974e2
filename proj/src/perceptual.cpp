#include "fcppn/perceptual.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "fcppn/rng.hpp"

namespace fcppn {

using nlohmann::json;

std::string to_string(PoolMode mode) {
  return mode == PoolMode::max ? "max" : "avg";
}

PoolMode parse_pool_mode(const std::string& s) {
  if (s == "max") return PoolMode::max;
  if (s == "avg") return PoolMode::avg;
  throw ConfigError("unknown pool mode '" + s + "' (expected max or avg)");
}

Extractor Extractor::pixel() {
  Extractor e;
  e.kind_ = Kind::pixel;
  e.taps_ = {"image"};
  return e;
}

Extractor Extractor::pyramid(std::uint64_t seed) {
  constexpr std::array<std::size_t, 4> kChannels{3, 16, 32, 64};
  Extractor e;
  e.kind_ = Kind::pyramid;
  e.pool_ = PoolMode::avg;
  for (std::size_t level = 0; level < 3; ++level) {
    const std::size_t cin = kChannels[level];
    const std::size_t cout = kChannels[level + 1];
    const std::string suffix = std::to_string(level + 1);
    if (level > 0) {
      e.steps_.push_back({"pool" + std::to_string(level),
                          ExtractorStep::Op::pool, {}, {}});
    }
    ExtractorStep conv{"conv" + suffix, ExtractorStep::Op::conv3x3,
                       Tensor<float>(Shape{3, 3, cin, cout}),
                       Tensor<float>(Shape{cout})};
    Xoshiro256 rng(Xoshiro256::derive_seed(seed, level));
    const double stddev = std::sqrt(2.0 / (9.0 * static_cast<double>(cin)));
    for (float& w : conv.weights.values()) {
      w = static_cast<float>(rng.normal() * stddev);
    }
    e.steps_.push_back(std::move(conv));
    e.steps_.push_back({"relu" + suffix, ExtractorStep::Op::relu, {}, {}});
    e.taps_.push_back("relu" + suffix);
  }
  return e;
}

namespace {

std::array<std::size_t, 3> parse_channel_order(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "rgb") return {0, 1, 2};
    if (s == "bgr") return {2, 1, 0};
    throw ConfigError("unknown channel_order '" + s + "'");
  }
  auto v = j.get<std::array<std::size_t, 3>>();
  std::array<std::size_t, 3> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != std::array<std::size_t, 3>{0, 1, 2}) {
    throw ConfigError("channel_order must be a permutation of 0,1,2");
  }
  return v;
}

}  // namespace

Extractor Extractor::from_container(const Container& container,
                                    std::optional<PoolMode> pool_override) {
  json header;
  try {
    header = json::parse(container.header);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("extractor header is not valid JSON: ") +
                      e.what());
  }
  if (header.value("format", "") != "fcppn-extractor") {
    throw ConfigError("container header does not describe an extractor");
  }

  Extractor e;
  e.kind_ = Kind::loaded;
  try {
    if (header.contains("preprocess")) {
      const json& p = header["preprocess"];
      e.preprocess_.scale = p.value("scale", 1.0);
      if (p.contains("mean")) {
        e.preprocess_.mean = p["mean"].get<std::array<double, 3>>();
      }
      if (p.contains("channel_order")) {
        e.preprocess_.channel_order = parse_channel_order(p["channel_order"]);
      }
    }
    e.pool_ = parse_pool_mode(header.value("pool", std::string("max")));
    if (pool_override) e.pool_ = *pool_override;

    std::size_t channels = 3;
    for (const json& layer : header.at("layers")) {
      ExtractorStep step;
      step.name = layer.at("name").get<std::string>();
      const std::string op = layer.at("op").get<std::string>();
      if (op == "conv3x3") {
        step.op = ExtractorStep::Op::conv3x3;
        const auto wname = layer.at("weight").get<std::string>();
        const auto bname = layer.at("bias").get<std::string>();
        const ContainerTensor* w = container.find(wname);
        const ContainerTensor* b = container.find(bname);
        if (!w || !b) {
          throw ConfigError("layer '" + step.name + "' references missing " +
                            "tensor '" + (!w ? wname : bname) + "'");
        }
        const Shape& ws = w->value.shape();
        if (ws.size() != 4 || ws[0] != 3 || ws[1] != 3 || ws[2] != channels) {
          throw ShapeError("layer '" + step.name + "': kernel '" + wname +
                           "' has shape " + to_string(ws) + ", expected [3,3," +
                           std::to_string(channels) + ",Cout]");
        }
        if (b->value.shape() != Shape{ws[3]}) {
          throw ShapeError("layer '" + step.name + "': bias '" + bname +
                           "' has shape " + to_string(b->value.shape()) +
                           ", expected [" + std::to_string(ws[3]) + "]");
        }
        channels = ws[3];
        step.weights = w->value;
        step.bias = b->value;
      } else if (op == "relu") {
        step.op = ExtractorStep::Op::relu;
      } else if (op == "pool") {
        step.op = ExtractorStep::Op::pool;
      } else {
        throw ConfigError("layer '" + step.name + "' has unknown op '" + op +
                          "'");
      }
      e.steps_.push_back(std::move(step));
    }
    e.taps_ = header.at("taps").get<std::vector<std::string>>();
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed extractor header: ") + ex.what());
  }

  if (e.taps_.empty()) throw ConfigError("extractor declares no taps");
  for (const auto& tap : e.taps_) {
    const bool found =
        std::any_of(e.steps_.begin(), e.steps_.end(),
                    [&](const ExtractorStep& s) { return s.name == tap; });
    if (!found) {
      throw ConfigError("tap '" + tap + "' is not a layer of the extractor");
    }
  }
  return e;
}

Extractor load_container(const std::filesystem::path& path,
                         std::optional<PoolMode> pool_override) {
  return Extractor::from_container(read_container(path), pool_override);
}

Extractor make_extractor(const std::string& spec,
                         std::optional<PoolMode> pool_override) {
  if (spec == "pixel") return Extractor::pixel();
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? std::string() : spec.substr(colon + 1);
  if (kind == "pyramid") {
    if (arg.empty()) return Extractor::pyramid(0);
    try {
      std::size_t used = 0;
      const auto seed = std::stoull(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
      return Extractor::pyramid(seed);
    } catch (const std::logic_error&) {
      throw ConfigError("bad pyramid seed in extractor spec '" + spec + "'");
    }
  }
  if (kind == "container" && !arg.empty()) {
    return load_container(arg, pool_override);
  }
  throw ConfigError("unknown extractor spec '" + spec +
                    "' (expected pixel, pyramid:SEED or container:PATH)");
}

template <typename T>
std::vector<NodeId> Extractor::extract(Graph<T>& graph, NodeId image) const {
  const Shape& s = graph.value(image).shape();
  if (s.size() != 3 || s[2] != 3) {
    throw ShapeError("extractor input must be [H,W,3], got " + to_string(s));
  }
  if (kind_ == Kind::pixel) return {image};

  NodeId h = image;
  if (kind_ == Kind::loaded) {
    Tensor<T> w(Shape{3, 3});
    Tensor<T> b(Shape{3});
    for (std::size_t j = 0; j < 3; ++j) {
      w[preprocess_.channel_order[j] * 3 + j] =
          static_cast<T>(preprocess_.scale);
      b[j] = static_cast<T>(-preprocess_.mean[j]);
    }
    h = graph.conv1x1(h, graph.constant(std::move(w)),
                      graph.constant(std::move(b)));
  }

  std::vector<NodeId> out;
  for (const ExtractorStep& step : steps_) {
    switch (step.op) {
      case ExtractorStep::Op::conv3x3:
        h = graph.conv3x3(h, graph.constant(step.weights.cast<T>()),
                          graph.constant(step.bias.cast<T>()));
        break;
      case ExtractorStep::Op::relu:
        h = graph.relu(h);
        break;
      case ExtractorStep::Op::pool:
        h = pool_ == PoolMode::max ? graph.maxpool2x2(h) : graph.avgpool2x2(h);
        break;
    }
    if (std::find(taps_.begin(), taps_.end(), step.name) != taps_.end()) {
      out.push_back(h);
      if (out.size() == taps_.size()) break;
    }
  }
  return out;
}

template <typename T>
NodeId gram(Graph<T>& graph, NodeId activations) {
  const Shape& s = graph.value(activations).shape();
  if (s.size() != 3) {
    throw ShapeError("gram: expected [H,W,N] activations, got " +
                     to_string(s));
  }
  const double norm = 1.0 / static_cast<double>(s[0] * s[1] * s[2]);
  return graph.scale(graph.matmul(activations, activations, true, false),
                     static_cast<T>(norm));
}

namespace {

template <typename T>
NodeId layer_average(Graph<T>& graph, std::span<const NodeId> a,
                     std::span<const NodeId> b, bool mean_per_layer,
                     const char* what) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError(std::string(what) + ": layer counts differ (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  NodeId total = 0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    const NodeId sq = graph.square(graph.sub(a[l], b[l]));
    const NodeId term =
        mean_per_layer ? graph.reduce_mean(sq) : graph.reduce_sum(sq);
    total = l == 0 ? term : graph.add(total, term);
  }
  return graph.scale(total, static_cast<T>(1.0 / static_cast<double>(a.size())));
}

}  // namespace

template <typename T>
NodeId content_loss(Graph<T>& graph, std::span<const NodeId> a,
                    std::span<const NodeId> b) {
  return layer_average(graph, a, b, true, "content_loss");
}

template <typename T>
NodeId style_loss(Graph<T>& graph, std::span<const NodeId> a,
                  std::span<const NodeId> b) {
  return layer_average(graph, a, b, false, "style_loss");
}

template <typename T>
FeatureStack<T> extract(const Extractor& extractor, const Tensor<T>& image) {
  Graph<T> graph;
  const NodeId in = graph.constant(image);
  FeatureStack<T> out;
  for (NodeId id : extractor.extract(graph, in)) out.push_back(graph.value(id));
  return out;
}

template <typename T>
GramSet<T> gram(const FeatureStack<T>& stack) {
  GramSet<T> out;
  for (const auto& layer : stack) {
    Graph<T> graph;
    out.push_back(graph.value(gram(graph, graph.constant(layer))));
  }
  return out;
}

namespace {

template <typename T>
T stack_loss(const std::vector<Tensor<T>>& a, const std::vector<Tensor<T>>& b,
             bool mean_per_layer, const char* what) {
  Graph<T> graph;
  std::vector<NodeId> na, nb;
  for (const auto& t : a) na.push_back(graph.constant(t));
  for (const auto& t : b) nb.push_back(graph.constant(t));
  return graph.value(layer_average<T>(graph, na, nb, mean_per_layer, what))
      .item();
}

}  // namespace

template <typename T>
T content_loss(const FeatureStack<T>& a, const FeatureStack<T>& b) {
  return stack_loss(a, b, true, "content_loss");
}

template <typename T>
T style_loss(const GramSet<T>& a, const GramSet<T>& b) {
  return stack_loss(a, b, false, "style_loss");
}

#define FCPPN_INSTANTIATE(T)                                                  \
  template std::vector<NodeId> Extractor::extract<T>(Graph<T>&, NodeId) const; \
  template NodeId gram<T>(Graph<T>&, NodeId);                                 \
  template NodeId content_loss<T>(Graph<T>&, std::span<const NodeId>,         \
                                  std::span<const NodeId>);                   \
  template NodeId style_loss<T>(Graph<T>&, std::span<const NodeId>,           \
                                std::span<const NodeId>);                     \
  template FeatureStack<T> extract<T>(const Extractor&, const Tensor<T>&);    \
  template GramSet<T> gram<T>(const FeatureStack<T>&);                        \
  template T content_loss<T>(const FeatureStack<T>&, const FeatureStack<T>&); \
  template T style_loss<T>(const GramSet<T>&, const GramSet<T>&);

FCPPN_INSTANTIATE(float)
FCPPN_INSTANTIATE(double)

}  // namespace fcppn
