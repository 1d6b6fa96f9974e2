#include "fcppn/coordnet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fcppn/rng.hpp"

namespace fcppn {

namespace {

// Divisor inside phi. Keeps unit-variance pre-activations near unit scale.
constexpr double kPhiScale = 0.67;

}  // namespace

std::string to_string(Head head) {
  return head == Head::cppn ? "cppn" : "fcppn";
}

Head parse_head(const std::string& s) {
  if (s == "cppn") return Head::cppn;
  if (s == "fcppn") return Head::fcppn;
  throw ConfigError("unknown parameterization '" + s +
                    "' (expected cppn or fcppn)");
}

std::string to_string(InitRule rule) {
  return rule == InitRule::fan_in_std ? "fan_in_std" : "literal_variance";
}

InitRule parse_init_rule(const std::string& s) {
  if (s == "fan_in_std") return InitRule::fan_in_std;
  if (s == "literal_variance") return InitRule::literal_variance;
  throw ConfigError("unknown init rule '" + s + "'");
}

void NetworkConfig::validate() const {
  if (depth < 1) throw ConfigError("network depth must be >= 1");
  if (filters < 1) throw ConfigError("network filters must be >= 1");
  if (freq_w * freq_h < 1) {
    throw ConfigError("frequency grid must have at least one entry");
  }
}

std::size_t NetworkConfig::head_channels() const {
  return head == Head::cppn ? 3 : coefficient_channels(freq_w, freq_h);
}

InputField InputField::rows(std::size_t begin, std::size_t end) const {
  InputField out;
  out.width = width;
  out.height = end - begin;
  out.z = z;
  const std::size_t ch = samples.dim(2);
  const auto first = samples.storage().begin() +
                     static_cast<long>(begin * width * ch);
  const auto last = samples.storage().begin() +
                    static_cast<long>(end * width * ch);
  out.samples = Tensor<double>(Shape{out.height, width, ch},
                               std::vector<double>(first, last));
  out.phase = phase.rows(begin, end);
  return out;
}

InputField make_grid(std::size_t width, std::size_t height,
                     std::vector<double> z, std::size_t base_width,
                     std::size_t base_height) {
  if (width < 1 || height < 1) {
    throw ShapeError("make_grid: extents must be >= 1");
  }
  if (base_width == 0) base_width = width;
  if (base_height == 0) base_height = height;

  const auto axis = [](std::size_t n) {
    std::vector<double> v(n, 0.0);
    if (n < 2) return v;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = (2.0 * static_cast<double>(i) / static_cast<double>(n - 1) -
              1.0) *
             std::numbers::sqrt3;
    }
    return v;
  };
  const std::vector<double> xs = axis(width);
  const std::vector<double> ys = axis(height);

  InputField field;
  field.width = width;
  field.height = height;
  field.z = std::move(z);
  const std::size_t ch = 2 + field.z.size();
  field.samples = Tensor<double>(Shape{height, width, ch});
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      field.samples.at(r, c, 0) = xs[c];
      field.samples.at(r, c, 1) = ys[r];
      for (std::size_t k = 0; k < field.z.size(); ++k) {
        field.samples.at(r, c, 2 + k) = field.z[k];
      }
    }
  }
  field.phase = make_phase_coords(width, height, base_width, base_height);
  return field;
}

template <typename T>
std::size_t Params<T>::count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

template <typename T>
std::vector<double> Params<T>::flatten() const {
  std::vector<double> out;
  out.reserve(count());
  for (const auto& l : layers) {
    out.insert(out.end(), l.weights.values().begin(), l.weights.values().end());
    out.insert(out.end(), l.bias.values().begin(), l.bias.values().end());
  }
  return out;
}

template <typename T>
void Params<T>::assign(std::span<const double> flat) {
  if (flat.size() != count()) {
    throw ShapeError("Params::assign: expected " + std::to_string(count()) +
                     " values, got " + std::to_string(flat.size()));
  }
  std::size_t k = 0;
  for (auto& l : layers) {
    for (T& v : l.weights.values()) v = static_cast<T>(flat[k++]);
    for (T& v : l.bias.values()) v = static_cast<T>(flat[k++]);
  }
}

Params<float> init_params(const NetworkConfig& config) {
  config.validate();
  Params<float> params;
  std::size_t cin = config.input_channels();
  for (std::size_t l = 0; l <= config.depth; ++l) {
    const bool is_head = l == config.depth;
    const std::size_t cout = is_head ? config.head_channels() : config.filters;
    const double fan_in = static_cast<double>(cin);
    const double stddev = config.init == InitRule::fan_in_std
                              ? std::sqrt(1.0 / fan_in)
                              : std::pow(1.0 / fan_in, 0.25);
    Xoshiro256 rng(Xoshiro256::derive_seed(config.seed, l));
    Layer<float> layer{Tensor<float>(Shape{cin, cout}),
                       Tensor<float>(Shape{cout})};
    for (float& w : layer.weights.values()) {
      w = static_cast<float>(rng.normal() * stddev);
    }
    params.layers.push_back(std::move(layer));
    cin = 2 * config.filters;
  }
  return params;
}

template <typename T>
NodeId activation_phi(Graph<T>& graph, NodeId a) {
  const T inv = static_cast<T>(1.0 / kPhiScale);
  const NodeId at = graph.arctan(a);
  const NodeId first = graph.scale(at, inv);
  const NodeId second = graph.scale(graph.square(at), inv);
  return graph.concat_channels(first, second);
}

template <typename T>
ParamNodes add_params(Graph<T>& graph, const Params<T>& params,
                      bool trainable) {
  ParamNodes nodes;
  for (const auto& l : params.layers) {
    nodes.weights.push_back(trainable ? graph.parameter(l.weights)
                                      : graph.constant(l.weights));
    nodes.biases.push_back(trainable ? graph.parameter(l.bias)
                                     : graph.constant(l.bias));
  }
  return nodes;
}

template <typename T>
NodeId build_network(Graph<T>& graph, const ParamNodes& params, NodeId input) {
  if (params.weights.empty()) throw ShapeError("network has no layers");
  NodeId h = input;
  const std::size_t hidden = params.weights.size() - 1;
  for (std::size_t l = 0; l < hidden; ++l) {
    h = activation_phi(graph,
                       graph.conv1x1(h, params.weights[l], params.biases[l]));
  }
  return graph.conv1x1(h, params.weights.back(), params.biases.back());
}

template <typename T>
ImageNodes build_image(Graph<T>& graph, const NetworkConfig& config,
                       const ParamNodes& params, const InputField& field) {
  const NodeId input = graph.constant(field.samples.cast<T>());
  ImageNodes out;
  out.head = build_network(graph, params, input);
  if (config.head == Head::fcppn) {
    out.pre_sigmoid = synthesize(graph, out.head, field.phase, config.freq_w,
                                 config.freq_h);
  } else {
    out.pre_sigmoid = out.head;
  }
  out.image = graph.sigmoid(out.pre_sigmoid);
  return out;
}

template <typename T>
Tensor<T> forward_network(const Params<T>& params, const NetworkConfig& config,
                          const InputField& field) {
  Graph<T> graph;
  const ParamNodes nodes = add_params(graph, params, false);
  const NodeId input = graph.constant(field.samples.cast<T>());
  const NodeId head = build_network(graph, nodes, input);
  if (config.head == Head::cppn) return graph.value(graph.sigmoid(head));
  return graph.value(head);
}

template <typename T>
Tensor<T> render_image(const Params<T>& params, const NetworkConfig& config,
                       const InputField& field, std::size_t band_rows) {
  band_rows = std::max<std::size_t>(1, band_rows);
  Tensor<T> out(Shape{field.height, field.width, 3});
  for (std::size_t r0 = 0; r0 < field.height; r0 += band_rows) {
    const std::size_t r1 = std::min(field.height, r0 + band_rows);
    const InputField band = field.rows(r0, r1);
    Graph<T> graph;
    const ParamNodes nodes = add_params(graph, params, false);
    const ImageNodes img = build_image(graph, config, nodes, band);
    const Tensor<T>& v = graph.value(img.image);
    std::copy(v.values().begin(), v.values().end(),
              out.values().begin() + static_cast<long>(r0 * field.width * 3));
  }
  return out;
}

#define FCPPN_INSTANTIATE(T)                                                  \
  template struct Params<T>;                                                  \
  template NodeId activation_phi<T>(Graph<T>&, NodeId);                       \
  template ParamNodes add_params<T>(Graph<T>&, const Params<T>&, bool);       \
  template NodeId build_network<T>(Graph<T>&, const ParamNodes&, NodeId);     \
  template ImageNodes build_image<T>(Graph<T>&, const NetworkConfig&,         \
                                     const ParamNodes&, const InputField&);   \
  template Tensor<T> forward_network<T>(const Params<T>&,                     \
                                        const NetworkConfig&,                 \
                                        const InputField&);                   \
  template Tensor<T> render_image<T>(const Params<T>&, const NetworkConfig&,  \
                                     const InputField&, std::size_t);

FCPPN_INSTANTIATE(float)
FCPPN_INSTANTIATE(double)

}  // namespace fcppn
