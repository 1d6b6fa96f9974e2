#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fcppn/fourier.hpp"
#include "fcppn/graph.hpp"
#include "fcppn/tensor.hpp"

namespace fcppn {

enum class Head { cppn, fcppn };

// How "variance = sqrt(1/C)" is read when drawing weights.
//   fan_in_std:       std = sqrt(1/C)   (variance 1/C, the default)
//   literal_variance: std = (1/C)^(1/4) (variance sqrt(1/C))
enum class InitRule { fan_in_std, literal_variance };

std::string to_string(Head head);
Head parse_head(const std::string& s);
std::string to_string(InitRule rule);
InitRule parse_init_rule(const std::string& s);

struct NetworkConfig {
  std::size_t depth = 8;
  std::size_t filters = 24;
  Head head = Head::fcppn;
  std::size_t freq_w = 10;
  std::size_t freq_h = 10;
  std::size_t z_dim = 0;
  std::uint64_t seed = 0;
  InitRule init = InitRule::fan_in_std;

  void validate() const;
  std::size_t input_channels() const { return 2 + z_dim; }
  std::size_t head_channels() const;
};

// Normalised sample coordinates in [-sqrt(3), +sqrt(3)] plus the constant
// conditioning vector z, and the matching Fourier phase positions.
struct InputField {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> z;
  Tensor<double> samples;  // [H, W, 2 + |z|]: (x_net, y_net, z...)
  PhaseCoords phase;

  InputField rows(std::size_t begin, std::size_t end) const;
};

// base_width/base_height default to the grid size (a training-resolution
// grid). Column i maps to (2i/(width-1) - 1) * sqrt(3); one-column grids
// get 0.
InputField make_grid(std::size_t width, std::size_t height,
                     std::vector<double> z = {}, std::size_t base_width = 0,
                     std::size_t base_height = 0);

template <typename T>
struct Layer {
  Tensor<T> weights;  // [Cin, Cout]
  Tensor<T> bias;     // [Cout]
};

// Hidden layers followed by the head layer (always the last entry).
template <typename T>
struct Params {
  std::vector<Layer<T>> layers;

  const Layer<T>& head() const { return layers.back(); }
  Layer<T>& head() { return layers.back(); }
  std::size_t count() const;

  template <typename U>
  Params<U> cast() const {
    Params<U> out;
    for (const auto& l : layers) {
      out.layers.push_back({l.weights.template cast<U>(),
                            l.bias.template cast<U>()});
    }
    return out;
  }

  // Flattened in layer order, weights before bias.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

// Draws weights from N(0, std^2) per InitRule, with layer l using the
// xoshiro256** stream derive_seed(seed, l); biases are zero.
Params<float> init_params(const NetworkConfig& config);

// phi(a) = concat(arctan(a)/0.67, arctan(a)^2/0.67), doubling channels.
template <typename T>
NodeId activation_phi(Graph<T>& graph, NodeId a);

struct ParamNodes {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
};

template <typename T>
ParamNodes add_params(Graph<T>& graph, const Params<T>& params,
                      bool trainable);

// (conv1x1 -> phi) x depth, then the head conv1x1 with no activation.
template <typename T>
NodeId build_network(Graph<T>& graph, const ParamNodes& params, NodeId input);

struct ImageNodes {
  NodeId head = 0;         // raw head output
  NodeId pre_sigmoid = 0;  // RGB before the final sigmoid
  NodeId image = 0;        // [H,W,3] in (0,1)
};

// Full image pipeline: network, then (F-CPPN only) localized IDFT, then
// sigmoid.
template <typename T>
ImageNodes build_image(Graph<T>& graph, const NetworkConfig& config,
                       const ParamNodes& params, const InputField& field);

// Network output for a whole field: RGB in (0,1) for the CPPN head, raw
// coefficients for the F-CPPN head.
template <typename T>
Tensor<T> forward_network(const Params<T>& params, const NetworkConfig& config,
                          const InputField& field);

// Final image, evaluated in bands of rows to bound memory. Pixels are
// independent, so banding does not change any value.
template <typename T>
Tensor<T> render_image(const Params<T>& params, const NetworkConfig& config,
                       const InputField& field, std::size_t band_rows = 64);

}  // namespace fcppn
