#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcppn/container.hpp"
#include "fcppn/graph.hpp"
#include "fcppn/tensor.hpp"

namespace fcppn {

enum class PoolMode { max, avg };

std::string to_string(PoolMode mode);
PoolMode parse_pool_mode(const std::string& s);

// Input conditioning for loaded extractors: out[j] = scale * in[order[j]]
// - mean[j]. Runs as a fixed conv1x1 ahead of the layer program.
struct Preprocess {
  double scale = 1.0;
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<std::size_t, 3> channel_order{0, 1, 2};
};

struct ExtractorStep {
  enum class Op { conv3x3, relu, pool };
  std::string name;
  Op op = Op::relu;
  Tensor<float> weights;  // conv3x3 only: [3,3,Cin,Cout]
  Tensor<float> bias;     // conv3x3 only: [Cout]
};

// Maps an RGB image to a stack of feature maps ("taps").
//
//   pixel    the image itself is the only tap
//   pyramid  three random 3x3 conv levels (3->16->32->64), each conv->relu,
//            tapped after the relu, with avgpool2x2 between levels; weights
//            drawn from N(0, 2/(9*Cin)) with stream derive_seed(seed, level)
//   loaded   layer program and preprocessing read from an FCWT container
class Extractor {
 public:
  enum class Kind { pixel, pyramid, loaded };

  static Extractor pixel();
  static Extractor pyramid(std::uint64_t seed);
  // Validates the header's layer program against the stored tensors.
  static Extractor from_container(const Container& container,
                                  std::optional<PoolMode> pool_override = {});

  Kind kind() const { return kind_; }
  const std::vector<ExtractorStep>& steps() const { return steps_; }
  const std::vector<std::string>& taps() const { return taps_; }
  PoolMode pool_mode() const { return pool_; }
  const Preprocess& preprocess() const { return preprocess_; }

  // Appends the extractor to `graph`, returning one node per tap in tap
  // order.
  template <typename T>
  std::vector<NodeId> extract(Graph<T>& graph, NodeId image) const;

 private:
  Kind kind_ = Kind::pixel;
  std::vector<ExtractorStep> steps_;
  std::vector<std::string> taps_;
  PoolMode pool_ = PoolMode::max;
  Preprocess preprocess_;
};

Extractor load_container(const std::filesystem::path& path,
                         std::optional<PoolMode> pool_override = {});

// Parses "pixel", "pyramid:SEED" or "container:PATH".
Extractor make_extractor(const std::string& spec,
                         std::optional<PoolMode> pool_override = {});

template <typename T>
using FeatureStack = std::vector<Tensor<T>>;
template <typename T>
using GramSet = std::vector<Tensor<T>>;

// Graph builders. The losses return scalar nodes.
template <typename T>
NodeId gram(Graph<T>& graph, NodeId activations);
template <typename T>
NodeId content_loss(Graph<T>& graph, std::span<const NodeId> a,
                    std::span<const NodeId> b);
template <typename T>
NodeId style_loss(Graph<T>& graph, std::span<const NodeId> a,
                  std::span<const NodeId> b);

// Value-level versions.
template <typename T>
FeatureStack<T> extract(const Extractor& extractor, const Tensor<T>& image);
template <typename T>
GramSet<T> gram(const FeatureStack<T>& stack);
template <typename T>
T content_loss(const FeatureStack<T>& a, const FeatureStack<T>& b);
template <typename T>
T style_loss(const GramSet<T>& a, const GramSet<T>& b);

}  // namespace fcppn
