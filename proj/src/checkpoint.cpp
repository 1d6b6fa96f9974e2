#include "fcppn/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "fcppn/container.hpp"

namespace fcppn {

using nlohmann::json;

namespace {

std::string weight_name(std::size_t l) {
  return "layer" + std::to_string(l) + ".weight";
}
std::string bias_name(std::size_t l) {
  return "layer" + std::to_string(l) + ".bias";
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& checkpoint) {
  Container c;
  for (std::size_t l = 0; l < checkpoint.params.layers.size(); ++l) {
    c.tensors.push_back({weight_name(l), checkpoint.params.layers[l].weights});
    c.tensors.push_back({bias_name(l), checkpoint.params.layers[l].bias});
  }
  const NetworkConfig& net = checkpoint.network();
  json header;
  header["format"] = "fcppn-checkpoint";
  header["version"] = kCheckpointVersion;
  header["base_width"] = checkpoint.base_width;
  header["base_height"] = checkpoint.base_height;
  header["network"] = {
      {"depth", net.depth},     {"filters", net.filters},
      {"head", to_string(net.head)}, {"freq_w", net.freq_w},
      {"freq_h", net.freq_h},   {"z_dim", net.z_dim},
      {"seed", net.seed},       {"init", to_string(net.init)}};
  header["config"] = json::parse(checkpoint.config.to_json());
  c.header = header.dump(2);
  write_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = read_container(path);
  // Header and tensor-table problems are reported at the header's offset.
  const std::size_t at = std::filesystem::file_size(path) - c.header.size();
  Checkpoint cp;
  try {
    const json header = json::parse(c.header);
    if (header.value("format", "") != "fcppn-checkpoint") {
      throw ParseError(path.string() + " is not a checkpoint", at);
    }
    const int version = header.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ParseError("checkpoint version " + std::to_string(version) +
                           " is not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")",
                       at);
    }
    cp.config = RunConfig::from_json(header.at("config").dump());
    const json& n = header.at("network");
    NetworkConfig& net = cp.config.network;
    net.depth = n.at("depth").get<std::size_t>();
    net.filters = n.at("filters").get<std::size_t>();
    net.head = parse_head(n.at("head").get<std::string>());
    net.freq_w = n.at("freq_w").get<std::size_t>();
    net.freq_h = n.at("freq_h").get<std::size_t>();
    net.z_dim = n.at("z_dim").get<std::size_t>();
    net.seed = n.at("seed").get<std::uint64_t>();
    net.init = parse_init_rule(n.at("init").get<std::string>());
    cp.base_width = header.at("base_width").get<std::size_t>();
    cp.base_height = header.at("base_height").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError("malformed checkpoint header in " + path.string() +
                         ": " + e.what(),
                     at);
  }
  cp.config.network.validate();

  // Shapes must match what init_params would produce for this network.
  const Params<float> expected = init_params(cp.config.network);
  if (c.tensors.size() != 2 * expected.layers.size()) {
    throw ParseError("checkpoint holds " + std::to_string(c.tensors.size()) +
                         " tensors, network needs " +
                         std::to_string(2 * expected.layers.size()),
                     at);
  }
  for (std::size_t l = 0; l < expected.layers.size(); ++l) {
    const ContainerTensor* w = c.find(weight_name(l));
    const ContainerTensor* b = c.find(bias_name(l));
    if (!w || !b) {
      throw ParseError("checkpoint is missing layer " + std::to_string(l), at);
    }
    if (w->value.shape() != expected.layers[l].weights.shape() ||
        b->value.shape() != expected.layers[l].bias.shape()) {
      throw ParseError("checkpoint layer " + std::to_string(l) +
                           " has shape " + to_string(w->value.shape()) +
                           ", network expects " +
                           to_string(expected.layers[l].weights.shape()),
                       at);
    }
    cp.params.layers.push_back({w->value, b->value});
  }
  return cp;
}

}  // namespace fcppn
