#include "fcppn/run_config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <tuple>

namespace fcppn {

using nlohmann::json;

std::string to_string(Task task) {
  switch (task) {
    case Task::reconstruct: return "reconstruct";
    case Task::texture: return "texture";
    case Task::interpolate: return "interpolate";
    case Task::render: return "render";
  }
  return "unknown";
}

Task parse_task(const std::string& s) {
  if (s == "reconstruct") return Task::reconstruct;
  if (s == "texture") return Task::texture;
  if (s == "interpolate") return Task::interpolate;
  if (s == "render") return Task::render;
  throw ConfigError("unknown task '" + s + "'");
}

std::string to_string(LossKind loss) {
  return loss == LossKind::content ? "content" : "style";
}

LossKind parse_loss(const std::string& s) {
  if (s == "content") return LossKind::content;
  if (s == "style") return LossKind::style;
  throw ConfigError("unknown loss '" + s + "' (expected content or style)");
}

std::pair<std::size_t, std::size_t> parse_extent(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used_w = 0;
    std::size_t used_h = 0;
    const std::string ws = s.substr(0, x);
    const std::string hs = s.substr(x + 1);
    const auto w = std::stoul(ws, &used_w);
    const auto h = std::stoul(hs, &used_h);
    if (used_w != ws.size() || used_h != hs.size() || ws[0] == '-' ||
        hs[0] == '-' || w == 0 || h == 0) {
      throw std::invalid_argument(s);
    }
    return {w, h};
  } catch (const std::logic_error&) {
    throw ConfigError("expected WxH, got '" + s + "'");
  }
}

LossKind RunConfig::effective_loss() const {
  if (loss) return *loss;
  return task == Task::reconstruct ? LossKind::content : LossKind::style;
}

void RunConfig::validate() const {
  network.validate();
  const std::size_t needed = task == Task::interpolate ? 2
                             : task == Task::render    ? 0
                                                       : 1;
  if (targets.size() != needed) {
    throw ConfigError(to_string(task) + " needs exactly " +
                      std::to_string(needed) + " target(s), got " +
                      std::to_string(targets.size()));
  }
  if (task == Task::render) {
    if (checkpoint.empty()) throw ConfigError("render needs --checkpoint");
    if (width == 0 || height == 0) {
      throw ConfigError("render needs --width and --height >= 1");
    }
  }
  if (task == Task::interpolate) {
    if (network.z_dim != 2) {
      throw ConfigError("interpolate conditions on a 2-d z; got z_dim " +
                        std::to_string(network.z_dim));
    }
    if (frames < 1) throw ConfigError("--frames must be >= 1");
  }
  if (history < 1) throw ConfigError("history must be >= 1");
}

std::string RunConfig::to_json() const {
  json j;
  j["task"] = to_string(task);
  j["targets"] = targets;
  j["param"] = to_string(network.head);
  j["freqs"] = std::to_string(network.freq_w) + "x" +
               std::to_string(network.freq_h);
  j["depth"] = network.depth;
  j["filters"] = network.filters;
  j["z_dim"] = network.z_dim;
  j["init"] = to_string(network.init);
  j["seed"] = network.seed;
  j["extractor"] = extractor;
  j["pool"] = pool ? json(to_string(*pool)) : json(nullptr);
  j["loss"] = loss ? json(to_string(*loss)) : json(nullptr);
  j["iters"] = iterations;
  j["history"] = history;
  j["out"] = out_dir;
  j["frames"] = frames;
  j["checkpoint"] = checkpoint;
  j["width"] = width;
  j["height"] = height;
  j["z"] = z;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text, RunConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(),
                     e.byte);
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  static const char* const kKnown[] = {
      "task",  "targets", "param",   "freqs",      "depth",  "filters",
      "z_dim", "init",    "seed",    "extractor",  "pool",   "loss",
      "iters", "history", "out",     "frames",     "checkpoint", "width",
      "height", "z"};
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || item.key() == k;
    if (!known) throw ConfigError("unknown config key '" + item.key() + "'");
  }

  RunConfig c = std::move(base);
  try {
    if (j.contains("task")) c.task = parse_task(j["task"].get<std::string>());
    if (j.contains("targets")) {
      c.targets = j["targets"].get<std::vector<std::string>>();
    }
    if (j.contains("param")) {
      c.network.head = parse_head(j["param"].get<std::string>());
    }
    if (j.contains("freqs")) {
      std::tie(c.network.freq_w, c.network.freq_h) =
          parse_extent(j["freqs"].get<std::string>());
    }
    if (j.contains("depth")) c.network.depth = j["depth"].get<std::size_t>();
    if (j.contains("filters")) {
      c.network.filters = j["filters"].get<std::size_t>();
    }
    if (j.contains("z_dim")) c.network.z_dim = j["z_dim"].get<std::size_t>();
    if (j.contains("init")) {
      c.network.init = parse_init_rule(j["init"].get<std::string>());
    }
    if (j.contains("seed")) c.network.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("extractor")) {
      c.extractor = j["extractor"].get<std::string>();
    }
    if (j.contains("pool")) {
      c.pool = j["pool"].is_null()
                   ? std::nullopt
                   : std::optional(parse_pool_mode(j["pool"].get<std::string>()));
    }
    if (j.contains("loss")) {
      c.loss = j["loss"].is_null()
                   ? std::nullopt
                   : std::optional(parse_loss(j["loss"].get<std::string>()));
    }
    if (j.contains("iters")) c.iterations = j["iters"].get<std::size_t>();
    if (j.contains("history")) c.history = j["history"].get<std::size_t>();
    if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    if (j.contains("frames")) c.frames = j["frames"].get<std::size_t>();
    if (j.contains("checkpoint")) {
      c.checkpoint = j["checkpoint"].get<std::string>();
    }
    if (j.contains("width")) c.width = j["width"].get<std::size_t>();
    if (j.contains("height")) c.height = j["height"].get<std::size_t>();
    if (j.contains("z")) c.z = j["z"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path,
                               RunConfig base) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_json(ss.str(), std::move(base));
}

RunConfig RunConfig::from_json(const std::string& text) {
  return from_json(text, RunConfig{});
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  return from_file(path, RunConfig{});
}

}  // namespace fcppn
