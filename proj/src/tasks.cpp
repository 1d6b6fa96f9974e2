#include "fcppn/tasks.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>

#include "fcppn/image_io.hpp"

namespace fcppn {

namespace {

// The differentiable graph for a TrainingProblem, built once and
// re-evaluated for every objective call.
class TrainingGraph {
 public:
  TrainingGraph(const TrainingProblem& problem, const Params<float>& initial) {
    if (problem.targets.empty()) throw ConfigError("no training targets");
    if (problem.z.size() != problem.targets.size()) {
      throw ConfigError("need one z vector per target");
    }
    const Shape& shape = problem.targets.front().shape();
    if (shape.size() != 3 || shape[2] != 3) {
      throw ShapeError("targets must be [H,W,3], got " + to_string(shape));
    }
    const std::size_t h = shape[0];
    const std::size_t w = shape[1];

    nodes_ = add_params(graph_, initial, true);
    for (std::size_t l = 0; l < nodes_.weights.size(); ++l) {
      leaves_.push_back(nodes_.weights[l]);
      leaves_.push_back(nodes_.biases[l]);
    }

    std::vector<NodeId> per_target;
    for (std::size_t t = 0; t < problem.targets.size(); ++t) {
      const Tensor<float>& target = problem.targets[t];
      if (target.shape() != shape) {
        throw ShapeError("all targets must share one shape; target " +
                         std::to_string(t) + " is " +
                         to_string(target.shape()));
      }
      if (problem.z[t].size() != problem.network.z_dim) {
        throw ConfigError("z for target " + std::to_string(t) + " has " +
                          std::to_string(problem.z[t].size()) +
                          " entries, network expects " +
                          std::to_string(problem.network.z_dim));
      }
      const InputField field = make_grid(w, h, problem.z[t]);
      const ImageNodes img =
          build_image(graph_, problem.network, nodes_, field);
      images_.push_back(img.image);

      const std::vector<NodeId> taps =
          problem.extractor.extract(graph_, img.image);
      const FeatureStack<float> target_feats =
          extract(problem.extractor, target);
      std::vector<NodeId> ours;
      std::vector<NodeId> theirs;
      if (problem.loss == LossKind::content) {
        ours = taps;
        for (const auto& f : target_feats) theirs.push_back(graph_.constant(f));
        per_target.push_back(content_loss(graph_, std::span(ours),
                                          std::span(theirs)));
      } else {
        for (NodeId tap : taps) ours.push_back(gram(graph_, tap));
        for (const auto& g : gram(target_feats)) {
          theirs.push_back(graph_.constant(g));
        }
        per_target.push_back(style_loss(graph_, std::span(ours),
                                        std::span(theirs)));
      }
    }
    loss_ = per_target.front();
    for (std::size_t t = 1; t < per_target.size(); ++t) {
      loss_ = graph_.add(loss_, per_target[t]);
    }
  }

  double evaluate(std::span<const double> x, std::span<double> grad) {
    load(x);
    const double loss = graph_.forward(loss_).item();
    graph_.backward(loss_);
    std::size_t k = 0;
    for (NodeId leaf : leaves_) {
      for (float g : graph_.gradient(leaf).values()) grad[k++] = g;
    }
    return loss;
  }

  double loss_at(std::span<const double> x) {
    load(x);
    return graph_.forward(loss_).item();
  }

  std::vector<Tensor<float>> renders() const {
    std::vector<Tensor<float>> out;
    for (NodeId id : images_) out.push_back(graph_.value(id));
    return out;
  }

 private:
  void load(std::span<const double> x) {
    std::size_t k = 0;
    for (NodeId leaf : leaves_) {
      for (float& v : graph_.leaf_data(leaf)) v = static_cast<float>(x[k++]);
    }
  }

  Graph<float> graph_;
  ParamNodes nodes_;
  std::vector<NodeId> leaves_;
  std::vector<NodeId> images_;
  NodeId loss_ = 0;
};

Tensor<float> load_target(const std::string& path) {
  Tensor<float> img = read_png(path);
  if (img.dim(0) < 16 || img.dim(1) < 16) {
    throw ConfigError("target " + path + " is " + std::to_string(img.dim(1)) +
                      "x" + std::to_string(img.dim(0)) +
                      "; at least 16x16 is required");
  }
  return img;
}

TrainingProblem problem_from(const RunConfig& config,
                             std::vector<Tensor<float>> targets,
                             std::vector<std::vector<double>> z) {
  TrainingProblem p;
  p.network = config.network;
  p.targets = std::move(targets);
  p.z = std::move(z);
  p.extractor = make_extractor(config.extractor, config.pool);
  p.loss = config.effective_loss();
  p.optimizer.max_iters = config.iterations;
  p.optimizer.history = config.history;
  return p;
}

void write_outputs(const RunConfig& config, const RunOutputs& out) {
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  write_png(dir / "final.png", out.image);
  save_checkpoint(dir / "checkpoint.fcwt", out.checkpoint);
  write_loss_csv(dir / "loss.csv", out.optimization.trace);
  if (!out.frames.empty()) {
    std::filesystem::create_directories(dir / "frames");
    for (std::size_t k = 0; k < out.frames.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "%04zu.png", k);
      write_png(dir / "frames" / name, out.frames[k]);
    }
  }
}

RunOutputs run_single(const RunConfig& config) {
  config.validate();
  std::vector<Tensor<float>> targets{load_target(config.targets.at(0))};
  const std::size_t h = targets[0].dim(0);
  const std::size_t w = targets[0].dim(1);
  std::vector<std::vector<double>> z{
      config.network.z_dim ? std::vector<double>(config.network.z_dim, 0.0)
                           : std::vector<double>{}};
  if (config.network.z_dim) z[0][0] = 1.0;
  TrainingResult r = train(problem_from(config, std::move(targets), z));

  RunOutputs out;
  out.checkpoint = {config, w, h, std::move(r.params)};
  out.image = std::move(r.renders.front());
  out.optimization = std::move(r.optimization);
  write_outputs(config, out);
  return out;
}

}  // namespace

TrainingResult train(const TrainingProblem& problem) {
  return train_from(problem, init_params(problem.network));
}

TrainingResult train_from(const TrainingProblem& problem,
                          Params<float> initial) {
  // Building the graph already evaluates it once at the starting point.
  std::optional<TrainingGraph> built;
  try {
    built.emplace(problem, initial);
  } catch (const NonFiniteError& e) {
    throw OptimizationError(
        std::string("objective is non-finite at the starting point: ") +
        e.what());
  }
  TrainingGraph& graph = *built;
  const Objective objective = [&graph](std::span<const double> x,
                                       std::span<double> grad) {
    try {
      return graph.evaluate(x, grad);
    } catch (const NonFiniteError&) {
      // Reported as an unusable point; the line search backs off.
      return std::numeric_limits<double>::infinity();
    }
  };

  TrainingResult result;
  result.optimization = minimize(objective, initial.flatten(), problem.optimizer);
  result.params = std::move(initial);
  result.params.assign(result.optimization.x);
  graph.loss_at(result.optimization.x);
  result.renders = graph.renders();
  return result;
}

double evaluate_loss(const TrainingProblem& problem,
                     const Params<float>& params) {
  TrainingGraph graph(problem, params);
  return graph.loss_at(params.flatten());
}

std::vector<double> interpolation_z(std::size_t k, std::size_t frames) {
  if (frames < 2 || k == 0) return {1.0, 0.0};
  if (k + 1 >= frames) return {0.0, 1.0};
  const double theta = 0.5 * std::numbers::pi * static_cast<double>(k) /
                       static_cast<double>(frames - 1);
  return {std::cos(theta), std::sin(theta)};
}

Tensor<float> render(const Params<float>& params, const NetworkConfig& network,
                     std::size_t width, std::size_t height,
                     std::size_t base_width, std::size_t base_height,
                     const std::vector<double>& z) {
  if (z.size() != network.z_dim) {
    throw ConfigError("render: z has " + std::to_string(z.size()) +
                      " entries, network expects " +
                      std::to_string(network.z_dim));
  }
  const InputField field = make_grid(width, height, z, base_width, base_height);
  return render_image(params, network, field);
}

RunOutputs run_reconstruct(const RunConfig& config) {
  if (config.task != Task::reconstruct) {
    throw ConfigError("run_reconstruct called with task " +
                      to_string(config.task));
  }
  return run_single(config);
}

RunOutputs run_texture(const RunConfig& config) {
  if (config.task != Task::texture) {
    throw ConfigError("run_texture called with task " + to_string(config.task));
  }
  return run_single(config);
}

RunOutputs run_interpolate(const RunConfig& in) {
  RunConfig config = in;
  if (config.network.z_dim == 0) config.network.z_dim = 2;
  config.validate();
  std::vector<Tensor<float>> targets{load_target(config.targets[0]),
                                     load_target(config.targets[1])};
  if (targets[0].shape() != targets[1].shape()) {
    throw ConfigError("interpolate targets must have the same size");
  }
  const std::size_t h = targets[0].dim(0);
  const std::size_t w = targets[0].dim(1);
  TrainingResult r = train(problem_from(
      config, std::move(targets), {interpolation_z(0, 2), interpolation_z(1, 2)}));

  RunOutputs out;
  out.optimization = std::move(r.optimization);
  out.image = std::move(r.renders.front());
  for (std::size_t k = 0; k < config.frames; ++k) {
    out.frames.push_back(render(r.params, config.network, w, h, w, h,
                                interpolation_z(k, config.frames)));
  }
  out.checkpoint = {config, w, h, std::move(r.params)};
  write_outputs(config, out);
  return out;
}

Tensor<float> run_render(const RunConfig& config) {
  config.validate();
  const Checkpoint cp = load_checkpoint(config.checkpoint);
  std::vector<double> z = config.z;
  if (z.empty() && cp.network().z_dim > 0) {
    z.assign(cp.network().z_dim, 0.0);
    z[0] = 1.0;
  }
  Tensor<float> image = render(cp.params, cp.network(), config.width,
                               config.height, cp.base_width, cp.base_height, z);
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  write_png(dir / "final.png", image);
  return image;
}

void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<TraceEntry>& trace) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "iter,loss,grad_norm,step\n";
  char line[128];
  for (const TraceEntry& e : trace) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g\n", e.iter,
                  e.loss, e.grad_norm, e.step);
    os << line;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace fcppn
