// fcppn: fit CPPN / Fourier-CPPN image parameterisations with L-BFGS.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 I/O or parse
// error, 3 optimisation could not start (or a gradient check failed).

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fcppn/checkpoint.hpp"
#include "fcppn/error.hpp"
#include "fcppn/grad_suite.hpp"
#include "fcppn/tasks.hpp"

namespace {

using namespace fcppn;

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kOptimization = 3 };

struct Flags {
  std::vector<std::string> targets;
  std::optional<std::string> config;
  std::optional<std::string> param;
  std::optional<std::string> freqs;
  std::optional<std::size_t> depth;
  std::optional<std::size_t> filters;
  std::optional<std::size_t> z_dim;
  std::optional<std::string> init;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> extractor;
  std::optional<std::string> pool;
  std::optional<std::string> loss;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> history;
  std::optional<std::string> out;
  std::optional<std::size_t> frames;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> width;
  std::optional<std::size_t> height;
  std::vector<double> z;
};

void add_network_flags(CLI::App* app, Flags& f) {
  app->add_option("--param", f.param, "Head parameterisation")
      ->check(CLI::IsMember({"cppn", "fcppn"}));
  app->add_option("--freqs", f.freqs, "Fourier grid WxH (F-CPPN)");
  app->add_option("--depth", f.depth, "Hidden layers");
  app->add_option("--filters", f.filters, "Channels per hidden layer");
  app->add_option("--z-dim", f.z_dim, "Conditioning vector length");
  app->add_option("--init", f.init, "Weight init rule")
      ->check(CLI::IsMember({"fan_in_std", "literal_variance"}));
  app->add_option("--seed", f.seed, "Run seed");
}

void add_training_flags(CLI::App* app, Flags& f) {
  app->add_option("--target", f.targets, "Target PNG (repeatable)");
  app->add_option("--config", f.config, "JSON run config; flags override it");
  add_network_flags(app, f);
  app->add_option("--extractor", f.extractor,
                  "pixel | pyramid:SEED | container:PATH");
  app->add_option("--pool", f.pool, "Pooling override for loaded extractors")
      ->check(CLI::IsMember({"max", "avg"}));
  app->add_option("--loss", f.loss, "content | style")
      ->check(CLI::IsMember({"content", "style"}));
  app->add_option("--iters", f.iters, "L-BFGS iterations");
  app->add_option("--history", f.history, "L-BFGS history size");
  app->add_option("--out", f.out, "Output directory");
}

RunConfig make_config(Task task, const Flags& f) {
  RunConfig base;
  base.task = task;
  RunConfig c = f.config ? RunConfig::from_file(*f.config, base) : base;
  if (c.task != task) {
    throw ConfigError("config file is for task '" + to_string(c.task) +
                      "', not '" + to_string(task) + "'");
  }
  if (!f.targets.empty()) c.targets = f.targets;
  if (f.param) c.network.head = parse_head(*f.param);
  if (f.freqs) {
    const auto [w, h] = parse_extent(*f.freqs);
    c.network.freq_w = w;
    c.network.freq_h = h;
  }
  if (f.depth) c.network.depth = *f.depth;
  if (f.filters) c.network.filters = *f.filters;
  if (f.z_dim) c.network.z_dim = *f.z_dim;
  if (f.init) c.network.init = parse_init_rule(*f.init);
  if (f.seed) c.network.seed = *f.seed;
  if (f.extractor) c.extractor = *f.extractor;
  if (f.pool) c.pool = parse_pool_mode(*f.pool);
  if (f.loss) c.loss = parse_loss(*f.loss);
  if (f.iters) c.iterations = *f.iters;
  if (f.history) c.history = *f.history;
  if (f.out) c.out_dir = *f.out;
  if (f.frames) c.frames = *f.frames;
  if (f.checkpoint) c.checkpoint = *f.checkpoint;
  if (f.width) c.width = *f.width;
  if (f.height) c.height = *f.height;
  if (!f.z.empty()) c.z = f.z;
  if (task == Task::interpolate && c.network.z_dim == 0) c.network.z_dim = 2;
  return c;
}

// Network flags given to `render` must agree with the checkpoint.
void check_render_flags(const Flags& f, const NetworkConfig& net) {
  const auto conflict = [](const std::string& flag, const std::string& given,
                           const std::string& stored) {
    throw ConfigError("--" + flag + " " + given +
                      " conflicts with the checkpoint (" + stored + ")");
  };
  if (f.param && parse_head(*f.param) != net.head) {
    conflict("param", *f.param, to_string(net.head));
  }
  if (f.freqs) {
    const auto [w, h] = parse_extent(*f.freqs);
    if (w != net.freq_w || h != net.freq_h) {
      conflict("freqs", *f.freqs,
               std::to_string(net.freq_w) + "x" + std::to_string(net.freq_h));
    }
  }
  const auto check = [&](const char* flag, const auto& given, auto stored) {
    if (given && *given != stored) {
      conflict(flag, std::to_string(*given), std::to_string(stored));
    }
  };
  check("depth", f.depth, net.depth);
  check("filters", f.filters, net.filters);
  check("z-dim", f.z_dim, net.z_dim);
  check("seed", f.seed, net.seed);
  if (f.init && parse_init_rule(*f.init) != net.init) {
    conflict("init", *f.init, to_string(net.init));
  }
}

void report(const RunConfig& c, const RunOutputs& out) {
  const MinimizeResult& r = out.optimization;
  std::printf("%s: %zu iterations, %zu evaluations, loss %.6g (%s)\n",
              to_string(c.task).c_str(), r.trace.empty() ? 0 : r.trace.size() - 1,
              r.evaluations, r.loss, to_string(r.reason).c_str());
  std::printf("wrote %s\n", c.out_dir.c_str());
}

int run_gradcheck(std::uint64_t seed, std::size_t trials) {
  bool ok = true;
  for (const GradSuiteEntry& e : gradient_suite(seed, trials)) {
    const GradCheckReport& r = e.report;
    std::printf("%-20s max_rel_err %.3e  checked %zu  excluded %zu  %s\n",
                e.name.c_str(), r.max_relative_error, r.checked, r.excluded,
                r.passed ? "ok" : "FAILED");
    ok = ok && r.passed;
  }
  return ok ? kOk : kOptimization;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit coordinate-network image parameterisations"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* reconstruct = app.add_subcommand(
      "reconstruct", "Fit a target under the content loss");
  add_training_flags(reconstruct, f);
  CLI::App* texture = app.add_subcommand(
      "texture", "Synthesise a texture under the Gram (style) loss");
  add_training_flags(texture, f);
  CLI::App* interpolate = app.add_subcommand(
      "interpolate", "Fit two targets with z=(1,0), z=(0,1) and emit frames");
  add_training_flags(interpolate, f);
  interpolate->add_option("--frames", f.frames, "Frames to emit");

  CLI::App* render = app.add_subcommand("render", "Render a checkpoint");
  render->add_option("--checkpoint", f.checkpoint, "checkpoint.fcwt")
      ->required();
  render->add_option("--width", f.width, "Output width")->required();
  render->add_option("--height", f.height, "Output height")->required();
  render->add_option("--z", f.z, "Conditioning vector");
  render->add_option("--out", f.out, "Output directory");
  add_network_flags(render, f);

  std::uint64_t grad_seed = 0;
  std::size_t grad_trials = 3;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  gradcheck->add_option("--seed", grad_seed, "Input seed");
  gradcheck->add_option("--trials", grad_trials, "Random draws per op");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (gradcheck->parsed()) return run_gradcheck(grad_seed, grad_trials);
    if (render->parsed()) {
      RunConfig c = make_config(Task::render, f);
      check_render_flags(f, load_checkpoint(c.checkpoint).network());
      run_render(c);
      std::printf("wrote %s/final.png\n", c.out_dir.c_str());
      return kOk;
    }
    const Task task = reconstruct->parsed() ? Task::reconstruct
                      : texture->parsed()   ? Task::texture
                                            : Task::interpolate;
    const RunConfig c = make_config(task, f);
    const RunOutputs out = task == Task::reconstruct ? run_reconstruct(c)
                           : task == Task::texture   ? run_texture(c)
                                                     : run_interpolate(c);
    report(c, out);
    return kOk;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const OptimizationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOptimization;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
