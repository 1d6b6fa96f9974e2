#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

#include "fcppn/checkpoint.hpp"
#include "fcppn/coordnet.hpp"
#include "fcppn/lbfgs.hpp"
#include "fcppn/perceptual.hpp"
#include "fcppn/run_config.hpp"

namespace fcppn {

// One optimisation problem: fit a network so that each z-conditioned render
// matches its target under the chosen loss. Multiple targets are trained
// jointly; the objective is the plain sum of their losses.
struct TrainingProblem {
  NetworkConfig network;
  std::vector<Tensor<float>> targets;     // all the same [H,W,3]
  std::vector<std::vector<double>> z;     // one per target, |z| == z_dim
  Extractor extractor = Extractor::pixel();
  LossKind loss = LossKind::content;
  LbfgsOptions optimizer;
};

struct TrainingResult {
  Params<float> params;
  MinimizeResult optimization;
  std::vector<Tensor<float>> renders;  // final training render per target
};

TrainingResult train(const TrainingProblem& problem);

// Same as train() but starting from the given parameters.
TrainingResult train_from(const TrainingProblem& problem,
                          Params<float> initial);

// Loss of `params` on the problem, without optimising.
double evaluate_loss(const TrainingProblem& problem,
                     const Params<float>& params);

// z for frame k of K: (cos t, sin t) with t = (pi/2) k/(K-1). The two ends
// are exactly (1,0) and (0,1).
std::vector<double> interpolation_z(std::size_t k, std::size_t frames);

// Renders at (width, height) for a network trained at base resolution.
Tensor<float> render(const Params<float>& params, const NetworkConfig& network,
                     std::size_t width, std::size_t height,
                     std::size_t base_width, std::size_t base_height,
                     const std::vector<double>& z = {});

struct RunOutputs {
  Checkpoint checkpoint;
  Tensor<float> image;
  MinimizeResult optimization;
  std::vector<Tensor<float>> frames;
};

// CLI-level tasks. They read targets from disk and write, under
// config.out_dir: final.png, checkpoint.fcwt, loss.csv and (interpolate)
// frames/NNNN.png.
RunOutputs run_reconstruct(const RunConfig& config);
RunOutputs run_texture(const RunConfig& config);
RunOutputs run_interpolate(const RunConfig& config);
// Renders config.checkpoint at config.width x config.height to
// out_dir/final.png.
Tensor<float> run_render(const RunConfig& config);

// Writes the optimiser trace as "iter,loss,grad_norm,step".
void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<TraceEntry>& trace);

}  // namespace fcppn
