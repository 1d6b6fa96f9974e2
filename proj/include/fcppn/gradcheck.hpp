#pragma once

#include <cstddef>
#include <cstdint>

#include "fcppn/graph.hpp"

namespace fcppn {

struct GradCheckOptions {
  double tolerance = 1e-4;
  // Central-difference step is relative_step * max(1, |x|).
  double relative_step = 1e-5;
  // Denominator floor for the relative error, so near-zero gradients are
  // compared absolutely.
  double error_floor = 1e-6;
  // A sample whose one-sided differences disagree by more than this
  // (relative) straddles a kink (relu at 0, maxpool tie) and is excluded.
  double kink_threshold = 1e-2;
  // 0 checks every element; otherwise a seeded random subset of this size.
  std::size_t max_samples = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

// Compares the analytic gradient of `loss` w.r.t. the trainable `leaf`
// against central finite differences. 64-bit only. The leaf is restored
// before returning; non-finite values propagate as NonFiniteError.
GradCheckReport gradient_check(Graph<double>& graph, NodeId loss, NodeId leaf,
                               const GradCheckOptions& options = {});

}  // namespace fcppn
