#include "fcppn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fcppn/rng.hpp"

namespace fcppn {

namespace {

std::vector<std::size_t> pick_indices(std::size_t n, std::size_t max_samples,
                                      std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_samples == 0 || max_samples >= n) return idx;
  // Partial Fisher-Yates.
  Xoshiro256 rng(seed);
  for (std::size_t i = 0; i < max_samples; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max_samples);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport gradient_check(Graph<double>& graph, NodeId loss, NodeId leaf,
                               const GradCheckOptions& options) {
  if (!graph.is_trainable(leaf)) {
    throw Error("gradient_check: node " + std::to_string(leaf) +
                " is not a trainable leaf");
  }
  const double f0 = graph.forward(loss).item();
  graph.backward(loss);
  const Tensor<double> analytic = graph.gradient(leaf);

  GradCheckReport report;
  std::span<double> x = graph.leaf_data(leaf);
  const auto eval_at = [&](std::size_t i, double v) {
    x[i] = v;
    return graph.forward(loss).item();
  };

  for (std::size_t i :
       pick_indices(x.size(), options.max_samples, options.seed)) {
    const double orig = x[i];
    const double h = options.relative_step * std::max(1.0, std::abs(orig));
    const double fp = eval_at(i, orig + h);
    const double fm = eval_at(i, orig - h);
    x[i] = orig;

    const double fwd = (fp - f0) / h;
    const double bwd = (f0 - fm) / h;
    const double kink_scale =
        std::max({std::abs(fwd), std::abs(bwd), options.error_floor});
    if (std::abs(fwd - bwd) > options.kink_threshold * kink_scale) {
      ++report.excluded;
      continue;
    }

    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double denom =
        std::max({std::abs(a), std::abs(numeric), options.error_floor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.checked;
    if (rel >= report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  graph.forward(loss);
  report.passed = report.checked > 0 &&
                  report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace fcppn
