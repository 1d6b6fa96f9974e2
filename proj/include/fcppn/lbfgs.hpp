#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fcppn/error.hpp"

namespace fcppn {

struct LbfgsOptions {
  std::size_t history = 20;
  std::size_t max_iters = 100;
  // Stop once the gradient's max-norm falls to this value.
  double grad_tolerance = 1e-10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  // Objective evaluations allowed per line search.
  std::size_t max_line_search_steps = 25;

  // Throws ConfigError unless 0 < c1 < c2 < 1, history >= 1 and
  // max_line_search_steps >= 1.
  void validate() const;
};

// Evaluates the objective at x, writes dLoss/dx into grad, returns the loss.
using Objective =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

struct TraceEntry {
  std::size_t iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // max-norm
  double step = 0.0;
};

enum class Termination { converged, max_iters, line_search_failed };

std::string to_string(Termination t);

struct MinimizeResult {
  std::vector<double> x;
  double loss = 0.0;
  // Entry 0 is the starting point (step 0); every later entry is one
  // accepted iteration.
  std::vector<TraceEntry> trace;
  Termination reason = Termination::max_iters;
  std::size_t evaluations = 0;
};

// Raised when the objective is non-finite at the starting point.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

// Ring buffer of (s, y) pairs for the two-loop recursion.
class LbfgsState {
 public:
  explicit LbfgsState(std::size_t history) : history_(history) {}

  // Stores the pair unless s.y <= 0, which would break positive
  // definiteness; returns whether it was kept.
  bool push(std::vector<double> s, std::vector<double> y);

  // -H*g with H the implicit inverse-Hessian estimate, scaled by
  // gamma = s.y / y.y of the newest pair (1 when empty). Falls back to -g
  // if the result is not a descent direction.
  std::vector<double> direction(std::span<const double> gradient) const;

  std::size_t size() const { return pairs_.size(); }
  void clear() { pairs_.clear(); }

 private:
  struct Pair {
    std::vector<double> s;
    std::vector<double> y;
    double rho;
  };
  std::size_t history_;
  std::deque<Pair> pairs_;
};

std::vector<double> two_loop_direction(const LbfgsState& state,
                                       std::span<const double> gradient);

struct LineSearchResult {
  enum class Status {
    wolfe,              // strong Wolfe conditions hold
    sufficient_decrease,  // only the c1 condition could be met
    failed,             // no decrease found within the budget
  };
  Status status = Status::failed;
  double step = 0.0;
  double loss = 0.0;
  std::vector<double> x;
  std::vector<double> grad;
  std::size_t evaluations = 0;
};

// Strong-Wolfe bracketing line search with safeguarded cubic interpolation.
// `loss` and `grad` are the objective at x. Throws std::invalid_argument if
// direction is not a descent direction.
LineSearchResult line_search(const Objective& objective,
                             std::span<const double> x, double loss,
                             std::span<const double> grad,
                             std::span<const double> direction,
                             const LbfgsOptions& options,
                             double initial_step = 1.0);

// Unbounded L-BFGS. Accepted losses never increase. A failed line search
// ends the run with the best iterate rather than throwing.
MinimizeResult minimize(const Objective& objective, std::vector<double> x0,
                        const LbfgsOptions& options);

}  // namespace fcppn
