#include "fcppn/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fcppn {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double max_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

// Minimiser of the cubic through (a, fa, da) and (b, fb, db), clamped into
// the middle 80% of [a, b]. Falls back to bisection when the cubic is
// degenerate.
double cubic_step(double a, double fa, double da, double b, double fb,
                  double db) {
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double margin = 0.1 * (hi - lo);
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double t = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) {
      const double cand = b - (b - a) * (db + d2 - d1) / denom;
      if (std::isfinite(cand)) t = cand;
    }
  }
  return std::clamp(t, lo + margin, hi - margin);
}

struct Probe {
  double step;
  double loss;
  double slope;
  std::vector<double> x;
  std::vector<double> grad;
};

}  // namespace

std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iters: return "max_iters";
    case Termination::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

void LbfgsOptions::validate() const {
  if (history < 1) throw ConfigError("L-BFGS history must be >= 1");
  if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
    throw ConfigError("Wolfe constants must satisfy 0 < c1 < c2 < 1");
  }
  if (max_line_search_steps < 1) {
    throw ConfigError("max_line_search_steps must be >= 1");
  }
  if (!(grad_tolerance >= 0.0)) {
    throw ConfigError("grad_tolerance must be >= 0");
  }
}

bool LbfgsState::push(std::vector<double> s, std::vector<double> y) {
  const double sy = dot(s, y);
  if (!(sy > 0.0) || !std::isfinite(sy)) return false;
  if (pairs_.size() == history_) pairs_.pop_front();
  pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
  return true;
}

std::vector<double> LbfgsState::direction(
    std::span<const double> gradient) const {
  std::vector<double> q(gradient.begin(), gradient.end());
  std::vector<double> alpha(pairs_.size());
  for (std::size_t k = pairs_.size(); k-- > 0;) {
    const Pair& p = pairs_[k];
    alpha[k] = p.rho * dot(p.s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * p.y[i];
  }
  double gamma = 1.0;
  if (!pairs_.empty()) {
    const Pair& last = pairs_.back();
    gamma = dot(last.s, last.y) / dot(last.y, last.y);
  }
  for (double& v : q) v *= gamma;
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const Pair& p = pairs_[k];
    const double beta = p.rho * dot(p.y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += p.s[i] * (alpha[k] - beta);
  }
  for (double& v : q) v = -v;
  if (!(dot(q, gradient) < 0.0) || !all_finite(q)) {
    q.assign(gradient.begin(), gradient.end());
    for (double& v : q) v = -v;
  }
  return q;
}

std::vector<double> two_loop_direction(const LbfgsState& state,
                                       std::span<const double> gradient) {
  return state.direction(gradient);
}

LineSearchResult line_search(const Objective& objective,
                             std::span<const double> x, double loss,
                             std::span<const double> grad,
                             std::span<const double> direction,
                             const LbfgsOptions& options,
                             double initial_step) {
  const double slope0 = dot(grad, direction);
  if (!(slope0 < 0.0)) {
    throw std::invalid_argument(
        "line_search: direction is not a descent direction (g.d >= 0)");
  }
  const double c1 = options.wolfe_c1;
  const double c2 = options.wolfe_c2;
  const std::size_t n = x.size();

  LineSearchResult result;
  std::size_t evals = 0;
  bool have_best = false;

  const auto probe = [&](double step) {
    Probe p{step, 0.0, 0.0, std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) p.x[i] = x[i] + step * direction[i];
    p.loss = objective(p.x, p.grad);
    ++evals;
    p.slope = dot(p.grad, direction);
    if (!std::isfinite(p.loss) || !all_finite(p.grad)) {
      p.loss = std::numeric_limits<double>::infinity();
      p.slope = std::numeric_limits<double>::quiet_NaN();
    }
    return p;
  };
  const auto armijo = [&](const Probe& p) {
    return p.loss <= loss + c1 * p.step * slope0;
  };
  const auto curvature = [&](const Probe& p) {
    return std::abs(p.slope) <= -c2 * slope0;
  };
  const auto remember = [&](Probe& p) {
    if (armijo(p) && (!have_best || p.loss < result.loss)) {
      have_best = true;
      result.status = LineSearchResult::Status::sufficient_decrease;
      result.step = p.step;
      result.loss = p.loss;
      result.x = p.x;
      result.grad = p.grad;
    }
  };
  const auto accept = [&](Probe& p) {
    result.status = LineSearchResult::Status::wolfe;
    result.step = p.step;
    result.loss = p.loss;
    result.x = std::move(p.x);
    result.grad = std::move(p.grad);
    result.evaluations = evals;
    return result;
  };
  const auto give_up = [&]() {
    if (!have_best) result.status = LineSearchResult::Status::failed;
    result.evaluations = evals;
    return result;
  };

  // Zoom phase between a point satisfying sufficient decrease (lo) and one
  // that brackets a minimiser (hi).
  const auto zoom = [&](Probe lo, Probe hi) -> LineSearchResult {
    while (evals < options.max_line_search_steps) {
      if (!std::isfinite(hi.loss) || std::isnan(hi.slope)) {
        // Unusable upper end: bisect toward lo.
        Probe mid = probe(0.5 * (lo.step + hi.step));
        remember(mid);
        if (!armijo(mid) || mid.loss >= lo.loss) {
          hi = std::move(mid);
          continue;
        }
        if (curvature(mid)) return accept(mid);
        if (mid.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(mid);
        continue;
      }
      const double t =
          cubic_step(lo.step, lo.loss, lo.slope, hi.step, hi.loss, hi.slope);
      if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, lo.step)) break;
      Probe mid = probe(t);
      remember(mid);
      if (!armijo(mid) || mid.loss >= lo.loss) {
        hi = std::move(mid);
      } else {
        if (curvature(mid)) return accept(mid);
        if (mid.slope * (hi.step - lo.step) >= 0.0) hi = lo;
        lo = std::move(mid);
      }
    }
    return give_up();
  };

  Probe prev{0.0, loss, slope0, std::vector<double>(x.begin(), x.end()),
             std::vector<double>(grad.begin(), grad.end())};
  double step = initial_step;
  while (evals < options.max_line_search_steps) {
    Probe cur = probe(step);
    remember(cur);
    if (!armijo(cur) || (evals > 1 && cur.loss >= prev.loss)) {
      return zoom(std::move(prev), std::move(cur));
    }
    if (curvature(cur)) return accept(cur);
    if (cur.slope >= 0.0) return zoom(std::move(cur), std::move(prev));
    prev = std::move(cur);
    step *= 2.0;
  }
  return give_up();
}

MinimizeResult minimize(const Objective& objective, std::vector<double> x0,
                        const LbfgsOptions& options) {
  options.validate();
  MinimizeResult result;
  result.x = std::move(x0);
  if (!all_finite(result.x)) {
    throw OptimizationError("starting point contains non-finite values");
  }
  std::vector<double> grad(result.x.size());
  double loss = objective(result.x, grad);
  result.evaluations = 1;
  if (!std::isfinite(loss) || !all_finite(grad)) {
    throw OptimizationError("objective is non-finite at the starting point");
  }
  result.trace.push_back({0, loss, max_norm(grad), 0.0});
  result.reason = Termination::max_iters;

  LbfgsState state(options.history);
  for (std::size_t iter = 1; iter <= options.max_iters; ++iter) {
    if (max_norm(grad) <= options.grad_tolerance) {
      result.reason = Termination::converged;
      break;
    }
    const std::vector<double> dir = state.direction(grad);
    // Without curvature information, take a first step of unit length.
    const double initial =
        state.size() == 0 ? std::min(1.0, 1.0 / std::sqrt(dot(grad, grad)))
                          : 1.0;
    LineSearchResult ls =
        line_search(objective, result.x, loss, grad, dir, options, initial);
    result.evaluations += ls.evaluations;
    if (ls.status == LineSearchResult::Status::failed) {
      result.reason = Termination::line_search_failed;
      break;
    }

    std::vector<double> s(result.x.size());
    std::vector<double> y(result.x.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = ls.x[i] - result.x[i];
      y[i] = ls.grad[i] - grad[i];
    }
    state.push(std::move(s), std::move(y));

    result.x = std::move(ls.x);
    grad = std::move(ls.grad);
    loss = ls.loss;
    result.trace.push_back({iter, loss, max_norm(grad), ls.step});
  }
  if (result.reason == Termination::max_iters &&
      max_norm(grad) <= options.grad_tolerance) {
    result.reason = Termination::converged;
  }
  result.loss = loss;
  return result;
}

}  // namespace fcppn
