// Acceptance runner: one PASS/FAIL line per headline criterion. Tolerances
// and budgets are fixed here; nothing is read from the command line.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include "fcppn/checkpoint.hpp"
#include "fcppn/coordnet.hpp"
#include "fcppn/fourier.hpp"
#include "fcppn/grad_suite.hpp"
#include "fcppn/image_io.hpp"
#include "fcppn/lbfgs.hpp"
#include "fcppn/rng.hpp"
#include "fcppn/tasks.hpp"

namespace {

using namespace fcppn;
namespace fs = std::filesystem;
using cd = std::complex<double>;
using Clock = std::chrono::steady_clock;

constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSeconds = 60;
constexpr double kIdftTolerance = 1e-10;
constexpr double kRoundTripTolerance = 1e-9;
constexpr double kPeriodicTolerance = 1e-9;
constexpr double kSpecialCaseTolerance = 1e-6;
constexpr double kRepresentableMse = 1e-3;
constexpr double kCppnFloorMse = 1e-2;
constexpr std::size_t kRepresentableIters = 500;
constexpr double kRepresentableBudgetSeconds = 5 * 60;
constexpr std::size_t kDirectionIters = 200;
constexpr std::size_t kDirectionSeeds = 5;
constexpr std::size_t kDirectionWinsNeeded = 4;
constexpr double kDirectionBudgetSeconds = 15 * 60;
constexpr double kCoincidenceTolerance = 1e-6;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

Outcome gradient_suite_check() {
  const auto t0 = Clock::now();
  GradCheckOptions opts;
  opts.tolerance = kGradTolerance;
  double worst = 0;
  std::string failed;
  for (const GradSuiteEntry& e : gradient_suite(0, 3, opts)) {
    worst = std::max(worst, e.report.max_relative_error);
    if (!e.report.passed) failed += " " + e.name;
  }
  const double t = seconds_since(t0);
  return {failed.empty() && t < kGradBudgetSeconds,
          fmt("max rel err %.2e, %.1f s", worst, t) +
              (failed.empty() ? "" : ", failed:" + failed)};
}

CoefficientField<double> constant_field(std::size_t w, std::size_t h,
                                        std::size_t fw, std::size_t fh,
                                        const std::vector<double>& ch) {
  Tensor<double> raw({h, w, ch.size()});
  for (std::size_t p = 0; p < w * h; ++p) {
    std::copy(ch.begin(), ch.end(), raw.data() + p * ch.size());
  }
  return reshape_head(std::move(raw), fw, fh);
}

std::vector<cd> dft(const std::vector<cd>& img, std::size_t w, std::size_t h) {
  std::vector<cd> out(w * h);
  const double norm = 1.0 / std::sqrt(double(w * h));
  for (std::size_t wy = 0; wy < h; ++wy) {
    for (std::size_t wx = 0; wx < w; ++wx) {
      cd acc = 0;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const double t = -2.0 * std::numbers::pi *
                           (double(wx * x) / w + double(wy * y) / h);
          acc += img[y * w + x] * cd(std::cos(t), std::sin(t));
        }
      }
      out[wy * w + wx] = acc * norm;
    }
  }
  return out;
}

Outcome fourier_oracle() {
  const std::size_t n = 8;
  Xoshiro256 rng(101);
  std::vector<double> ch(coefficient_channels(n, n));
  for (double& v : ch) v = 2.0 * rng.uniform() - 1.0;
  const Tensor<double> img = synthesize_localized(
      constant_field(n, n, n, n, ch), make_phase_coords(n, n, n, n));
  double idft_err = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<cd> grid(n * n);
    for (std::size_t wy = 0; wy < n; ++wy) {
      for (std::size_t wx = 0; wx < n; ++wx) {
        grid[wy * n + wx] = {ch[coefficient_channel(c, wy, wx, 0, n, n)],
                             ch[coefficient_channel(c, wy, wx, 1, n, n)]};
      }
    }
    const std::vector<cd> ref = brute_force_idft(grid, n, n);
    for (std::size_t p = 0; p < n * n; ++p) {
      idft_err = std::max(idft_err, std::abs(img[p * 3 + c] - ref[p].real()));
    }
  }
  std::vector<cd> signal(n * n);
  for (cd& v : signal) v = {rng.uniform(), rng.uniform()};
  const std::vector<cd> back = brute_force_idft(dft(signal, n, n), n, n);
  double rt_err = 0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    rt_err = std::max(rt_err, std::abs(back[i] - signal[i]));
  }
  return {idft_err <= kIdftTolerance && rt_err <= kRoundTripTolerance,
          fmt("IDFT err %.2e, round-trip err %.2e", idft_err, rt_err)};
}

// F-CPPN whose hidden weights and head weights are zero: the coefficients are
// the head bias at every pixel.
Params<double> constant_coefficient_params(const NetworkConfig& net,
                                           std::uint64_t seed, double scale) {
  Params<double> p = init_params(net).cast<double>();
  for (auto& l : p.layers) l.weights.fill(0.0);
  Xoshiro256 rng(seed);
  for (double& b : p.head().bias.values()) b = rng.normal() * scale;
  return p;
}

Tensor<double> pre_sigmoid(const Params<double>& p, const NetworkConfig& net,
                           std::size_t w, std::size_t h) {
  Graph<double> g;
  const ImageNodes nodes =
      build_image(g, net, add_params(g, p, false), make_grid(w, h));
  return g.value(nodes.pre_sigmoid);
}

Outcome periodicity() {
  NetworkConfig net;
  net.freq_w = net.freq_h = 10;
  const std::size_t n = 64;
  const Tensor<double> img =
      pre_sigmoid(constant_coefficient_params(net, 102, 1.0), net, n, n);
  double err = 0;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        if (x + 10 < n) err = std::max(err, std::abs(img.at(y, x, c) - img.at(y, x + 10, c)));
        if (y + 10 < n) err = std::max(err, std::abs(img.at(y, x, c) - img.at(y + 10, x, c)));
      }
    }
  }
  return {err <= kPeriodicTolerance, fmt("max period error %.2e", err)};
}

Outcome special_case() {
  NetworkConfig fc;
  fc.freq_w = fc.freq_h = 1;
  fc.seed = 103;
  NetworkConfig cp = fc;
  cp.head = Head::cppn;
  Params<double> fp = init_params(fc).cast<double>();
  Params<double> pp = init_params(cp).cast<double>();
  // Map the CPPN head onto the real slice; the imaginary slice is zero.
  Xoshiro256 rng(104);
  const std::size_t cin = fp.head().weights.dim(0);
  for (std::size_t i = 0; i < cin; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double w = rng.normal() * 0.3;
      pp.head().weights[i * 3 + c] = w;
      fp.head().weights[i * 6 + 2 * c] = w;
      fp.head().weights[i * 6 + 2 * c + 1] = 0.0;
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    pp.head().bias[c] = fp.head().bias[2 * c] = rng.normal() * 0.3;
  }
  for (std::size_t l = 0; l + 1 < fp.layers.size(); ++l) pp.layers[l] = fp.layers[l];
  const InputField field = make_grid(32, 24);
  const double err =
      max_abs_diff(render_image(fp, fc, field), render_image(pp, cp, field));
  return {err <= kSpecialCaseTolerance, fmt("max abs diff %.2e", err)};
}

double fit_mse(Head head, const Tensor<float>& target, std::size_t iters,
               std::uint64_t seed) {
  TrainingProblem p;
  p.network.head = head;
  p.network.seed = seed;
  p.targets = {target};
  p.z = {{}};
  p.extractor = Extractor::pixel();
  p.loss = LossKind::content;
  p.optimizer.max_iters = iters;
  return train(p).optimization.loss;
}

Outcome representable() {
  const auto t0 = Clock::now();
  NetworkConfig net;  // F-CPPN, 10x10 frequencies
  const std::size_t n = 32;
  Graph<double> g;
  const ImageNodes nodes = build_image(
      g, net, add_params(g, constant_coefficient_params(net, 105, 1.0), false),
      make_grid(n, n));
  const Tensor<float> target = g.value(nodes.image).cast<float>();
  const double f_mse = fit_mse(Head::fcppn, target, kRepresentableIters, 1);
  const double c_mse = fit_mse(Head::cppn, target, kRepresentableIters, 1);
  const double t = seconds_since(t0);
  return {f_mse < kRepresentableMse && !(c_mse < kCppnFloorMse) &&
              t < kRepresentableBudgetSeconds,
          fmt("F-CPPN MSE %.3e, CPPN MSE %.3e, %.1f s", f_mse, c_mse, t)};
}

Outcome direction() {
  const auto t0 = Clock::now();
  const std::size_t n = 64;
  Tensor<float> board({n, n, 3});
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const float v = ((x / 2) + (y / 2)) % 2 ? 1.0f : 0.0f;
      for (std::size_t c = 0; c < 3; ++c) board.at(y, x, c) = v;
    }
  }
  std::size_t wins = 0;
  std::string losses;
  for (std::uint64_t seed = 1; seed <= kDirectionSeeds; ++seed) {
    double final_loss[2];
    for (int i = 0; i < 2; ++i) {
      TrainingProblem p;
      p.network.head = i == 0 ? Head::fcppn : Head::cppn;
      p.network.seed = seed;
      p.targets = {board};
      p.z = {{}};
      p.extractor = make_extractor("pyramid:" + std::to_string(seed));
      p.loss = LossKind::content;
      p.optimizer.max_iters = kDirectionIters;
      final_loss[i] = train(p).optimization.loss;
    }
    if (final_loss[0] < final_loss[1]) ++wins;
    losses += fmt(" %.3g/%.3g", final_loss[0], final_loss[1]);
  }
  const double t = seconds_since(t0);
  return {wins >= kDirectionWinsNeeded && t < kDirectionBudgetSeconds,
          fmt("F-CPPN wins %zu/%zu (F/C:", wins, kDirectionSeeds) + losses +
              fmt("), %.1f s", t)};
}

Outcome optimizer() {
  const Objective rosen = [](std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  LbfgsOptions ro;
  ro.max_iters = 100;
  const MinimizeResult r = minimize(rosen, {-1.2, 1.0}, ro);
  const bool rosen_ok = r.loss < 1e-8 && r.trace.size() - 1 <= 100;

  // Random SPD A = M^T M / n + I; the minimum -b^T A^{-1} b / 2 comes from a
  // Cholesky solve.
  const std::size_t n = 20;
  Xoshiro256 rng(106);
  std::vector<double> m(n * n), a(n * n), b(n);
  for (double& v : m) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += m[k * n + i] * m[k * n + j];
      a[i * n + j] = s / double(n) + (i == j ? 1.0 : 0.0);
    }
    b[i] = rng.normal();
  }
  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j * n + k] * l[j * n + k];
    l[j * n + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = s / l[j * n + j];
    }
  }
  std::vector<double> u = b;  // solve L u = b; then f* = -|u|^2 / 2
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) u[i] -= l[i * n + k] * u[k];
    u[i] /= l[i * n + i];
  }
  double fstar = 0;
  for (double v : u) fstar -= 0.5 * v * v;
  const Objective quad = [&](std::span<const double> x, std::span<double> g) {
    double f = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double ax = 0;
      for (std::size_t j = 0; j < n; ++j) ax += a[i * n + j] * x[j];
      g[i] = ax - b[i];
      f += 0.5 * x[i] * ax - b[i] * x[i];
    }
    return f;
  };
  LbfgsOptions qo;
  qo.max_iters = n + 2;
  qo.grad_tolerance = 0.0;
  const MinimizeResult q = minimize(quad, std::vector<double>(n, 0.0), qo);
  const double gap = q.loss - fstar;
  return {rosen_ok && gap < 1e-10,
          fmt("Rosenbrock f %.2e in %zu iters; SPD gap %.2e in %zu iters",
              r.loss, r.trace.size() - 1, gap, q.trace.size() - 1)};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fcppn_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> bytes_of(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Tensor<float> test_pattern(std::size_t w, std::size_t h, bool invert) {
  Tensor<float> img({h, w, 3});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const float v[3] = {float((x * 7 + y * 3) % 16) / 15.0f,
                          float((x / 4 + y / 4) % 2), float(y) / float(h - 1)};
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(y, x, c) = invert ? 1.0f - v[c] : v[c];
      }
    }
  }
  return img;
}

RunConfig run_config(const fs::path& dir, Task task) {
  RunConfig c;
  c.task = task;
  c.iterations = 10;
  c.out_dir = (dir / "out").string();
  write_png(dir / "a.png", test_pattern(24, 20, false));
  c.targets = {(dir / "a.png").string()};
  if (task == Task::interpolate) {
    write_png(dir / "b.png", test_pattern(24, 20, true));
    c.targets.push_back((dir / "b.png").string());
  }
  return c;
}

Outcome render_coincidence() {
  const fs::path dir = scratch("render");
  const RunConfig c = run_config(dir, Task::reconstruct);
  const RunOutputs out = run_reconstruct(c);
  const Checkpoint cp = load_checkpoint(dir / "out" / "checkpoint.fcwt");
  const std::size_t w = cp.base_width, h = cp.base_height;
  const Tensor<float> base = render(cp.params, cp.network(), w, h, w, h);
  const bool bitwise = base == out.image;
  const Tensor<float> fine =
      render(cp.params, cp.network(), 2 * w - 1, 2 * h - 1, w, h);
  double err = 0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        err = std::max(err, double(std::abs(fine.at(2 * y, 2 * x, ch) -
                                            base.at(y, x, ch))));
      }
    }
  }
  return {bitwise && err <= kCoincidenceTolerance,
          fmt("base render %s, super-sampled max diff %.2e",
              bitwise ? "bitwise equal" : "DIFFERS", err)};
}

Outcome interpolation_endpoints() {
  const fs::path dir = scratch("interp");
  RunConfig c = run_config(dir, Task::interpolate);
  c.frames = 8;
  const RunOutputs out = run_interpolate(c);
  const Checkpoint cp = load_checkpoint(dir / "out" / "checkpoint.fcwt");
  const std::size_t w = cp.base_width, h = cp.base_height;
  const bool first =
      out.frames.front() == render(cp.params, cp.network(), w, h, w, h, {1.0, 0.0});
  const bool last =
      out.frames.back() == render(cp.params, cp.network(), w, h, w, h, {0.0, 1.0});
  const bool files = bytes_of(dir / "out" / "frames" / "0000.png") ==
                     bytes_of(dir / "out" / "final.png");
  return {first && last && files,
          fmt("frame 0 %s, frame K-1 %s", first ? "exact" : "DIFFERS",
              last ? "exact" : "DIFFERS")};
}

Outcome determinism() {
  const fs::path dir = scratch("det");
  const RunConfig c = run_config(dir, Task::texture);
  run_texture(c);
  const auto csv = bytes_of(dir / "out" / "loss.csv");
  const auto png = bytes_of(dir / "out" / "final.png");
  fs::remove_all(dir / "out");
  run_texture(c);
  const bool same_csv = csv == bytes_of(dir / "out" / "loss.csv");
  const bool same_png = png == bytes_of(dir / "out" / "final.png");
  return {same_csv && same_png && !csv.empty(),
          fmt("loss.csv %s, final.png %s", same_csv ? "identical" : "DIFFERS",
              same_png ? "identical" : "DIFFERS")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
      {"gradient-suite", gradient_suite_check},
      {"fourier-oracle", fourier_oracle},
      {"periodicity", periodicity},
      {"special-case", special_case},
      {"representable-reconstruction", representable},
      {"direction-of-improvement", direction},
      {"optimizer", optimizer},
      {"render-coincidence", render_coincidence},
      {"interpolation-endpoints", interpolation_endpoints},
      {"determinism", determinism},
  };
  bool all = true;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
