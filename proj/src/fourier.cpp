#include "fcppn/fourier.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace fcppn {

namespace {

std::vector<double> sample_positions(std::size_t count, std::size_t base) {
  std::vector<double> out(count, 0.0);
  if (count < 2 || base < 2) return out;
  for (std::size_t i = 0; i < count; ++i) {
    // The numerator is an exact integer, so coinciding samples of grids
    // with different densities produce bitwise-equal positions.
    out[i] = static_cast<double>(i * (base - 1)) /
             static_cast<double>(count - 1);
  }
  return out;
}

// Fraction of a full turn for frequency `omega` at position `p` over
// `period` samples. fmod keeps the result exactly periodic in p.
double turn_fraction(std::size_t omega, double p, std::size_t period) {
  return std::fmod(static_cast<double>(omega) * p,
                   static_cast<double>(period)) /
         static_cast<double>(period);
}

}  // namespace

PhaseCoords PhaseCoords::rows(std::size_t begin, std::size_t end) const {
  PhaseCoords out;
  out.base_width = base_width;
  out.base_height = base_height;
  out.x = x;
  out.y.assign(y.begin() + static_cast<long>(begin),
               y.begin() + static_cast<long>(end));
  return out;
}

PhaseCoords make_phase_coords(std::size_t width, std::size_t height,
                              std::size_t base_width,
                              std::size_t base_height) {
  PhaseCoords out;
  out.base_width = base_width;
  out.base_height = base_height;
  out.x = sample_positions(width, base_width);
  out.y = sample_positions(height, base_height);
  return out;
}

template <typename T>
CoefficientField<T>::CoefficientField(Tensor<T> raw, std::size_t freq_w,
                                      std::size_t freq_h)
    : raw_(std::move(raw)), freq_w_(freq_w), freq_h_(freq_h) {
  if (raw_.rank() != 3 ||
      raw_.dim(2) != coefficient_channels(freq_w, freq_h)) {
    throw ShapeError("coefficient field " + to_string(raw_.shape()) +
                     " needs " +
                     std::to_string(coefficient_channels(freq_w, freq_h)) +
                     " channels for a " + std::to_string(freq_w) + "x" +
                     std::to_string(freq_h) + " frequency grid");
  }
}

template <typename T>
Tensor<T> synthesis_basis(const PhaseCoords& phase, std::size_t freq_w,
                          std::size_t freq_h) {
  const std::size_t per_colour = 2 * freq_w * freq_h;
  const std::size_t channels = 3 * per_colour;
  const std::size_t h = phase.height();
  const std::size_t w = phase.width();
  const double norm = 1.0 / std::sqrt(static_cast<double>(freq_w * freq_h));
  Tensor<T> out(Shape{h, w, channels});

  const auto rows = static_cast<long>(h);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    std::vector<T> local(per_colour);
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t wy = 0; wy < freq_h; ++wy) {
        const double ty = turn_fraction(wy, phase.y[r], freq_h);
        for (std::size_t wx = 0; wx < freq_w; ++wx) {
          const double theta = 2.0 * std::numbers::pi *
                               (turn_fraction(wx, phase.x[c], freq_w) + ty);
          const std::size_t k = (wy * freq_w + wx) * 2;
          local[k] = static_cast<T>(norm * std::cos(theta));
          local[k + 1] = static_cast<T>(-norm * std::sin(theta));
        }
      }
      T* dst = &out.at(r, c, 0);
      for (std::size_t colour = 0; colour < 3; ++colour) {
        std::copy(local.begin(), local.end(), dst + colour * per_colour);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> synthesis_weights(std::size_t freq_w, std::size_t freq_h) {
  const std::size_t per_colour = 2 * freq_w * freq_h;
  Tensor<T> out(Shape{3 * per_colour, 3});
  for (std::size_t k = 0; k < 3 * per_colour; ++k) {
    out[k * 3 + k / per_colour] = T{1};
  }
  return out;
}

template <typename T>
NodeId synthesize(Graph<T>& graph, NodeId coefficients,
                  const PhaseCoords& phase, std::size_t freq_w,
                  std::size_t freq_h) {
  const NodeId basis =
      graph.constant(synthesis_basis<T>(phase, freq_w, freq_h));
  const NodeId weighted = graph.mul(coefficients, basis);
  const NodeId sum = graph.constant(synthesis_weights<T>(freq_w, freq_h));
  const NodeId zero = graph.constant(Tensor<T>(Shape{3}));
  return graph.conv1x1(weighted, sum, zero);
}

template <typename T>
Tensor<T> synthesize_localized(const CoefficientField<T>& coefficients,
                               const PhaseCoords& phase) {
  const std::size_t h = coefficients.height();
  const std::size_t w = coefficients.width();
  if (phase.height() != h || phase.width() != w) {
    throw ShapeError("synthesize_localized: phase grid " +
                     std::to_string(phase.height()) + "x" +
                     std::to_string(phase.width()) +
                     " does not match coefficients " + std::to_string(h) +
                     "x" + std::to_string(w));
  }
  const std::size_t fw = coefficients.freq_w();
  const std::size_t fh = coefficients.freq_h();
  const double norm = 1.0 / std::sqrt(static_cast<double>(fw * fh));
  Tensor<T> out(Shape{h, w, 3});

  const auto rows = static_cast<long>(h);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t colour = 0; colour < 3; ++colour) {
        double acc = 0.0;
        for (std::size_t wy = 0; wy < fh; ++wy) {
          const double ty = turn_fraction(wy, phase.y[r], fh);
          for (std::size_t wx = 0; wx < fw; ++wx) {
            const double theta = 2.0 * std::numbers::pi *
                                 (turn_fraction(wx, phase.x[c], fw) + ty);
            acc += static_cast<double>(coefficients.real(r, c, colour, wy, wx)) *
                       std::cos(theta) -
                   static_cast<double>(coefficients.imag(r, c, colour, wy, wx)) *
                       std::sin(theta);
          }
        }
        out.at(r, c, colour) = static_cast<T>(norm * acc);
      }
    }
  }
  return out;
}

std::vector<std::complex<double>> brute_force_idft(
    const std::vector<std::complex<double>>& coefficients, std::size_t width,
    std::size_t height) {
  if (coefficients.size() != width * height) {
    throw ShapeError("brute_force_idft: expected " +
                     std::to_string(width * height) + " coefficients, got " +
                     std::to_string(coefficients.size()));
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(width * height));
  std::vector<std::complex<double>> out(width * height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      std::complex<double> acc = 0.0;
      for (std::size_t wy = 0; wy < height; ++wy) {
        for (std::size_t wx = 0; wx < width; ++wx) {
          const double theta =
              2.0 * std::numbers::pi *
              (static_cast<double>(wx * x) / static_cast<double>(width) +
               static_cast<double>(wy * y) / static_cast<double>(height));
          acc += coefficients[wy * width + wx] *
                 std::complex<double>(std::cos(theta), std::sin(theta));
        }
      }
      out[y * width + x] = norm * acc;
    }
  }
  return out;
}

template class CoefficientField<float>;
template class CoefficientField<double>;
template Tensor<float> synthesis_basis<float>(const PhaseCoords&, std::size_t,
                                              std::size_t);
template Tensor<double> synthesis_basis<double>(const PhaseCoords&,
                                                std::size_t, std::size_t);
template Tensor<float> synthesis_weights<float>(std::size_t, std::size_t);
template Tensor<double> synthesis_weights<double>(std::size_t, std::size_t);
template NodeId synthesize<float>(Graph<float>&, NodeId, const PhaseCoords&,
                                  std::size_t, std::size_t);
template NodeId synthesize<double>(Graph<double>&, NodeId, const PhaseCoords&,
                                   std::size_t, std::size_t);
template Tensor<float> synthesize_localized<float>(
    const CoefficientField<float>&, const PhaseCoords&);
template Tensor<double> synthesize_localized<double>(
    const CoefficientField<double>&, const PhaseCoords&);

}  // namespace fcppn
