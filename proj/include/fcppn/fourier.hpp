#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "fcppn/graph.hpp"
#include "fcppn/tensor.hpp"

namespace fcppn {

// Per-pixel continuous sample positions in base-resolution pixel units.
//
// Column i of a W-wide grid sits at i * (base_w - 1) / (W - 1), so the first
// and last columns always map to the base grid's first and last pixels. At
// W == base_w the positions are exactly the integer column indices, and a
// render at 2*base - 1 puts every even column exactly on a base pixel.
// Degenerate single-sample axes sit at 0.
struct PhaseCoords {
  std::size_t base_width = 0;
  std::size_t base_height = 0;
  std::vector<double> x;  // one entry per column
  std::vector<double> y;  // one entry per row

  std::size_t width() const { return x.size(); }
  std::size_t height() const { return y.size(); }
  PhaseCoords rows(std::size_t begin, std::size_t end) const;
};

PhaseCoords make_phase_coords(std::size_t width, std::size_t height,
                              std::size_t base_width, std::size_t base_height);

// Channel layout of the head output: colour-major, then omega_y, then
// omega_x, then {real, imag}.
constexpr std::size_t coefficient_channel(std::size_t colour, std::size_t wy,
                                          std::size_t wx, std::size_t part,
                                          std::size_t freq_w,
                                          std::size_t freq_h) {
  return ((colour * freq_h + wy) * freq_w + wx) * 2 + part;
}

constexpr std::size_t coefficient_channels(std::size_t freq_w,
                                           std::size_t freq_h) {
  return 2 * 3 * freq_w * freq_h;
}

// Localized Fourier coefficients F_xyc[wx, wy] for every pixel.
template <typename T>
class CoefficientField {
 public:
  CoefficientField(Tensor<T> raw, std::size_t freq_w, std::size_t freq_h);

  std::size_t freq_w() const { return freq_w_; }
  std::size_t freq_h() const { return freq_h_; }
  std::size_t height() const { return raw_.dim(0); }
  std::size_t width() const { return raw_.dim(1); }
  const Tensor<T>& raw() const { return raw_; }

  T real(std::size_t y, std::size_t x, std::size_t colour, std::size_t wy,
         std::size_t wx) const {
    return raw_.at(y, x, coefficient_channel(colour, wy, wx, 0, freq_w_,
                                             freq_h_));
  }
  T imag(std::size_t y, std::size_t x, std::size_t colour, std::size_t wy,
         std::size_t wx) const {
    return raw_.at(y, x, coefficient_channel(colour, wy, wx, 1, freq_w_,
                                             freq_h_));
  }

 private:
  Tensor<T> raw_;
  std::size_t freq_w_;
  std::size_t freq_h_;
};

// Relabels a raw [H,W,6*W_F*H_F] head output as a coefficient field.
template <typename T>
CoefficientField<T> reshape_head(Tensor<T> raw, std::size_t freq_w,
                                 std::size_t freq_h) {
  return CoefficientField<T>(std::move(raw), freq_w, freq_h);
}

// Constant synthesis table [H,W,6*W_F*H_F]: for every coefficient channel,
// the factor it contributes to its colour at that pixel, i.e.
// cos(theta)/sqrt(W_F H_F) for real parts and -sin(theta)/sqrt(W_F H_F) for
// imaginary parts, theta = 2 pi (wx px / W_F + wy py / H_F).
template <typename T>
Tensor<T> synthesis_basis(const PhaseCoords& phase, std::size_t freq_w,
                          std::size_t freq_h);

// [6*W_F*H_F, 3] 0/1 matrix summing each colour's coefficient channels.
template <typename T>
Tensor<T> synthesis_weights(std::size_t freq_w, std::size_t freq_h);

// Differentiable localized IDFT (real part), pre-sigmoid. Built from
// mul + conv1x1 against the constant tables above.
template <typename T>
NodeId synthesize(Graph<T>& graph, NodeId coefficients,
                  const PhaseCoords& phase, std::size_t freq_w,
                  std::size_t freq_h);

// Direct evaluation of the same sum, without a graph.
template <typename T>
Tensor<T> synthesize_localized(const CoefficientField<T>& coefficients,
                               const PhaseCoords& phase);

// Classical inverse 2D DFT with 1/sqrt(WH) normalisation, by direct
// summation. `coefficients[wy * width + wx]`; the result is indexed
// [y * width + x]. Reference only.
std::vector<std::complex<double>> brute_force_idft(
    const std::vector<std::complex<double>>& coefficients, std::size_t width,
    std::size_t height);

}  // namespace fcppn
