#pragma once

// Data-parallel compute kernels for the dense ops.
//
// Two implementations share one signature set:
//   fcppn::kernels            OpenMP-parallel, used by Graph
//   fcppn::kernels::reference plain serial loop nests, kept for testing and
//                             benchmarking
//
// Layout conventions (all row-major):
//   images        [H, W, C]; 1x1 kernels treat them as [P = H*W, C]
//   conv1x1 W     [Cin, Cout]
//   conv3x3 W     [3, 3, Cin, Cout], cross-correlation (no kernel flip),
//                 zero padding, output same size as input
//   matmul        C[M,N] (+)= op(A)[M,K] * op(B)[K,N]; with ta, A is stored
//                 [K,M]; with tb, B is stored [N,K]
//
// Every backward kernel *accumulates* into its output buffers. Each output
// element is owned by exactly one thread and summed in a fixed order, so the
// parallel kernels are deterministic regardless of thread count.

#include <cstddef>

namespace fcppn::kernels {

struct ConvDims {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t cin = 0;
  std::size_t cout = 0;
  std::size_t pixels() const { return height * width; }
};

struct PoolDims {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t out_height() const { return (height + 1) / 2; }
  std::size_t out_width() const { return (width + 1) / 2; }
};

#define FCPPN_KERNEL_DECLS                                                    \
  template <typename T>                                                       \
  void conv1x1_forward(const T* x, const T* w, const T* b, T* y,              \
                       const ConvDims& d);                                    \
  template <typename T>                                                       \
  void conv1x1_backward_input(const T* dy, const T* w, T* dx,                 \
                              const ConvDims& d);                             \
  template <typename T>                                                       \
  void conv1x1_backward_params(const T* x, const T* dy, T* dw, T* db,         \
                               const ConvDims& d);                            \
  template <typename T>                                                       \
  void conv3x3_forward(const T* x, const T* w, const T* b, T* y,              \
                       const ConvDims& d);                                    \
  template <typename T>                                                       \
  void conv3x3_backward_input(const T* dy, const T* w, T* dx,                 \
                              const ConvDims& d);                             \
  template <typename T>                                                       \
  void conv3x3_backward_params(const T* x, const T* dy, T* dw, T* db,         \
                               const ConvDims& d);                            \
  /* argmax receives the flat input index selected for each output. */        \
  template <typename T>                                                       \
  void maxpool2x2_forward(const T* x, T* y, std::size_t* argmax,              \
                          const PoolDims& d);                                 \
  template <typename T>                                                       \
  void maxpool2x2_backward(const T* dy, const std::size_t* argmax, T* dx,     \
                           const PoolDims& d);                                \
  template <typename T>                                                       \
  void avgpool2x2_forward(const T* x, T* y, const PoolDims& d);               \
  template <typename T>                                                       \
  void avgpool2x2_backward(const T* dy, T* dx, const PoolDims& d);            \
  template <typename T>                                                       \
  void matmul_accumulate(const T* a, const T* b, T* c, std::size_t m,         \
                         std::size_t k, std::size_t n, bool ta, bool tb);

FCPPN_KERNEL_DECLS

namespace reference {
FCPPN_KERNEL_DECLS
}  // namespace reference

#undef FCPPN_KERNEL_DECLS

}  // namespace fcppn::kernels
