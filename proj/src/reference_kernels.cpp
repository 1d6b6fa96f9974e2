// Serial loop-nest versions of the kernels in kernels.cpp. These favour
// readability over speed; tests and the benchmark compare against them.

#include <algorithm>
#include <cstddef>

#include "fcppn/kernels.hpp"

namespace fcppn::kernels::reference {

template <typename T>
void conv1x1_forward(const T* x, const T* w, const T* b, T* y,
                     const ConvDims& d) {
  for (std::size_t p = 0; p < d.pixels(); ++p) {
    for (std::size_t o = 0; o < d.cout; ++o) {
      T acc = b[o];
      for (std::size_t i = 0; i < d.cin; ++i) {
        acc += x[p * d.cin + i] * w[i * d.cout + o];
      }
      y[p * d.cout + o] = acc;
    }
  }
}

template <typename T>
void conv1x1_backward_input(const T* dy, const T* w, T* dx,
                            const ConvDims& d) {
  for (std::size_t p = 0; p < d.pixels(); ++p) {
    for (std::size_t i = 0; i < d.cin; ++i) {
      T acc = 0;
      for (std::size_t o = 0; o < d.cout; ++o) {
        acc += dy[p * d.cout + o] * w[i * d.cout + o];
      }
      dx[p * d.cin + i] += acc;
    }
  }
}

template <typename T>
void conv1x1_backward_params(const T* x, const T* dy, T* dw, T* db,
                             const ConvDims& d) {
  for (std::size_t i = 0; i < d.cin; ++i) {
    for (std::size_t o = 0; o < d.cout; ++o) {
      T acc = 0;
      for (std::size_t p = 0; p < d.pixels(); ++p) {
        acc += x[p * d.cin + i] * dy[p * d.cout + o];
      }
      dw[i * d.cout + o] += acc;
    }
  }
  for (std::size_t o = 0; o < d.cout; ++o) {
    T acc = 0;
    for (std::size_t p = 0; p < d.pixels(); ++p) acc += dy[p * d.cout + o];
    db[o] += acc;
  }
}

template <typename T>
void conv3x3_forward(const T* x, const T* w, const T* b, T* y,
                     const ConvDims& d) {
  const auto h = static_cast<long>(d.height);
  const auto wd = static_cast<long>(d.width);
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < wd; ++c) {
      for (std::size_t o = 0; o < d.cout; ++o) {
        T acc = b[o];
        for (long ky = 0; ky < 3; ++ky) {
          for (long kx = 0; kx < 3; ++kx) {
            const long sr = r + ky - 1;
            const long sc = c + kx - 1;
            if (sr < 0 || sr >= h || sc < 0 || sc >= wd) continue;
            for (std::size_t i = 0; i < d.cin; ++i) {
              acc += x[(sr * wd + sc) * d.cin + i] *
                     w[((ky * 3 + kx) * d.cin + i) * d.cout + o];
            }
          }
        }
        y[(r * wd + c) * d.cout + o] = acc;
      }
    }
  }
}

template <typename T>
void conv3x3_backward_input(const T* dy, const T* w, T* dx,
                            const ConvDims& d) {
  const auto h = static_cast<long>(d.height);
  const auto wd = static_cast<long>(d.width);
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < wd; ++c) {
      for (long ky = 0; ky < 3; ++ky) {
        for (long kx = 0; kx < 3; ++kx) {
          const long sr = r + ky - 1;
          const long sc = c + kx - 1;
          if (sr < 0 || sr >= h || sc < 0 || sc >= wd) continue;
          for (std::size_t i = 0; i < d.cin; ++i) {
            for (std::size_t o = 0; o < d.cout; ++o) {
              dx[(sr * wd + sc) * d.cin + i] +=
                  dy[(r * wd + c) * d.cout + o] *
                  w[((ky * 3 + kx) * d.cin + i) * d.cout + o];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3x3_backward_params(const T* x, const T* dy, T* dw, T* db,
                             const ConvDims& d) {
  const auto h = static_cast<long>(d.height);
  const auto wd = static_cast<long>(d.width);
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < wd; ++c) {
      for (long ky = 0; ky < 3; ++ky) {
        for (long kx = 0; kx < 3; ++kx) {
          const long sr = r + ky - 1;
          const long sc = c + kx - 1;
          if (sr < 0 || sr >= h || sc < 0 || sc >= wd) continue;
          for (std::size_t i = 0; i < d.cin; ++i) {
            for (std::size_t o = 0; o < d.cout; ++o) {
              dw[((ky * 3 + kx) * d.cin + i) * d.cout + o] +=
                  x[(sr * wd + sc) * d.cin + i] *
                  dy[(r * wd + c) * d.cout + o];
            }
          }
        }
      }
      for (std::size_t o = 0; o < d.cout; ++o) {
        db[o] += dy[(r * wd + c) * d.cout + o];
      }
    }
  }
}

template <typename T>
void maxpool2x2_forward(const T* x, T* y, std::size_t* argmax,
                        const PoolDims& d) {
  for (std::size_t r = 0; r < d.out_height(); ++r) {
    for (std::size_t c = 0; c < d.out_width(); ++c) {
      for (std::size_t ch = 0; ch < d.channels; ++ch) {
        std::size_t best = (2 * r * d.width + 2 * c) * d.channels + ch;
        for (std::size_t dr = 0; dr < 2; ++dr) {
          for (std::size_t dc = 0; dc < 2; ++dc) {
            const std::size_t sr = 2 * r + dr;
            const std::size_t sc = 2 * c + dc;
            if (sr >= d.height || sc >= d.width) continue;
            const std::size_t idx = (sr * d.width + sc) * d.channels + ch;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t out = (r * d.out_width() + c) * d.channels + ch;
        y[out] = x[best];
        argmax[out] = best;
      }
    }
  }
}

template <typename T>
void maxpool2x2_backward(const T* dy, const std::size_t* argmax, T* dx,
                         const PoolDims& d) {
  const std::size_t n = d.out_height() * d.out_width() * d.channels;
  for (std::size_t i = 0; i < n; ++i) dx[argmax[i]] += dy[i];
}

template <typename T>
void avgpool2x2_forward(const T* x, T* y, const PoolDims& d) {
  for (std::size_t r = 0; r < d.out_height(); ++r) {
    for (std::size_t c = 0; c < d.out_width(); ++c) {
      const std::size_t rows = std::min<std::size_t>(2, d.height - 2 * r);
      const std::size_t cols = std::min<std::size_t>(2, d.width - 2 * c);
      for (std::size_t ch = 0; ch < d.channels; ++ch) {
        T acc = 0;
        for (std::size_t dr = 0; dr < rows; ++dr) {
          for (std::size_t dc = 0; dc < cols; ++dc) {
            acc += x[((2 * r + dr) * d.width + 2 * c + dc) * d.channels + ch];
          }
        }
        y[(r * d.out_width() + c) * d.channels + ch] =
            acc / static_cast<T>(rows * cols);
      }
    }
  }
}

template <typename T>
void avgpool2x2_backward(const T* dy, T* dx, const PoolDims& d) {
  for (std::size_t r = 0; r < d.out_height(); ++r) {
    for (std::size_t c = 0; c < d.out_width(); ++c) {
      const std::size_t rows = std::min<std::size_t>(2, d.height - 2 * r);
      const std::size_t cols = std::min<std::size_t>(2, d.width - 2 * c);
      for (std::size_t ch = 0; ch < d.channels; ++ch) {
        const T g = dy[(r * d.out_width() + c) * d.channels + ch] /
                    static_cast<T>(rows * cols);
        for (std::size_t dr = 0; dr < rows; ++dr) {
          for (std::size_t dc = 0; dc < cols; ++dc) {
            dx[((2 * r + dr) * d.width + 2 * c + dc) * d.channels + ch] += g;
          }
        }
      }
    }
  }
}

template <typename T>
void matmul_accumulate(const T* a, const T* b, T* c, std::size_t m,
                       std::size_t k, std::size_t n, bool ta, bool tb) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = 0;
      for (std::size_t q = 0; q < k; ++q) {
        const T av = ta ? a[q * m + i] : a[i * k + q];
        const T bv = tb ? b[j * k + q] : b[q * n + j];
        acc += av * bv;
      }
      c[i * n + j] += acc;
    }
  }
}

#define FCPPN_INSTANTIATE(T)                                                  \
  template void conv1x1_forward<T>(const T*, const T*, const T*, T*,         \
                                   const ConvDims&);                          \
  template void conv1x1_backward_input<T>(const T*, const T*, T*,            \
                                          const ConvDims&);                   \
  template void conv1x1_backward_params<T>(const T*, const T*, T*, T*,       \
                                           const ConvDims&);                  \
  template void conv3x3_forward<T>(const T*, const T*, const T*, T*,         \
                                   const ConvDims&);                          \
  template void conv3x3_backward_input<T>(const T*, const T*, T*,            \
                                          const ConvDims&);                   \
  template void conv3x3_backward_params<T>(const T*, const T*, T*, T*,       \
                                           const ConvDims&);                  \
  template void maxpool2x2_forward<T>(const T*, T*, std::size_t*,            \
                                      const PoolDims&);                       \
  template void maxpool2x2_backward<T>(const T*, const std::size_t*, T*,     \
                                       const PoolDims&);                      \
  template void avgpool2x2_forward<T>(const T*, T*, const PoolDims&);        \
  template void avgpool2x2_backward<T>(const T*, T*, const PoolDims&);       \
  template void matmul_accumulate<T>(const T*, const T*, T*, std::size_t,    \
                                     std::size_t, std::size_t, bool, bool);

FCPPN_INSTANTIATE(float)
FCPPN_INSTANTIATE(double)

}  // namespace fcppn::kernels::reference
