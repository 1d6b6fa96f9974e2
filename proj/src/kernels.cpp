#include "fcppn/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace fcppn::kernels {

namespace {

template <typename T>
inline void axpy(T alpha, const T* __restrict x, T* __restrict y,
                 std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
inline T dot(const T* __restrict x, const T* __restrict y, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

using Index = long;

}  // namespace

template <typename T>
void conv1x1_forward(const T* x, const T* w, const T* b, T* y,
                     const ConvDims& d) {
  const auto pixels = static_cast<Index>(d.pixels());
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < pixels; ++p) {
    T* yrow = y + p * d.cout;
    const T* xrow = x + p * d.cin;
    std::copy(b, b + d.cout, yrow);
    for (std::size_t i = 0; i < d.cin; ++i) {
      axpy(xrow[i], w + i * d.cout, yrow, d.cout);
    }
  }
}

template <typename T>
void conv1x1_backward_input(const T* dy, const T* w, T* dx,
                            const ConvDims& d) {
  const auto pixels = static_cast<Index>(d.pixels());
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < pixels; ++p) {
    const T* dyrow = dy + p * d.cout;
    T* dxrow = dx + p * d.cin;
    for (std::size_t i = 0; i < d.cin; ++i) {
      dxrow[i] += dot(dyrow, w + i * d.cout, d.cout);
    }
  }
}

template <typename T>
void conv1x1_backward_params(const T* x, const T* dy, T* dw, T* db,
                             const ConvDims& d) {
  const auto cin = static_cast<Index>(d.cin);
  const std::size_t pixels = d.pixels();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < cin; ++i) {
    T* dwrow = dw + i * d.cout;
    for (std::size_t p = 0; p < pixels; ++p) {
      axpy(x[p * d.cin + i], dy + p * d.cout, dwrow, d.cout);
    }
  }
  for (std::size_t p = 0; p < pixels; ++p) {
    axpy(T{1}, dy + p * d.cout, db, d.cout);
  }
}

template <typename T>
void conv3x3_forward(const T* x, const T* w, const T* b, T* y,
                     const ConvDims& d) {
  const auto h = static_cast<Index>(d.height);
  const auto wd = static_cast<Index>(d.width);
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < wd; ++c) {
      T* yrow = y + (r * wd + c) * d.cout;
      std::copy(b, b + d.cout, yrow);
      for (Index ky = 0; ky < 3; ++ky) {
        const Index sr = r + ky - 1;
        if (sr < 0 || sr >= h) continue;
        for (Index kx = 0; kx < 3; ++kx) {
          const Index sc = c + kx - 1;
          if (sc < 0 || sc >= wd) continue;
          const T* xrow = x + (sr * wd + sc) * d.cin;
          const T* wblock = w + (ky * 3 + kx) * d.cin * d.cout;
          for (std::size_t i = 0; i < d.cin; ++i) {
            axpy(xrow[i], wblock + i * d.cout, yrow, d.cout);
          }
        }
      }
    }
  }
}

template <typename T>
void conv3x3_backward_input(const T* dy, const T* w, T* dx,
                            const ConvDims& d) {
  const auto h = static_cast<Index>(d.height);
  const auto wd = static_cast<Index>(d.width);
  // Gather form: each thread owns a band of input rows.
#pragma omp parallel for schedule(static)
  for (Index sr = 0; sr < h; ++sr) {
    for (Index sc = 0; sc < wd; ++sc) {
      T* dxrow = dx + (sr * wd + sc) * d.cin;
      for (Index ky = 0; ky < 3; ++ky) {
        const Index r = sr - ky + 1;
        if (r < 0 || r >= h) continue;
        for (Index kx = 0; kx < 3; ++kx) {
          const Index c = sc - kx + 1;
          if (c < 0 || c >= wd) continue;
          const T* dyrow = dy + (r * wd + c) * d.cout;
          const T* wblock = w + (ky * 3 + kx) * d.cin * d.cout;
          for (std::size_t i = 0; i < d.cin; ++i) {
            dxrow[i] += dot(dyrow, wblock + i * d.cout, d.cout);
          }
        }
      }
    }
  }
}

template <typename T>
void conv3x3_backward_params(const T* x, const T* dy, T* dw, T* db,
                             const ConvDims& d) {
  const auto h = static_cast<Index>(d.height);
  const auto wd = static_cast<Index>(d.width);
#pragma omp parallel for schedule(static)
  for (Index tap = 0; tap < 9; ++tap) {
    const Index ky = tap / 3;
    const Index kx = tap % 3;
    T* wblock = dw + tap * d.cin * d.cout;
    for (Index r = 0; r < h; ++r) {
      const Index sr = r + ky - 1;
      if (sr < 0 || sr >= h) continue;
      for (Index c = 0; c < wd; ++c) {
        const Index sc = c + kx - 1;
        if (sc < 0 || sc >= wd) continue;
        const T* xrow = x + (sr * wd + sc) * d.cin;
        const T* dyrow = dy + (r * wd + c) * d.cout;
        for (std::size_t i = 0; i < d.cin; ++i) {
          axpy(xrow[i], dyrow, wblock + i * d.cout, d.cout);
        }
      }
    }
  }
  for (std::size_t p = 0; p < d.pixels(); ++p) {
    axpy(T{1}, dy + p * d.cout, db, d.cout);
  }
}

template <typename T>
void maxpool2x2_forward(const T* x, T* y, std::size_t* argmax,
                        const PoolDims& d) {
  const auto oh = static_cast<Index>(d.out_height());
  const std::size_t ow = d.out_width();
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      for (std::size_t ch = 0; ch < d.channels; ++ch) {
        // Candidates visited in row-major order; strict '>' keeps the first
        // maximal element on ties.
        std::size_t best = (2 * r * d.width + 2 * c) * d.channels + ch;
        for (std::size_t dr = 0; dr < 2; ++dr) {
          const std::size_t sr = 2 * r + dr;
          if (sr >= d.height) break;
          for (std::size_t dc = 0; dc < 2; ++dc) {
            const std::size_t sc = 2 * c + dc;
            if (sc >= d.width) break;
            const std::size_t idx = (sr * d.width + sc) * d.channels + ch;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t out = (r * ow + c) * d.channels + ch;
        y[out] = x[best];
        argmax[out] = best;
      }
    }
  }
}

template <typename T>
void maxpool2x2_backward(const T* dy, const std::size_t* argmax, T* dx,
                         const PoolDims& d) {
  // Windows are disjoint, so argmax targets never collide across outputs.
  const auto n =
      static_cast<Index>(d.out_height() * d.out_width() * d.channels);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) dx[argmax[i]] += dy[i];
}

template <typename T>
void avgpool2x2_forward(const T* x, T* y, const PoolDims& d) {
  const auto oh = static_cast<Index>(d.out_height());
  const std::size_t ow = d.out_width();
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < oh; ++r) {
    const std::size_t rows = std::min<std::size_t>(2, d.height - 2 * r);
    for (std::size_t c = 0; c < ow; ++c) {
      const std::size_t cols = std::min<std::size_t>(2, d.width - 2 * c);
      const T inv = T{1} / static_cast<T>(rows * cols);
      T* yrow = y + (r * ow + c) * d.channels;
      std::fill(yrow, yrow + d.channels, T{0});
      for (std::size_t dr = 0; dr < rows; ++dr) {
        for (std::size_t dc = 0; dc < cols; ++dc) {
          const T* xrow = x + ((2 * r + dr) * d.width + 2 * c + dc) * d.channels;
          axpy(T{1}, xrow, yrow, d.channels);
        }
      }
      for (std::size_t ch = 0; ch < d.channels; ++ch) yrow[ch] *= inv;
    }
  }
}

template <typename T>
void avgpool2x2_backward(const T* dy, T* dx, const PoolDims& d) {
  const auto oh = static_cast<Index>(d.out_height());
  const std::size_t ow = d.out_width();
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < oh; ++r) {
    const std::size_t rows = std::min<std::size_t>(2, d.height - 2 * r);
    for (std::size_t c = 0; c < ow; ++c) {
      const std::size_t cols = std::min<std::size_t>(2, d.width - 2 * c);
      const T inv = T{1} / static_cast<T>(rows * cols);
      const T* dyrow = dy + (r * ow + c) * d.channels;
      for (std::size_t dr = 0; dr < rows; ++dr) {
        for (std::size_t dc = 0; dc < cols; ++dc) {
          axpy(inv, dyrow,
               dx + ((2 * r + dr) * d.width + 2 * c + dc) * d.channels,
               d.channels);
        }
      }
    }
  }
}

template <typename T>
void matmul_accumulate(const T* a, const T* b, T* c, std::size_t m,
                       std::size_t k, std::size_t n, bool ta, bool tb) {
  const auto rows = static_cast<Index>(m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    T* crow = c + i * n;
    if (tb) {
      for (std::size_t j = 0; j < n; ++j) {
        const T* brow = b + j * k;
        T acc = 0;
        if (ta) {
          for (std::size_t q = 0; q < k; ++q) acc += a[q * m + i] * brow[q];
        } else {
          acc = dot(a + i * k, brow, k);
        }
        crow[j] += acc;
      }
    } else {
      for (std::size_t q = 0; q < k; ++q) {
        const T av = ta ? a[q * m + i] : a[i * k + q];
        axpy(av, b + q * n, crow, n);
      }
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

}  // namespace fcppn::kernels
