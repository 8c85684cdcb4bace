#include <algorithm>

#include "blink/kernels.hpp"

// OpenMP backend. Work is split over independent output rows (matmul), col
// rows (im2col), input channels (col2im) and planes (pooling); the per-
// element accumulation order matches the serial reference, so results are
// bit-identical for any thread count.

namespace blink::kernels::omp {

template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<int64_t>(i) * n;
    std::fill(crow, crow + n, T(0));
    const T* arow = a + static_cast<int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void matmul_atb(const T* a, const T* b, T* c, int k, int m, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<int64_t>(i) * n;
    std::fill(crow, crow + n, T(0));
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<int64_t>(p) * m + i];
      const T* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void transpose(const T* in, T* out, int m, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<int64_t>(j) * m + i] = in[static_cast<int64_t>(i) * n + j];
}

template <typename T>
void im2col(const T* im, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* col) {
  const int span = kh * kw;
  const int rows = ch * span;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < rows; ++c) {
    const int ic = c / span;
    const int ky = (c % span) / kw;
    const int kx = c % kw;
    const T* src = im + static_cast<int64_t>(ic) * h * w;
    T* dst = col + static_cast<int64_t>(c) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const int iy = oy * stride + ky * dilation - pad_h;
      if (iy < 0 || iy >= h) {
        std::fill(dst, dst + ow, T(0));
        dst += ow;
        continue;
      }
      const T* srow = src + static_cast<int64_t>(iy) * w;
      for (int ox = 0; ox < ow; ++ox) {
        const int ix = ox * stride + kx * dilation - pad_w;
        *dst++ = (ix >= 0 && ix < w) ? srow[ix] : T(0);
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* im) {
  const int span = kh * kw;
  // Each input channel's scatter region is disjoint, so channels can run in
  // parallel while the in-channel accumulation order stays serial.
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < ch; ++ic) {
    T* dst = im + static_cast<int64_t>(ic) * h * w;
    for (int s = 0; s < span; ++s) {
      const int ky = s / kw;
      const int kx = s % kw;
      const T* src = col + static_cast<int64_t>(ic * span + s) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        const int iy = oy * stride + ky * dilation - pad_h;
        if (iy < 0 || iy >= h) {
          src += ow;
          continue;
        }
        T* drow = dst + static_cast<int64_t>(iy) * w;
        for (int ox = 0; ox < ow; ++ox) {
          const int ix = ox * stride + kx * dilation - pad_w;
          if (ix >= 0 && ix < w) drow[ix] += src[ox];
        }
        src += ow;
      }
    }
  }
}

template <typename T>
void maxpool2_forward(const T* in, int planes, int h, int w, T* out, int32_t* idx) {
  const int oh = h / 2;
  const int ow = w / 2;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const T* src = in + static_cast<int64_t>(p) * h * w;
    T* dst = out + static_cast<int64_t>(p) * oh * ow;
    int32_t* id = idx + static_cast<int64_t>(p) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const int base = (oy * 2) * w + ox * 2;
        int best = base;
        T bv = src[base];
        const int cand[3] = {base + 1, base + w, base + w + 1};
        for (int c : cand) {
          if (src[c] > bv) {
            bv = src[c];
            best = c;
          }
        }
        dst[oy * ow + ox] = bv;
        id[oy * ow + ox] = best;
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const T* dout, const int32_t* idx, int planes, int h, int w,
                       T* din) {
  const int oh = h / 2;
  const int ow = w / 2;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const T* gsrc = dout + static_cast<int64_t>(p) * oh * ow;
    const int32_t* id = idx + static_cast<int64_t>(p) * oh * ow;
    T* gdst = din + static_cast<int64_t>(p) * h * w;
    for (int i = 0; i < oh * ow; ++i) gdst[id[i]] += gsrc[i];
  }
}

#define BLINK_INSTANTIATE_OMP(T)                                                  \
  template void matmul<T>(const T*, const T*, T*, int, int, int);                 \
  template void matmul_atb<T>(const T*, const T*, T*, int, int, int);             \
  template void transpose<T>(const T*, T*, int, int);                             \
  template void im2col<T>(const T*, int, int, int, int, int, int, int, int, int,  \
                          int, int, T*);                                          \
  template void col2im<T>(const T*, int, int, int, int, int, int, int, int, int,  \
                          int, int, T*);                                          \
  template void maxpool2_forward<T>(const T*, int, int, int, T*, int32_t*);       \
  template void maxpool2_backward<T>(const T*, const int32_t*, int, int, int, T*);

BLINK_INSTANTIATE_OMP(float)
BLINK_INSTANTIATE_OMP(double)

}  // namespace blink::kernels::omp
