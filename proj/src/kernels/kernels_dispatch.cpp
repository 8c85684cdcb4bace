#include <atomic>

#include "blink/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace blink::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::OpenMP};
}

Backend backend() { return g_backend.load(); }
void set_backend(Backend b) { g_backend.store(b); }

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

#define BLINK_DISPATCH(fn, ...)                  \
  if (backend() == Backend::OpenMP) {            \
    omp::fn(__VA_ARGS__);                        \
  } else {                                       \
    serial::fn(__VA_ARGS__);                     \
  }

template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
  BLINK_DISPATCH(matmul, a, b, c, m, k, n)
}

template <typename T>
void matmul_atb(const T* a, const T* b, T* c, int k, int m, int n) {
  BLINK_DISPATCH(matmul_atb, a, b, c, k, m, n)
}

template <typename T>
void transpose(const T* in, T* out, int m, int n) {
  BLINK_DISPATCH(transpose, in, out, m, n)
}

template <typename T>
void im2col(const T* im, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* col) {
  BLINK_DISPATCH(im2col, im, ch, h, w, kh, kw, stride, dilation, pad_h, pad_w, oh,
                 ow, col)
}

template <typename T>
void col2im(const T* col, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* im) {
  BLINK_DISPATCH(col2im, col, ch, h, w, kh, kw, stride, dilation, pad_h, pad_w, oh,
                 ow, im)
}

template <typename T>
void maxpool2_forward(const T* in, int planes, int h, int w, T* out, int32_t* idx) {
  BLINK_DISPATCH(maxpool2_forward, in, planes, h, w, out, idx)
}

template <typename T>
void maxpool2_backward(const T* dout, const int32_t* idx, int planes, int h, int w,
                       T* din) {
  BLINK_DISPATCH(maxpool2_backward, dout, idx, planes, h, w, din)
}

#define BLINK_INSTANTIATE_DISPATCH(T)                                             \
  template void matmul<T>(const T*, const T*, T*, int, int, int);                 \
  template void matmul_atb<T>(const T*, const T*, T*, int, int, int);             \
  template void transpose<T>(const T*, T*, int, int);                             \
  template void im2col<T>(const T*, int, int, int, int, int, int, int, int, int,  \
                          int, int, T*);                                          \
  template void col2im<T>(const T*, int, int, int, int, int, int, int, int, int,  \
                          int, int, T*);                                          \
  template void maxpool2_forward<T>(const T*, int, int, int, T*, int32_t*);       \
  template void maxpool2_backward<T>(const T*, const int32_t*, int, int, int, T*);

BLINK_INSTANTIATE_DISPATCH(float)
BLINK_INSTANTIATE_DISPATCH(double)

}  // namespace blink::kernels
