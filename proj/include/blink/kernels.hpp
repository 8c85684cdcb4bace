#pragma once

#include <cstdint>

namespace blink::kernels {

// The OpenMP backend parallelizes over independent output rows/planes and
// keeps each element's accumulation order identical to the serial reference,
// so both backends produce bit-identical results for the same inputs.
enum class Backend { Serial, OpenMP };

Backend backend();
void set_backend(Backend b);
bool openmp_compiled();
int max_threads();

// C[m,n] = A[m,k] * B[k,n]
template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n);

// C[m,n] = A^T * B with A[k,m], B[k,n]
template <typename T>
void matmul_atb(const T* a, const T* b, T* c, int k, int m, int n);

// out[n,m] = in[m,n]^T
template <typename T>
void transpose(const T* in, T* out, int m, int n);

// Single image, channels-first. col has rows ch*kh*kw and columns oh*ow.
template <typename T>
void im2col(const T* im, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* col);

// Scatter-accumulate of col back onto the image (+= into im).
template <typename T>
void col2im(const T* col, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* im);

// 2x2 stride-2 max pooling over `planes` contiguous h*w planes. Ties take
// the first maximum in scan order. idx stores the winning offset within the
// plane for the backward pass.
template <typename T>
void maxpool2_forward(const T* in, int planes, int h, int w, T* out, int32_t* idx);

// += routing of output gradients back through stored indices.
template <typename T>
void maxpool2_backward(const T* dout, const int32_t* idx, int planes, int h, int w,
                       T* din);

namespace serial {
template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n);
template <typename T>
void matmul_atb(const T* a, const T* b, T* c, int k, int m, int n);
template <typename T>
void transpose(const T* in, T* out, int m, int n);
template <typename T>
void im2col(const T* im, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* col);
template <typename T>
void col2im(const T* col, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* im);
template <typename T>
void maxpool2_forward(const T* in, int planes, int h, int w, T* out, int32_t* idx);
template <typename T>
void maxpool2_backward(const T* dout, const int32_t* idx, int planes, int h, int w,
                       T* din);
}  // namespace serial

namespace omp {
template <typename T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n);
template <typename T>
void matmul_atb(const T* a, const T* b, T* c, int k, int m, int n);
template <typename T>
void transpose(const T* in, T* out, int m, int n);
template <typename T>
void im2col(const T* im, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* col);
template <typename T>
void col2im(const T* col, int ch, int h, int w, int kh, int kw, int stride,
            int dilation, int pad_h, int pad_w, int oh, int ow, T* im);
template <typename T>
void maxpool2_forward(const T* in, int planes, int h, int w, T* out, int32_t* idx);
template <typename T>
void maxpool2_backward(const T* dout, const int32_t* idx, int planes, int h, int w,
                       T* din);
}  // namespace omp

}  // namespace blink::kernels
