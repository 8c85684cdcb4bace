#include "blink/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "blink/kernels.hpp"

namespace blink {

namespace {

template <typename T>
bool grad_wanted(std::initializer_list<const Tensor<T>*> ins) {
  if (!Tape<T>::current()) return false;
  for (const Tensor<T>* t : ins)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

// Names the output, runs the finite scan when enabled, and records the
// adjoint if any input tracks gradients.
template <typename T, typename F>
void finish(Tensor<T>& out, const char* name, bool wanted, F&& fn) {
  out.set_name(name);
  if (finite_checks()) check_finite(out, name);
  if (!wanted) return;
  out.set_requires_grad(true);
  out.mark_result();
  Tape<T>::current()->record(out.impl(), std::forward<F>(fn));
}

}  // namespace

int conv_out_extent(int in, int kernel, int stride, int dilation, int pad) {
  const int eff = dilation * (kernel - 1) + 1;
  return (in + 2 * pad - eff) / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, int stride, int dilation, Padding pad) {
  require(input.defined() && kernel.defined(), "conv2d: undefined tensor");
  require(input.ndim() == 4,
          "conv2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
  require(kernel.ndim() == 4,
          "conv2d: kernel must be [K,C,kh,kw], got " + shape_str(kernel.shape()));
  require(stride >= 1 && dilation >= 1, "conv2d: stride and dilation must be >= 1");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const int K = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  require(kernel.dim(1) == C, "conv2d: kernel expects " +
                                  std::to_string(kernel.dim(1)) + " channels, input has " +
                                  std::to_string(C));
  if (bias.defined())
    require(bias.numel() == K, "conv2d: bias must have one entry per output channel");
  int ph = 0, pw = 0;
  if (pad == Padding::Same) {
    require(dilation * (kh - 1) % 2 == 0 && dilation * (kw - 1) % 2 == 0,
            "conv2d: same padding needs an odd effective kernel");
    ph = dilation * (kh - 1) / 2;
    pw = dilation * (kw - 1) / 2;
  }
  const int OH = conv_out_extent(H, kh, stride, dilation, ph);
  const int OW = conv_out_extent(W, kw, stride, dilation, pw);
  require(OH >= 1 && OW >= 1,
          "conv2d: kernel does not fit input " + shape_str(input.shape()));

  const int ck2 = C * kh * kw;
  const int ohw = OH * OW;
  Tensor<T> out({N, K, OH, OW});
  {
    std::vector<T> col(static_cast<size_t>(ck2) * ohw);
    for (int n = 0; n < N; ++n) {
      const T* im = input.data() + static_cast<int64_t>(n) * C * H * W;
      T* dst = out.data() + static_cast<int64_t>(n) * K * ohw;
      kernels::im2col(im, C, H, W, kh, kw, stride, dilation, ph, pw, OH, OW,
                      col.data());
      kernels::matmul(kernel.data(), col.data(), dst, K, ck2, ohw);
      if (bias.defined()) {
        const T* bp = bias.data();
        for (int k = 0; k < K; ++k) {
          T* row = dst + static_cast<int64_t>(k) * ohw;
          for (int j = 0; j < ohw; ++j) row[j] += bp[k];
        }
      }
    }
  }

  const bool wanted = grad_wanted<T>({&input, &kernel, &bias});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    const bool need_k = kernel.requires_grad();
    const bool need_x = input.requires_grad();
    const bool need_b = bias.defined() && bias.requires_grad();
    // The forward col buffer is not kept; recompute it per sample.
    std::vector<T> col(static_cast<size_t>(ck2) * ohw);
    std::vector<T> colT, tmp;
    if (need_k) {
      colT.resize(static_cast<size_t>(ohw) * ck2);
      tmp.resize(static_cast<size_t>(K) * ck2);
    }
    T* kg = need_k ? kernel.grad() : nullptr;
    T* xg = need_x ? input.grad() : nullptr;
    T* bg = need_b ? bias.grad() : nullptr;
    for (int n = 0; n < N; ++n) {
      const T* dY = og + static_cast<int64_t>(n) * K * ohw;
      if (need_k) {
        kernels::im2col(input.data() + static_cast<int64_t>(n) * C * H * W, C, H, W,
                        kh, kw, stride, dilation, ph, pw, OH, OW, col.data());
        kernels::transpose(col.data(), colT.data(), ck2, ohw);
        kernels::matmul(dY, colT.data(), tmp.data(), K, ohw, ck2);
        for (size_t i = 0; i < tmp.size(); ++i) kg[i] += tmp[i];
      }
      if (need_x) {
        kernels::matmul_atb(kernel.data(), dY, col.data(), K, ck2, ohw);
        kernels::col2im(col.data(), C, H, W, kh, kw, stride, dilation, ph, pw, OH,
                        OW, xg + static_cast<int64_t>(n) * C * H * W);
      }
      if (need_b) {
        for (int k = 0; k < K; ++k) {
          const T* row = dY + static_cast<int64_t>(k) * ohw;
          T s = T(0);
          for (int j = 0; j < ohw; ++j) s += row[j];
          bg[k] += s;
        }
      }
    }
  };
  finish(out, "conv2d", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input) {
  require(input.defined() && input.ndim() == 4,
          "maxpool2: input must be [N,C,H,W]");
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  require(H % 2 == 0 && W % 2 == 0,
          "maxpool2: spatial extents must be even, got " + shape_str(input.shape()));
  Tensor<T> out({N, C, H / 2, W / 2});
  auto idx = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(out.numel()));
  kernels::maxpool2_forward(input.data(), N * C, H, W, out.data(), idx->data());

  const bool wanted = grad_wanted<T>({&input});
  auto fn = [=]() mutable {
    kernels::maxpool2_backward(out.grad(), idx->data(), N * C, H, W, input.grad());
  };
  finish(out, "maxpool2", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(x.defined() && w.defined(), "dense: undefined tensor");
  require(x.ndim() == 2 && w.ndim() == 2,
          "dense: x must be [N,D] and w [D,M], got " + shape_str(x.shape()) + " and " +
              shape_str(w.shape()));
  require(x.dim(1) == w.dim(0), "dense: inner extents differ, " + shape_str(x.shape()) +
                                    " vs " + shape_str(w.shape()));
  const int N = x.dim(0), D = x.dim(1), M = w.dim(1);
  if (b.defined()) require(b.numel() == M, "dense: bias must have one entry per output");
  Tensor<T> out({N, M});
  kernels::matmul(x.data(), w.data(), out.data(), N, D, M);
  if (b.defined()) {
    const T* bp = b.data();
    for (int n = 0; n < N; ++n) {
      T* row = out.data() + static_cast<int64_t>(n) * M;
      for (int m = 0; m < M; ++m) row[m] += bp[m];
    }
  }

  const bool wanted = grad_wanted<T>({&x, &w, &b});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    if (w.requires_grad()) {
      std::vector<T> tmp(static_cast<size_t>(D) * M);
      kernels::matmul_atb(x.data(), og, tmp.data(), N, D, M);
      T* wg = w.grad();
      for (size_t i = 0; i < tmp.size(); ++i) wg[i] += tmp[i];
    }
    if (x.requires_grad()) {
      std::vector<T> wT(static_cast<size_t>(M) * D), tmp(static_cast<size_t>(N) * D);
      kernels::transpose(w.data(), wT.data(), D, M);
      kernels::matmul(og, wT.data(), tmp.data(), N, M, D);
      T* xg = x.grad();
      for (size_t i = 0; i < tmp.size(); ++i) xg[i] += tmp[i];
    }
    if (b.defined() && b.requires_grad()) {
      T* bg = b.grad();
      for (int n = 0; n < N; ++n) {
        const T* row = og + static_cast<int64_t>(n) * M;
        for (int m = 0; m < M; ++m) bg[m] += row[m];
      }
    }
  };
  finish(out, "dense", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind) {
  require(x.defined(), "activation: undefined tensor");
  Tensor<T> out(x.shape());
  const T* xp = x.data();
  T* yp = out.data();
  const int64_t n = x.numel();
  switch (kind) {
    case Act::Sigmoid:
      for (int64_t i = 0; i < n; ++i) yp[i] = T(1) / (T(1) + std::exp(-xp[i]));
      break;
    case Act::Tanh:
      for (int64_t i = 0; i < n; ++i) yp[i] = std::tanh(xp[i]);
      break;
    case Act::Relu:
      for (int64_t i = 0; i < n; ++i) yp[i] = xp[i] > T(0) ? xp[i] : T(0);
      break;
  }
  const char* name = kind == Act::Sigmoid  ? "sigmoid"
                     : kind == Act::Tanh   ? "tanh"
                                           : "relu";
  const bool wanted = grad_wanted<T>({&x});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    const T* y = out.data();
    const T* xv = x.data();
    T* xg = x.grad();
    switch (kind) {
      case Act::Sigmoid:
        for (int64_t i = 0; i < n; ++i) xg[i] += og[i] * y[i] * (T(1) - y[i]);
        break;
      case Act::Tanh:
        for (int64_t i = 0; i < n; ++i) xg[i] += og[i] * (T(1) - y[i] * y[i]);
        break;
      case Act::Relu:
        for (int64_t i = 0; i < n; ++i)
          if (xv[i] > T(0)) xg[i] += og[i];
        break;
    }
  };
  finish(out, name, wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> softmax_last(const Tensor<T>& x) {
  require(x.defined() && x.ndim() >= 1, "softmax_last: undefined or rank-0 tensor");
  const int C = x.dim(x.ndim() - 1);
  const int64_t rows = x.numel() / C;
  Tensor<T> out(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * C;
    T* yr = out.data() + r * C;
    T m = xr[0];
    for (int j = 1; j < C; ++j) m = std::max(m, xr[j]);
    T s = T(0);
    for (int j = 0; j < C; ++j) {
      yr[j] = std::exp(xr[j] - m);
      s += yr[j];
    }
    const T inv = T(1) / s;
    for (int j = 0; j < C; ++j) yr[j] *= inv;
  }

  const bool wanted = grad_wanted<T>({&x});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    const T* y = out.data();
    T* xg = x.grad();
    for (int64_t r = 0; r < rows; ++r) {
      const T* gr = og + r * C;
      const T* yr = y + r * C;
      T dot = T(0);
      for (int j = 0; j < C; ++j) dot += gr[j] * yr[j];
      T* xr = xg + r * C;
      for (int j = 0; j < C; ++j) xr[j] += yr[j] * (gr[j] - dot);
    }
  };
  finish(out, "softmax", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, RngStream& rng) {
  require(x.defined(), "dropout: undefined tensor");
  if (!(p >= 0.0 && p < 1.0))
    throw std::invalid_argument("dropout: p must be in [0,1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  const T keep_scale = T(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(static_cast<size_t>(x.numel()));
  Tensor<T> out(x.shape());
  const T* xp = x.data();
  T* yp = out.data();
  for (int64_t i = 0; i < x.numel(); ++i) {
    (*mask)[static_cast<size_t>(i)] = rng.bernoulli(p) ? T(0) : keep_scale;
    yp[i] = xp[i] * (*mask)[static_cast<size_t>(i)];
  }

  const bool wanted = grad_wanted<T>({&x});
  const int64_t n = x.numel();
  auto fn = [=]() mutable {
    const T* og = out.grad();
    T* xg = x.grad();
    for (int64_t i = 0; i < n; ++i) xg[i] += og[i] * (*mask)[static_cast<size_t>(i)];
  };
  finish(out, "dropout", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.defined() && b.defined(), "add: undefined tensor");
  require(a.shape() == b.shape(), "add: shapes differ, " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  Tensor<T> out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];

  const bool wanted = grad_wanted<T>({&a, &b});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    if (a.requires_grad()) {
      T* ag = a.grad();
      for (int64_t i = 0; i < n; ++i) ag[i] += og[i];
    }
    if (b.requires_grad()) {
      T* bg = b.grad();
      for (int64_t i = 0; i < n; ++i) bg[i] += og[i];
    }
  };
  finish(out, "add", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.defined() && b.defined(), "mul: undefined tensor");
  require(a.shape() == b.shape(), "mul: shapes differ, " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  Tensor<T> out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];

  const bool wanted = grad_wanted<T>({&a, &b});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    if (a.requires_grad()) {
      T* ag = a.grad();
      const T* bv = b.data();
      for (int64_t i = 0; i < n; ++i) ag[i] += og[i] * bv[i];
    }
    if (b.requires_grad()) {
      T* bg = b.grad();
      const T* av = a.data();
      for (int64_t i = 0; i < n; ++i) bg[i] += og[i] * av[i];
    }
  };
  finish(out, "mul", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  require(a.defined(), "scale: undefined tensor");
  Tensor<T> out(a.shape());
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;

  const bool wanted = grad_wanted<T>({&a});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    T* ag = a.grad();
    for (int64_t i = 0; i < n; ++i) ag[i] += og[i] * s;
  };
  finish(out, "scale", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> channel_scale(const Tensor<T>& x, const Tensor<T>& w) {
  require(x.defined() && w.defined(), "channel_scale: undefined tensor");
  require(x.ndim() == 4, "channel_scale: x must be [N,C,H,W]");
  const int N = x.dim(0), C = x.dim(1);
  const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  require(w.numel() == C, "channel_scale: w must have one entry per channel");
  Tensor<T> out(x.shape());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* xr = x.data() + (static_cast<int64_t>(n) * C + c) * hw;
      T* yr = out.data() + (static_cast<int64_t>(n) * C + c) * hw;
      const T wv = w.data()[c];
      for (int64_t i = 0; i < hw; ++i) yr[i] = xr[i] * wv;
    }

  const bool wanted = grad_wanted<T>({&x, &w});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    if (x.requires_grad()) {
      T* xg = x.grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
          const T wv = w.data()[c];
          for (int64_t i = 0; i < hw; ++i) xg[base + i] += og[base + i] * wv;
        }
    }
    if (w.requires_grad()) {
      T* wg = w.grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
          const T* xr = x.data() + base;
          T s = T(0);
          for (int64_t i = 0; i < hw; ++i) s += og[base + i] * xr[i];
          wg[c] += s;
        }
    }
  };
  finish(out, "channel_scale", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> mask_mul(const Tensor<T>& x, const Tensor<T>& mask) {
  require(x.defined() && mask.defined(), "mask_mul: undefined tensor");
  require(x.ndim() == 4 && mask.ndim() == 4, "mask_mul: operands must be rank 4");
  require(mask.dim(0) == x.dim(0) && mask.dim(1) == 1 && mask.dim(2) == x.dim(2) &&
              mask.dim(3) == x.dim(3),
          "mask_mul: mask must be [N,1,H,W] matching x " + shape_str(x.shape()) +
              ", got " + shape_str(mask.shape()));
  const int N = x.dim(0), C = x.dim(1);
  const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out(x.shape());
  for (int n = 0; n < N; ++n) {
    const T* mr = mask.data() + static_cast<int64_t>(n) * hw;
    for (int c = 0; c < C; ++c) {
      const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) out.data()[base + i] = x.data()[base + i] * mr[i];
    }
  }

  const bool wanted = grad_wanted<T>({&x, &mask});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    if (x.requires_grad()) {
      T* xg = x.grad();
      for (int n = 0; n < N; ++n) {
        const T* mr = mask.data() + static_cast<int64_t>(n) * hw;
        for (int c = 0; c < C; ++c) {
          const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
          for (int64_t i = 0; i < hw; ++i) xg[base + i] += og[base + i] * mr[i];
        }
      }
    }
    if (mask.requires_grad()) {
      T* mg = mask.grad();
      for (int n = 0; n < N; ++n) {
        T* mr = mg + static_cast<int64_t>(n) * hw;
        for (int c = 0; c < C; ++c) {
          const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
          for (int64_t i = 0; i < hw; ++i) mr[i] += og[base + i] * x.data()[base + i];
        }
      }
    }
  };
  finish(out, "mask_mul", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(x.defined(), "reshape: undefined tensor");
  Tensor<T> out(std::move(shape));
  require(out.numel() == x.numel(), "reshape: cannot view " + shape_str(x.shape()) +
                                        " as " + shape_str(out.shape()));
  std::copy(x.data(), x.data() + x.numel(), out.data());

  const bool wanted = grad_wanted<T>({&x});
  const int64_t n = x.numel();
  auto fn = [=]() mutable {
    const T* og = out.grad();
    T* xg = x.grad();
    for (int64_t i = 0; i < n; ++i) xg[i] += og[i];
  };
  finish(out, "reshape", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> select0(const Tensor<T>& x, int i) {
  require(x.defined() && x.ndim() >= 1, "select0: undefined or rank-0 tensor");
  require(i >= 0 && i < x.dim(0), "select0: index " + std::to_string(i) +
                                      " out of range for " + shape_str(x.shape()));
  Shape rest(x.shape().begin() + 1, x.shape().end());
  if (rest.empty()) rest = {1};
  Tensor<T> out(rest);
  const int64_t step = out.numel();
  std::copy(x.data() + i * step, x.data() + (i + 1) * step, out.data());

  const bool wanted = grad_wanted<T>({&x});
  auto fn = [=]() mutable {
    const T* og = out.grad();
    T* xg = x.grad() + i * step;
    for (int64_t j = 0; j < step; ++j) xg[j] += og[j];
  };
  finish(out, "select0", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> stack0(const std::vector<Tensor<T>>& xs) {
  require(!xs.empty(), "stack0: empty input list");
  for (const auto& t : xs) {
    require(t.defined(), "stack0: undefined tensor");
    require(t.shape() == xs[0].shape(), "stack0: shapes differ, " +
                                            shape_str(xs[0].shape()) + " vs " +
                                            shape_str(t.shape()));
  }
  Shape shape;
  shape.push_back(static_cast<int>(xs.size()));
  for (int e : xs[0].shape()) shape.push_back(e);
  Tensor<T> out(std::move(shape));
  const int64_t step = xs[0].numel();
  for (size_t s = 0; s < xs.size(); ++s)
    std::copy(xs[s].data(), xs[s].data() + step, out.data() + s * step);

  bool wanted = false;
  if (Tape<T>::current())
    for (const auto& t : xs)
      if (t.requires_grad()) wanted = true;
  auto fn = [=]() mutable {
    const T* og = out.grad();
    for (size_t s = 0; s < xs.size(); ++s) {
      Tensor<T> t = xs[s];
      if (!t.requires_grad()) continue;
      T* xg = t.grad();
      const T* gr = og + s * step;
      for (int64_t j = 0; j < step; ++j) xg[j] += gr[j];
    }
  };
  finish(out, "stack0", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  require(x.defined(), "sum_all: undefined tensor");
  T s = T(0);
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) s += x.data()[i];
  Tensor<T> out = Tensor<T>::scalar(s);

  const bool wanted = grad_wanted<T>({&x});
  auto fn = [=]() mutable {
    const T g = out.grad()[0];
    T* xg = x.grad();
    for (int64_t i = 0; i < n; ++i) xg[i] += g;
  };
  finish(out, "sum_all", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> cross_entropy_mean(const Tensor<T>& probs, const std::vector<int>& labels) {
  require(probs.defined() && probs.ndim() == 2,
          "cross_entropy_mean: probs must be [N,C]");
  const int N = probs.dim(0), C = probs.dim(1);
  require(static_cast<int>(labels.size()) == N,
          "cross_entropy_mean: expected " + std::to_string(N) + " labels, got " +
              std::to_string(labels.size()));
  for (int l : labels)
    require(l >= 0 && l < C, "cross_entropy_mean: label " + std::to_string(l) +
                                 " out of range for " + std::to_string(C) + " classes");
  const T clamp = T(1e-12);
  T s = T(0);
  for (int i = 0; i < N; ++i)
    s -= std::log(std::max(probs.data()[static_cast<int64_t>(i) * C + labels[i]], clamp));
  Tensor<T> out = Tensor<T>::scalar(s / T(N));

  const bool wanted = grad_wanted<T>({&probs});
  auto fn = [=]() mutable {
    const T g = out.grad()[0];
    T* pg = probs.grad();
    for (int i = 0; i < N; ++i) {
      const int64_t at = static_cast<int64_t>(i) * C + labels[i];
      const T p = probs.data()[at];
      if (p > clamp) pg[at] -= g / (T(N) * p);
    }
  };
  finish(out, "cross_entropy", wanted, std::move(fn));
  return out;
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, RngStream& rng, T lo, T hi) {
  Tensor<T> t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
  return t;
}

template <typename T>
Tensor<T> glorot_tensor(Shape shape, int fan_in, int fan_out, RngStream& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  return uniform_tensor<T>(std::move(shape), rng, static_cast<T>(-limit),
                           static_cast<T>(limit));
}

#define BLINK_INSTANTIATE_OPS(T)                                                      \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                               int, int, Padding);                                   \
  template Tensor<T> maxpool2<T>(const Tensor<T>&);                                  \
  template Tensor<T> dense<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> activation<T>(const Tensor<T>&, Act);                           \
  template Tensor<T> softmax_last<T>(const Tensor<T>&);                              \
  template Tensor<T> dropout<T>(const Tensor<T>&, double, bool, RngStream&);         \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                  \
  template Tensor<T> channel_scale<T>(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> mask_mul<T>(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                            \
  template Tensor<T> select0<T>(const Tensor<T>&, int);                              \
  template Tensor<T> stack0<T>(const std::vector<Tensor<T>>&);                       \
  template Tensor<T> sum_all<T>(const Tensor<T>&);                                   \
  template Tensor<T> cross_entropy_mean<T>(const Tensor<T>&, const std::vector<int>&); \
  template Tensor<T> uniform_tensor<T>(Shape, RngStream&, T, T);                     \
  template Tensor<T> glorot_tensor<T>(Shape, int, int, RngStream&);

BLINK_INSTANTIATE_OPS(float)
BLINK_INSTANTIATE_OPS(double)

}  // namespace blink
