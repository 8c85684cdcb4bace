#pragma once

#include <vector>

#include "blink/rng.hpp"
#include "blink/tensor.hpp"

namespace blink {

enum class Padding { Same, Valid };
enum class Act { Sigmoid, Tanh, Relu };

// Output spatial extent of a dilated convolution.
int conv_out_extent(int in, int kernel, int stride, int dilation, int pad);

// input [N,C,H,W], kernel [K,C,kh,kw], bias [K] (pass an undefined Tensor
// for no bias). Padding::Same keeps H,W at stride 1 and requires odd
// effective kernels.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel,
                 const Tensor<T>& bias, int stride, int dilation, Padding pad);

// 2x2 stride-2 max pooling; H and W must be even.
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input);

// x [N,D] * w [D,M] + b [M]
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) { return activation(x, Act::Sigmoid); }
template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) { return activation(x, Act::Tanh); }
template <typename T>
Tensor<T> relu(const Tensor<T>& x) { return activation(x, Act::Relu); }

// Stabilized softmax along the last axis.
template <typename T>
Tensor<T> softmax_last(const Tensor<T>& x);

// Inverted dropout: survivors scaled by 1/(1-p). Identity when training is
// false or p == 0. Rejects p outside [0,1).
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, RngStream& rng);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s);

// x [N,C,H,W] scaled per channel by w [C].
template <typename T>
Tensor<T> channel_scale(const Tensor<T>& x, const Tensor<T>& w);

// x [N,C,H,W] * mask [N,1,H,W], mask broadcast over channels.
template <typename T>
Tensor<T> mask_mul(const Tensor<T>& x, const Tensor<T>& mask);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Slice index i off axis 0.
template <typename T>
Tensor<T> select0(const Tensor<T>& x, int i);

// Stack equal-shaped tensors into a new leading axis.
template <typename T>
Tensor<T> stack0(const std::vector<Tensor<T>>& xs);

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x);

// Mean over rows of -log(probs[i, labels[i]]), log clamped at 1e-12.
template <typename T>
Tensor<T> cross_entropy_mean(const Tensor<T>& probs, const std::vector<int>& labels);

// Plain initialization helpers (not taped).
template <typename T>
Tensor<T> uniform_tensor(Shape shape, RngStream& rng, T lo, T hi);
template <typename T>
Tensor<T> glorot_tensor(Shape shape, int fan_in, int fan_out, RngStream& rng);

}  // namespace blink
