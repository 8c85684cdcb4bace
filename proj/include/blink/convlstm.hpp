#pragma once

#include <vector>

#include "blink/ops.hpp"

namespace blink {

// One recurrent layer. Gate order everywhere: i (input), f (forget),
// c (candidate), o (output). Peepholes read the cell state: i/f see the
// previous cell, o sees the freshly updated one.
template <typename T>
struct ConvLSTMLayer {
  int in_ch = 0, hid_ch = 0, kernel = 3;
  bool conv_peephole = false;
  Tensor<T> wxi, whi, bi;
  Tensor<T> wxf, whf, bf;
  Tensor<T> wxc, whc, bc;
  Tensor<T> wxo, who, bo;
  Tensor<T> wci, wcf, wco;  // [hid] per-channel, or [hid,hid,k,k] convolutional
};

template <typename T>
struct CellState {
  Tensor<T> h, c;
};

template <typename T>
CellState<T> init_state(int batch, int channels, int h, int w);

// Glorot kernels, zero biases except forget bias 1.0, zero peepholes.
template <typename T>
ConvLSTMLayer<T> init_convlstm(int in_ch, int hid_ch, int kernel,
                               bool conv_peephole, RngStream& rng);

// Dropout (training only) hits the candidate tanh term, never the stored
// cell state.
template <typename T>
CellState<T> cell_step(const Tensor<T>& x, const CellState<T>& state,
                       const ConvLSTMLayer<T>& p, double dropout_p, bool training,
                       RngStream& rng);

// Zero initial state per layer; layer l>0 consumes layer l-1's H each frame.
// Returns the top layer's H for every frame.
template <typename T>
std::vector<Tensor<T>> stack_forward(const std::vector<Tensor<T>>& xseq,
                                     const std::vector<ConvLSTMLayer<T>>& layers,
                                     double dropout_p, bool training,
                                     RngStream& rng);

}  // namespace blink
