#include "blink/convlstm.hpp"

namespace blink {

template <typename T>
CellState<T> init_state(int batch, int channels, int h, int w) {
  require(batch > 0 && channels > 0 && h > 0 && w > 0,
          "init_state: extents must be positive");
  return {Tensor<T>::zeros({batch, channels, h, w}),
          Tensor<T>::zeros({batch, channels, h, w})};
}

template <typename T>
ConvLSTMLayer<T> init_convlstm(int in_ch, int hid_ch, int kernel,
                               bool conv_peephole, RngStream& rng) {
  require(in_ch > 0 && hid_ch > 0 && kernel >= 1 && kernel % 2 == 1,
          "init_convlstm: kernel must be odd and channels positive");
  ConvLSTMLayer<T> p;
  p.in_ch = in_ch;
  p.hid_ch = hid_ch;
  p.kernel = kernel;
  p.conv_peephole = conv_peephole;
  const int k2 = kernel * kernel;
  auto xk = [&]() {
    return glorot_tensor<T>({hid_ch, in_ch, kernel, kernel}, in_ch * k2, hid_ch * k2,
                            rng);
  };
  auto hk = [&]() {
    return glorot_tensor<T>({hid_ch, hid_ch, kernel, kernel}, hid_ch * k2,
                            hid_ch * k2, rng);
  };
  auto bias = [&](T v) { return Tensor<T>::full({hid_ch}, v); };
  auto peep = [&]() {
    if (conv_peephole) return Tensor<T>::zeros({hid_ch, hid_ch, kernel, kernel});
    return Tensor<T>::zeros({hid_ch});
  };
  p.wxi = xk(); p.whi = hk(); p.bi = bias(T(0));
  p.wxf = xk(); p.whf = hk(); p.bf = bias(T(1));
  p.wxc = xk(); p.whc = hk(); p.bc = bias(T(0));
  p.wxo = xk(); p.who = hk(); p.bo = bias(T(0));
  p.wci = peep(); p.wcf = peep(); p.wco = peep();
  return p;
}

template <typename T>
CellState<T> cell_step(const Tensor<T>& x, const CellState<T>& state,
                       const ConvLSTMLayer<T>& p, double dropout_p, bool training,
                       RngStream& rng) {
  require(x.defined() && x.ndim() == 4, "cell_step: input must be [N,C,h,w]");
  require(x.dim(1) == p.in_ch, "cell_step: input has " + std::to_string(x.dim(1)) +
                                   " channels, layer expects " +
                                   std::to_string(p.in_ch));
  require(state.h.defined() && state.h.shape() == state.c.shape(),
          "cell_step: H and C shapes differ");
  require(state.h.dim(0) == x.dim(0) && state.h.dim(1) == p.hid_ch &&
              state.h.dim(2) == x.dim(2) && state.h.dim(3) == x.dim(3),
          "cell_step: state shape " + shape_str(state.h.shape()) +
              " does not match input " + shape_str(x.shape()));

  const Tensor<T> none;
  auto xconv = [&](const Tensor<T>& w, const Tensor<T>& b) {
    return conv2d(x, w, b, 1, 1, Padding::Same);
  };
  auto hconv = [&](const Tensor<T>& w) {
    return conv2d(state.h, w, none, 1, 1, Padding::Same);
  };
  auto peep = [&](const Tensor<T>& w, const Tensor<T>& c) {
    if (p.conv_peephole) return conv2d(c, w, none, 1, 1, Padding::Same);
    return channel_scale(c, w);
  };

  Tensor<T> i_t =
      sigmoid(add(add(xconv(p.wxi, p.bi), hconv(p.whi)), peep(p.wci, state.c)));
  Tensor<T> f_t =
      sigmoid(add(add(xconv(p.wxf, p.bf), hconv(p.whf)), peep(p.wcf, state.c)));
  Tensor<T> g = tanh_op(add(xconv(p.wxc, p.bc), hconv(p.whc)));
  g = dropout(g, dropout_p, training, rng);
  Tensor<T> c_t = add(mul(f_t, state.c), mul(i_t, g));
  Tensor<T> o_t =
      sigmoid(add(add(xconv(p.wxo, p.bo), hconv(p.who)), peep(p.wco, c_t)));
  Tensor<T> h_t = mul(o_t, tanh_op(c_t));
  return {h_t, c_t};
}

template <typename T>
std::vector<Tensor<T>> stack_forward(const std::vector<Tensor<T>>& xseq,
                                     const std::vector<ConvLSTMLayer<T>>& layers,
                                     double dropout_p, bool training,
                                     RngStream& rng) {
  require(!xseq.empty(), "stack_forward: empty sequence");
  require(!layers.empty(), "stack_forward: no layers");
  for (size_t l = 1; l < layers.size(); ++l)
    require(layers[l].in_ch == layers[l - 1].hid_ch,
            "stack_forward: layer " + std::to_string(l) + " expects " +
                std::to_string(layers[l].in_ch) + " input channels, got " +
                std::to_string(layers[l - 1].hid_ch));
  const Tensor<T>& x0 = xseq[0];
  require(x0.ndim() == 4, "stack_forward: frames must be [N,C,h,w]");
  std::vector<CellState<T>> states;
  states.reserve(layers.size());
  for (const auto& layer : layers)
    states.push_back(
        init_state<T>(x0.dim(0), layer.hid_ch, x0.dim(2), x0.dim(3)));
  std::vector<Tensor<T>> out;
  out.reserve(xseq.size());
  for (const auto& frame : xseq) {
    Tensor<T> cur = frame;
    for (size_t l = 0; l < layers.size(); ++l) {
      states[l] = cell_step(cur, states[l], layers[l], dropout_p, training, rng);
      cur = states[l].h;
    }
    out.push_back(cur);
  }
  return out;
}

#define BLINK_INSTANTIATE_CONVLSTM(T)                                           \
  template CellState<T> init_state<T>(int, int, int, int);                      \
  template ConvLSTMLayer<T> init_convlstm<T>(int, int, int, bool, RngStream&);  \
  template CellState<T> cell_step<T>(const Tensor<T>&, const CellState<T>&,     \
                                     const ConvLSTMLayer<T>&, double, bool,     \
                                     RngStream&);                               \
  template std::vector<Tensor<T>> stack_forward<T>(                             \
      const std::vector<Tensor<T>>&, const std::vector<ConvLSTMLayer<T>>&,      \
      double, bool, RngStream&);

BLINK_INSTANTIATE_CONVLSTM(float)
BLINK_INSTANTIATE_CONVLSTM(double)

}  // namespace blink
