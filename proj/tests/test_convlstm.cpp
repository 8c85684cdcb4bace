#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "blink/convlstm.hpp"

using namespace blink;

namespace {

// Independently coded scalar peephole LSTM, one unit, gate order i,f,c,o.
// Peepholes: i and f read the previous cell, o reads the fresh one.
struct ScalarLstm {
  double wxi, whi, wci, bi;
  double wxf, whf, wcf, bf;
  double wxc, whc, bc;
  double wxo, who, wco, bo;

  static double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

  void step(double x, double& h, double& c) const {
    const double i = sig(wxi * x + whi * h + wci * c + bi);
    const double f = sig(wxf * x + whf * h + wcf * c + bf);
    const double g = std::tanh(wxc * x + whc * h + bc);
    const double cn = f * c + i * g;
    const double o = sig(wxo * x + who * h + wco * cn + bo);
    h = o * std::tanh(cn);
    c = cn;
  }
};

ConvLSTMLayer<double> layer_from(const ScalarLstm& s, bool conv_peephole) {
  ConvLSTMLayer<double> p;
  p.in_ch = 1;
  p.hid_ch = 1;
  p.kernel = 1;
  p.conv_peephole = conv_peephole;
  auto t = [](double v) { return Tensor<double>::from({1, 1, 1, 1}, {v}); };
  auto b = [](double v) { return Tensor<double>::from({1}, {v}); };
  p.wxi = t(s.wxi); p.whi = t(s.whi); p.bi = b(s.bi);
  p.wxf = t(s.wxf); p.whf = t(s.whf); p.bf = b(s.bf);
  p.wxc = t(s.wxc); p.whc = t(s.whc); p.bc = b(s.bc);
  p.wxo = t(s.wxo); p.who = t(s.who); p.bo = b(s.bo);
  if (conv_peephole) {
    p.wci = t(s.wci); p.wcf = t(s.wcf); p.wco = t(s.wco);
  } else {
    p.wci = b(s.wci); p.wcf = b(s.wcf); p.wco = b(s.wco);
  }
  return p;
}

}  // namespace

TEST_CASE("cell matches a scalar peephole oracle over 60 seeds") {
  for (uint64_t seed = 1; seed <= 60; ++seed) {
    RngStream rng(seed);
    ScalarLstm s;
    double* fields[] = {&s.wxi, &s.whi, &s.wci, &s.bi, &s.wxf, &s.whf, &s.wcf,
                        &s.bf,  &s.wxc, &s.whc, &s.bc, &s.wxo, &s.who, &s.wco,
                        &s.bo};
    for (double* f : fields) *f = rng.uniform(-1.0, 1.0);
    const bool conv_peep = (seed % 2) == 0;  // k=1 conv peephole == elementwise
    ConvLSTMLayer<double> p = layer_from(s, conv_peep);

    double h = rng.uniform(-0.5, 0.5), c = rng.uniform(-0.5, 0.5);
    CellState<double> st;
    st.h = Tensor<double>::from({1, 1, 1, 1}, {h});
    st.c = Tensor<double>::from({1, 1, 1, 1}, {c});
    RngStream drop(0);
    for (int t = 0; t < 4; ++t) {
      const double x = rng.uniform(-1.0, 1.0);
      st = cell_step(Tensor<double>::from({1, 1, 1, 1}, {x}), st, p, 0.0, false,
                     drop);
      s.step(x, h, c);
      CHECK(std::abs(st.h.item() - h) < 1e-6);
      CHECK(std::abs(st.c.item() - c) < 1e-6);
    }
  }
}

TEST_CASE("zero parameters give zero state from zero init") {
  RngStream rng(7);
  ConvLSTMLayer<float> p = init_convlstm<float>(2, 3, 3, false, rng);
  for (Tensor<float>* t : {&p.wxi, &p.whi, &p.bi, &p.wxf, &p.whf, &p.bf, &p.wxc,
                           &p.whc, &p.bc, &p.wxo, &p.who, &p.bo, &p.wci, &p.wcf,
                           &p.wco})
    for (int64_t i = 0; i < t->numel(); ++i) t->data()[i] = 0.0f;
  CellState<float> st = init_state<float>(1, 3, 4, 4);
  RngStream drop(0);
  auto x = Tensor<float>::full({1, 2, 4, 4}, 0.9f);
  st = cell_step(x, st, p, 0.0, false, drop);
  for (int64_t i = 0; i < st.c.numel(); ++i) {
    CHECK(st.c.data()[i] == 0.0f);  // C = 0.5 * 0 + 0.5 * tanh(0)
    CHECK(st.h.data()[i] == 0.0f);
  }
}

TEST_CASE("saturated forget gate preserves the cell") {
  RngStream rng(8);
  ConvLSTMLayer<double> p = init_convlstm<double>(1, 2, 3, false, rng);
  for (Tensor<double>* t : {&p.wxi, &p.whi, &p.bi, &p.wxf, &p.whf, &p.wxc, &p.whc,
                            &p.bc, &p.wxo, &p.who, &p.bo, &p.wci, &p.wcf, &p.wco})
    for (int64_t i = 0; i < t->numel(); ++i) t->data()[i] = 0.0;
  for (int64_t i = 0; i < p.bf.numel(); ++i) p.bf.data()[i] = 30.0;  // sigma -> 1

  CellState<double> st = init_state<double>(1, 2, 3, 3);
  for (int64_t i = 0; i < st.c.numel(); ++i) st.c.data()[i] = 0.1 * double(i) - 0.7;
  const std::vector<double> before = st.c.vec();
  RngStream drop(0);
  auto x = Tensor<double>::full({1, 1, 3, 3}, 0.5);
  CellState<double> out = cell_step(x, st, p, 0.0, false, drop);
  for (int64_t i = 0; i < out.c.numel(); ++i)
    CHECK(std::abs(out.c.data()[i] - before[size_t(i)]) < 1e-3);
}

TEST_CASE("init_state zeros, deterministic") {
  CellState<float> a = init_state<float>(2, 8, 4, 4);
  CellState<float> b = init_state<float>(2, 8, 4, 4);
  CHECK(a.h.shape() == Shape{2, 8, 4, 4});
  CHECK(a.c.shape() == Shape{2, 8, 4, 4});
  CHECK(a.h.vec() == b.h.vec());
  for (float v : a.h.vec()) CHECK(v == 0.0f);
  for (float v : a.c.vec()) CHECK(v == 0.0f);
}

TEST_CASE("gates bounded: |H| < 1 always") {
  RngStream rng(9);
  ConvLSTMLayer<float> p = init_convlstm<float>(3, 4, 3, false, rng);
  // exaggerate weights to push activations toward the rails
  for (Tensor<float>* t : {&p.wxi, &p.whi, &p.wxf, &p.whf, &p.wxc, &p.whc, &p.wxo,
                           &p.who})
    for (int64_t i = 0; i < t->numel(); ++i) t->data()[i] *= 25.0f;
  CellState<float> st = init_state<float>(2, 4, 4, 4);
  RngStream drop(1);
  for (int t = 0; t < 6; ++t) {
    auto x = uniform_tensor<float>({2, 3, 4, 4}, rng, -2.0f, 2.0f);
    st = cell_step(x, st, p, 0.0, false, drop);
    for (int64_t i = 0; i < st.h.numel(); ++i) CHECK(std::abs(st.h.data()[i]) < 1.0f);
  }
}

TEST_CASE("stack shapes and determinism") {
  RngStream rng(10);
  std::vector<ConvLSTMLayer<float>> layers;
  layers.push_back(init_convlstm<float>(3, 16, 3, false, rng));
  layers.push_back(init_convlstm<float>(16, 16, 3, false, rng));
  std::vector<Tensor<float>> xs;
  for (int t = 0; t < 20; ++t)
    xs.push_back(uniform_tensor<float>({2, 3, 4, 4}, rng, -1, 1));

  RngStream d1(3), d2(3);
  auto outs1 = stack_forward(xs, layers, 0.0, false, d1);
  auto outs2 = stack_forward(xs, layers, 0.0, false, d2);
  REQUIRE(outs1.size() == 20);
  for (size_t t = 0; t < outs1.size(); ++t) {
    CHECK(outs1[t].shape() == Shape{2, 16, 4, 4});
    CHECK(outs1[t].vec() == outs2[t].vec());
  }
  CHECK_THROWS(stack_forward({}, layers, 0.0, false, d1));
}

TEST_CASE("T=1 stack equals one cell_step per layer") {
  RngStream rng(11);
  std::vector<ConvLSTMLayer<float>> layers;
  layers.push_back(init_convlstm<float>(2, 4, 3, false, rng));
  layers.push_back(init_convlstm<float>(4, 4, 3, false, rng));
  auto x = uniform_tensor<float>({1, 2, 4, 4}, rng, -1, 1);

  RngStream d1(5);
  auto outs = stack_forward({x}, layers, 0.0, false, d1);

  RngStream d2(5);
  CellState<float> s0 = init_state<float>(1, 4, 4, 4);
  CellState<float> s1 = init_state<float>(1, 4, 4, 4);
  s0 = cell_step(x, s0, layers[0], 0.0, false, d2);
  s1 = cell_step(s0.h, s1, layers[1], 0.0, false, d2);
  CHECK(outs[0].vec() == s1.h.vec());
}

TEST_CASE("forget bias initialized to one, peepholes zero") {
  RngStream rng(12);
  ConvLSTMLayer<float> p = init_convlstm<float>(2, 3, 3, false, rng);
  for (int64_t i = 0; i < p.bf.numel(); ++i) CHECK(p.bf.data()[i] == 1.0f);
  for (int64_t i = 0; i < p.bi.numel(); ++i) CHECK(p.bi.data()[i] == 0.0f);
  for (int64_t i = 0; i < p.wci.numel(); ++i) CHECK(p.wci.data()[i] == 0.0f);
  CHECK(p.wci.shape() == Shape{3});  // per-channel peephole
  ConvLSTMLayer<float> q = init_convlstm<float>(2, 3, 3, true, rng);
  CHECK(q.wci.shape() == Shape{3, 3, 3, 3});  // convolutional peephole
}
