#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "blink/ops.hpp"
#include "blink/tensor.hpp"

using namespace blink;

TEST_CASE("tensor handles alias, clone copies") {
  Tensor<float> a = Tensor<float>::from({2}, {1, 2});
  Tensor<float> b = a;
  b.data()[0] = 7;
  CHECK(a.data()[0] == 7);
  Tensor<float> c = a.clone();
  c.data()[0] = 9;
  CHECK(a.data()[0] == 7);
}

TEST_CASE("add, mul, scale") {
  auto a = Tensor<float>::from({3}, {1, 2, 3});
  auto b = Tensor<float>::from({3}, {10, 20, 30});
  CHECK(add(a, b).vec() == std::vector<float>{11, 22, 33});
  CHECK(mul(a, b).vec() == std::vector<float>{10, 40, 90});
  CHECK(scale(a, 2.0f).vec() == std::vector<float>{2, 4, 6});
  CHECK_THROWS_AS(add(a, Tensor<float>::from({2}, {1, 2})), ShapeError);
}

TEST_CASE("dense oracles") {
  // identity weights, zero bias -> output equals input
  auto x = Tensor<float>::from({2, 2}, {1, 2, 3, 4});
  auto wi = Tensor<float>::from({2, 2}, {1, 0, 0, 1});
  auto b0 = Tensor<float>::from({2}, {0, 0});
  CHECK(dense(x, wi, b0).vec() == std::vector<float>{1, 2, 3, 4});

  // [[1,2]] * [[1],[1]] + [3] = [[6]]
  auto x2 = Tensor<float>::from({1, 2}, {1, 2});
  auto w2 = Tensor<float>::from({2, 1}, {1, 1});
  auto b2 = Tensor<float>::from({1}, {3});
  CHECK(dense(x2, w2, b2).vec() == std::vector<float>{6});
}

TEST_CASE("dense bias gradient of sum is all-ones") {
  Tensor<double> x = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> w(Shape{3, 2}, true);
  Tensor<double> b(Shape{2}, true);
  for (int i = 0; i < 6; ++i) w.data()[i] = 0.1 * (i + 1);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  Tensor<double> loss = sum_all(dense(x, w, b));
  tape.backward(loss);
  CHECK(b.grad()[0] == doctest::Approx(2.0));  // two rows
  CHECK(b.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("conv2d identity and ones oracles") {
  // single 1x1 kernel, weight 1, bias 0 -> output equals the input channel
  auto x = Tensor<float>::from({1, 1, 2, 2}, {1, 2, 3, 4});
  auto k1 = Tensor<float>::from({1, 1, 1, 1}, {1});
  auto b1 = Tensor<float>::from({1}, {0});
  CHECK(conv2d(x, k1, b1, 1, 1, Padding::Same).vec() ==
        std::vector<float>{1, 2, 3, 4});

  // 1x1x3x3 ones, one 3x3 kernel of ones, valid -> 9.0
  auto ones = Tensor<float>::full({1, 1, 3, 3}, 1.0f);
  auto k9 = Tensor<float>::full({1, 1, 3, 3}, 1.0f);
  Tensor<float> out = conv2d(ones, k9, b1, 1, 1, Padding::Valid);
  CHECK(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out.item() == 9.0f);
}

TEST_CASE("conv2d shape algebra") {
  CHECK(conv_out_extent(224, 3, 1, 1, 1) == 224);
  CHECK(conv_out_extent(5, 3, 1, 2, 2) == 5);   // dilated same
  CHECK(conv_out_extent(5, 3, 2, 1, 0) == 2);   // strided valid
  RngStream rng(3);
  auto x = uniform_tensor<float>({2, 3, 16, 16}, rng, -1, 1);
  auto k = uniform_tensor<float>({4, 3, 3, 3}, rng, -1, 1);
  auto b = uniform_tensor<float>({4}, rng, -1, 1);
  CHECK(conv2d(x, k, b, 1, 1, Padding::Same).shape() == Shape{2, 4, 16, 16});
  CHECK(conv2d(x, k, b, 1, 2, Padding::Same).shape() == Shape{2, 4, 16, 16});
  CHECK(conv2d(x, k, b, 2, 1, Padding::Valid).shape() == Shape{2, 4, 7, 7});
}

TEST_CASE("conv2d is linear in its input") {
  RngStream rng(4);
  auto x1 = uniform_tensor<double>({1, 2, 6, 6}, rng, -1, 1);
  auto x2 = uniform_tensor<double>({1, 2, 6, 6}, rng, -1, 1);
  auto k = uniform_tensor<double>({3, 2, 3, 3}, rng, -1, 1);
  Tensor<double> nob;
  const double a = 0.7, b = -1.3;
  Tensor<double> mix(Shape{1, 2, 6, 6});
  for (int i = 0; i < 72; ++i) mix.data()[i] = a * x1.data()[i] + b * x2.data()[i];
  Tensor<double> lhs = conv2d(mix, k, nob, 1, 1, Padding::Same);
  Tensor<double> r1 = conv2d(x1, k, nob, 1, 1, Padding::Same);
  Tensor<double> r2 = conv2d(x2, k, nob, 1, 1, Padding::Same);
  for (int64_t i = 0; i < lhs.numel(); ++i)
    CHECK(lhs.data()[i] ==
          doctest::Approx(a * r1.data()[i] + b * r2.data()[i]).epsilon(1e-5));
}

TEST_CASE("activations") {
  auto x = Tensor<float>::from({5}, {-2, -0.5f, 0, 0.5f, 2});
  auto s = sigmoid(x);
  CHECK(s.data()[2] == doctest::Approx(0.5));
  for (int i = 0; i < 5; ++i) {
    CHECK(s.data()[i] > 0);
    CHECK(s.data()[i] < 1);
  }
  // sigmoid(x) + sigmoid(-x) = 1
  auto neg = Tensor<float>::from({5}, {2, 0.5f, 0, -0.5f, -2});
  auto sn = sigmoid(neg);
  for (int i = 0; i < 5; ++i)
    CHECK(s.data()[i] + sn.data()[i] == doctest::Approx(1.0));
  CHECK(tanh_op(x).data()[2] == 0.0f);
  CHECK(relu(x).vec() == std::vector<float>{0, 0, 0, 0.5f, 2});
}

TEST_CASE("softmax rows sum to 1, stabilized, shift invariant") {
  auto z = Tensor<float>::from({1, 3}, {0, 0, 0});
  auto u = softmax_last(z);
  for (int i = 0; i < 3; ++i) CHECK(u.data()[i] == doctest::Approx(1.0 / 3));

  auto big = Tensor<float>::from({1, 2}, {1000, 0});
  auto sb = softmax_last(big);
  CHECK(sb.data()[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(sb.data()[0]));

  RngStream rng(5);
  auto logits = uniform_tensor<float>({4, 6}, rng, -3, 3);
  auto shifted = logits.clone();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c) shifted.data()[r * 6 + c] += 17.5f;
  auto p1 = softmax_last(logits), p2 = softmax_last(shifted);
  for (int r = 0; r < 4; ++r) {
    double sum = 0;
    for (int c = 0; c < 6; ++c) sum += p1.data()[r * 6 + c];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    for (int c = 0; c < 6; ++c)
      CHECK(p1.data()[r * 6 + c] == doctest::Approx(p2.data()[r * 6 + c]));
  }
}

TEST_CASE("dropout identity and expectation") {
  RngStream rng(6);
  auto x = uniform_tensor<float>({100}, rng, 0.5, 1.5);
  RngStream r1(7);
  CHECK(dropout(x, 0.5, false, r1).vec() == x.vec());  // eval mode
  CHECK(dropout(x, 0.0, true, r1).vec() == x.vec());   // p = 0
  CHECK_THROWS(dropout(x, 1.0, true, r1));

  // mean over many masks of a constant input stays within 1%
  auto ones = Tensor<float>::full({64}, 1.0f);
  RngStream r2(8);
  double total = 0;
  const int draws = 2000;
  for (int i = 0; i < draws; ++i) {
    auto y = dropout(ones, 0.5, true, r2);
    for (int j = 0; j < 64; ++j) total += y.data()[j];
  }
  CHECK(total / (64.0 * draws) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("cross_entropy_mean oracles") {
  auto perfect = Tensor<float>::from({2, 3}, {1, 0, 0, 0, 1, 0});
  CHECK(cross_entropy_mean(perfect, {0, 1}).item() == doctest::Approx(0.0));
  auto uniform = Tensor<float>::full({2, 5}, 0.2f);
  CHECK(cross_entropy_mean(uniform, {3, 4}).item() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-6));
  CHECK_THROWS(cross_entropy_mean(uniform, {5, 0}));  // label out of range
  // zero probability hits the 1e-12 clamp instead of inf
  auto zerop = Tensor<float>::from({1, 2}, {0, 1});
  CHECK(std::isfinite(cross_entropy_mean(zerop, {0}).item()));
}

TEST_CASE("reshape, select0, stack0, sum_all, mask_mul, channel_scale") {
  auto x = Tensor<float>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(reshape(x, {3, 2}).shape() == Shape{3, 2});
  CHECK(reshape(x, {3, 2}).vec() == x.vec());
  CHECK_THROWS_AS(reshape(x, {4, 2}), ShapeError);

  CHECK(select0(x, 1).vec() == std::vector<float>{4, 5, 6});
  auto st = stack0(std::vector<Tensor<float>>{select0(x, 0), select0(x, 1)});
  CHECK(st.shape() == Shape{2, 3});
  CHECK(st.vec() == x.vec());
  CHECK(sum_all(x).item() == 21.0f);

  auto img = Tensor<float>::full({1, 2, 2, 2}, 3.0f);
  auto mask = Tensor<float>::from({1, 1, 2, 2}, {0, 0.5f, 1, 0.25f});
  auto masked = mask_mul(img, mask);
  CHECK(masked.vec() ==
        std::vector<float>{0, 1.5f, 3, 0.75f, 0, 1.5f, 3, 0.75f});

  auto cs = channel_scale(img, Tensor<float>::from({2}, {2, 10}));
  CHECK(cs.vec() == std::vector<float>{6, 6, 6, 6, 30, 30, 30, 30});
}

TEST_CASE("backward: sum gives ones, sum of squares gives 2x") {
  Tensor<double> x(Shape{2}, true);
  x.data()[0] = 1;
  x.data()[1] = 2;
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(sum_all(x));
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 1.0);
  }
  x.zero_grad();
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(sum_all(mul(x, x)));
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
  }
}

TEST_CASE("backward accumulates across repeated calls") {
  Tensor<double> x(Shape{1}, true);
  x.data()[0] = 3;
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    Tensor<double> loss = sum_all(mul(x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(12.0));
  }
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor<double> x(Shape{2}, true);
  Tape<double> tape;
  TapeScope<double> scope(tape);
  Tensor<double> y = mul(x, x);
  CHECK_THROWS(tape.backward(y));
}

TEST_CASE("multi-consumer gradients accumulate") {
  // y = x*x + x*x via two separate ops reading the same handle
  Tensor<double> x(Shape{1}, true);
  x.data()[0] = 5;
  Tape<double> tape;
  TapeScope<double> scope(tape);
  tape.backward(sum_all(add(mul(x, x), mul(x, x))));
  CHECK(x.grad()[0] == doctest::Approx(20.0));
}

TEST_CASE("finite checks name the offending op") {
  set_finite_checks(true);
  auto x = Tensor<float>::from({1}, {1e30f});
  bool threw = false;
  try {
    mul(mul(x, x), mul(x, x));  // overflows to inf
  } catch (const NonFiniteError&) {
    threw = true;
  }
  set_finite_checks(false);
  CHECK(threw);
}
