#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "blink/kernels.hpp"
#include "blink/rng.hpp"

using namespace blink;

namespace {

std::vector<float> rand_vec(int64_t n, RngStream& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("matmul oracle") {
  // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
  std::vector<float> a{1, 2, 3, 4}, b{5, 6, 7, 8}, c(4);
  kernels::serial::matmul(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c == std::vector<float>{19, 22, 43, 50});
}

TEST_CASE("matmul_atb matches transpose-then-matmul") {
  RngStream rng(11);
  const int k = 7, m = 5, n = 6;
  auto a = rand_vec(k * m, rng), b = rand_vec(k * n, rng);
  std::vector<float> at(m * k), want(m * n), got(m * n);
  kernels::serial::transpose(a.data(), at.data(), k, m);
  kernels::serial::matmul(at.data(), b.data(), want.data(), m, k, n);
  kernels::serial::matmul_atb(a.data(), b.data(), got.data(), k, m, n);
  for (int i = 0; i < m * n; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));
}

TEST_CASE("transpose round trip") {
  RngStream rng(12);
  auto a = rand_vec(5 * 9, rng);
  std::vector<float> t(45), back(45);
  kernels::serial::transpose(a.data(), t.data(), 5, 9);
  kernels::serial::transpose(t.data(), back.data(), 9, 5);
  CHECK(bit_equal(a, back));
}

TEST_CASE("im2col hand oracle, 3x3 image, 2x2 kernel, valid") {
  // image [[1,2,3],[4,5,6],[7,8,9]]; oh=ow=2; col rows are kernel taps.
  std::vector<float> im{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<float> col(4 * 4);
  kernels::serial::im2col(im.data(), 1, 3, 3, 2, 2, 1, 1, 0, 0, 2, 2, col.data());
  CHECK(col == std::vector<float>{1, 2, 4, 5,    // tap (0,0)
                                  2, 3, 5, 6,    // tap (0,1)
                                  4, 5, 7, 8,    // tap (1,0)
                                  5, 6, 8, 9});  // tap (1,1)
}

TEST_CASE("im2col writes zeros in padding") {
  std::vector<float> im{1, 2, 3, 4};
  std::vector<float> col(9 * 4, -99.0f);  // poisoned
  kernels::serial::im2col(im.data(), 1, 2, 2, 3, 3, 1, 1, 1, 1, 2, 2, col.data());
  // center tap is the image itself
  CHECK(std::vector<float>(col.begin() + 16, col.begin() + 20) ==
        std::vector<float>{1, 2, 3, 4});
  for (float v : col) CHECK(v != -99.0f);
}

TEST_CASE("col2im is the adjoint of im2col") {
  // <col2im(C), X> == <C, im2col(X)> pins the scatter against the gather.
  RngStream rng(13);
  const int ch = 2, h = 6, w = 5, kh = 3, kw = 3, stride = 2, dil = 1, ph = 1, pw = 1;
  const int oh = (h + 2 * ph - kh) / stride + 1, ow = (w + 2 * pw - kw) / stride + 1;
  auto x = rand_vec(ch * h * w, rng);
  auto c = rand_vec(ch * kh * kw * oh * ow, rng);
  std::vector<float> colx(c.size());
  kernels::serial::im2col(x.data(), ch, h, w, kh, kw, stride, dil, ph, pw, oh, ow,
                          colx.data());
  std::vector<float> imc(x.size(), 0.0f);
  kernels::serial::col2im(c.data(), ch, h, w, kh, kw, stride, dil, ph, pw, oh, ow,
                          imc.data());
  double lhs = 0, rhs = 0;
  for (size_t i = 0; i < x.size(); ++i) lhs += double(imc[i]) * x[i];
  for (size_t i = 0; i < c.size(); ++i) rhs += double(c[i]) * colx[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
}

TEST_CASE("col2im accumulates instead of overwriting") {
  std::vector<float> col(4, 1.0f);  // 1x1 kernel, 2x2 output
  std::vector<float> im{5, 5, 5, 5};
  kernels::serial::col2im(col.data(), 1, 2, 2, 1, 1, 1, 1, 0, 0, 2, 2, im.data());
  CHECK(im == std::vector<float>{6, 6, 6, 6});
}

TEST_CASE("maxpool2 forward picks maxima, ties take first in scan order") {
  std::vector<float> in{5, 5,   //
                        3, 5};  // one 2x2 window, three-way tie on 5
  std::vector<float> out(1);
  std::vector<int32_t> idx(1);
  kernels::serial::maxpool2_forward(in.data(), 1, 2, 2, out.data(), idx.data());
  CHECK(out[0] == 5);
  CHECK(idx[0] == 0);
}

TEST_CASE("maxpool2 backward routes through stored indices and accumulates") {
  std::vector<float> in{1, 2,  //
                        3, 4};
  std::vector<float> out(1);
  std::vector<int32_t> idx(1);
  kernels::serial::maxpool2_forward(in.data(), 1, 2, 2, out.data(), idx.data());
  CHECK(idx[0] == 3);
  std::vector<float> dout{2.5f}, din(4, 1.0f);
  kernels::serial::maxpool2_backward(dout.data(), idx.data(), 1, 2, 2, din.data());
  CHECK(din == std::vector<float>{1, 1, 1, 3.5f});
}

TEST_CASE("serial and omp backends are bit-identical") {
  RngStream rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const int m = 1 + int(rng.uniform_int(1, 40));
    const int k = 1 + int(rng.uniform_int(1, 40));
    const int n = 1 + int(rng.uniform_int(1, 40));
    auto a = rand_vec(m * k, rng), b = rand_vec(k * n, rng);
    std::vector<float> cs(m * n), co(m * n);
    kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n);
    kernels::omp::matmul(a.data(), b.data(), co.data(), m, k, n);
    CHECK(bit_equal(cs, co));

    auto a2 = rand_vec(k * m, rng), b2 = rand_vec(k * n, rng);
    std::vector<float> ds(m * n), dmp(m * n);
    kernels::serial::matmul_atb(a2.data(), b2.data(), ds.data(), k, m, n);
    kernels::omp::matmul_atb(a2.data(), b2.data(), dmp.data(), k, m, n);
    CHECK(bit_equal(ds, dmp));

    std::vector<float> ts(m * k), to(m * k);
    kernels::serial::transpose(a.data(), ts.data(), m, k);
    kernels::omp::transpose(a.data(), to.data(), m, k);
    CHECK(bit_equal(ts, to));
  }

  const int ch = 3, h = 12, w = 10, kh = 3, kw = 3;
  const int oh = h, ow = w;  // same padding, stride 1
  auto im = rand_vec(ch * h * w, rng);
  std::vector<float> cols(ch * kh * kw * oh * ow), colo(cols.size());
  kernels::serial::im2col(im.data(), ch, h, w, kh, kw, 1, 1, 1, 1, oh, ow, cols.data());
  kernels::omp::im2col(im.data(), ch, h, w, kh, kw, 1, 1, 1, 1, oh, ow, colo.data());
  CHECK(bit_equal(cols, colo));

  auto col = rand_vec(cols.size(), rng);
  std::vector<float> ims(ch * h * w, 0.0f), imo(ch * h * w, 0.0f);
  kernels::serial::col2im(col.data(), ch, h, w, kh, kw, 1, 1, 1, 1, oh, ow, ims.data());
  kernels::omp::col2im(col.data(), ch, h, w, kh, kw, 1, 1, 1, 1, oh, ow, imo.data());
  CHECK(bit_equal(ims, imo));

  auto pin = rand_vec(6 * 8 * 8, rng);
  std::vector<float> pos(6 * 16), poo(6 * 16);
  std::vector<int32_t> ids(6 * 16), ido(6 * 16);
  kernels::serial::maxpool2_forward(pin.data(), 6, 8, 8, pos.data(), ids.data());
  kernels::omp::maxpool2_forward(pin.data(), 6, 8, 8, poo.data(), ido.data());
  CHECK(bit_equal(pos, poo));
  CHECK(ids == ido);
}

TEST_CASE("dispatch backend switch") {
  const auto before = kernels::backend();
  kernels::set_backend(kernels::Backend::Serial);
  CHECK(kernels::backend() == kernels::Backend::Serial);
  std::vector<float> a{1, 0, 0, 1}, b{2, 3, 4, 5}, c(4);
  kernels::matmul(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c == std::vector<float>{2, 3, 4, 5});
  kernels::set_backend(before);
  CHECK(kernels::max_threads() >= 1);
}
