// Times the serial reference against the OpenMP backend on the kernel set
// and checks both produce identical bytes on the benchmark inputs.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "blink/kernels.hpp"
#include "blink/rng.hpp"

using blink::RngStream;
namespace k = blink::kernels;

namespace {

std::vector<float> rand_vec(size_t n, RngStream& rng) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_s, double omp_s, bool identical) {
  std::printf("%-22s %10.3f ms %10.3f ms   x%.2f   %s\n", name, 1e3 * serial_s,
              1e3 * omp_s, serial_s / omp_s, identical ? "identical" : "DIFFER");
}

}  // namespace

int main() {
  RngStream rng(7);
  std::printf("threads: %d (openmp %s)\n\n", k::max_threads(),
              k::openmp_compiled() ? "compiled" : "absent");
  std::printf("%-22s %13s %13s  speedup  bytes\n", "kernel", "serial", "openmp");

  {
    const int m = 256, kk = 512, n = 256;
    std::vector<float> a = rand_vec(static_cast<size_t>(m) * kk, rng);
    std::vector<float> b = rand_vec(static_cast<size_t>(kk) * n, rng);
    std::vector<float> c1(static_cast<size_t>(m) * n), c2 = c1;
    double t1 = time_of([&] { k::serial::matmul(a.data(), b.data(), c1.data(), m, kk, n); }, 5);
    double t2 = time_of([&] { k::omp::matmul(a.data(), b.data(), c2.data(), m, kk, n); }, 5);
    row("matmul 256x512x256", t1, t2,
        std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(float)) == 0);
  }
  {
    const int kk = 512, m = 256, n = 256;
    std::vector<float> a = rand_vec(static_cast<size_t>(kk) * m, rng);
    std::vector<float> b = rand_vec(static_cast<size_t>(kk) * n, rng);
    std::vector<float> c1(static_cast<size_t>(m) * n), c2 = c1;
    double t1 = time_of([&] { k::serial::matmul_atb(a.data(), b.data(), c1.data(), kk, m, n); }, 5);
    double t2 = time_of([&] { k::omp::matmul_atb(a.data(), b.data(), c2.data(), kk, m, n); }, 5);
    row("matmul_atb 512x256^2", t1, t2,
        std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(float)) == 0);
  }
  {
    const int m = 512, n = 768;
    std::vector<float> a = rand_vec(static_cast<size_t>(m) * n, rng);
    std::vector<float> c1(a.size()), c2(a.size());
    double t1 = time_of([&] { k::serial::transpose(a.data(), c1.data(), m, n); }, 20);
    double t2 = time_of([&] { k::omp::transpose(a.data(), c2.data(), m, n); }, 20);
    row("transpose 512x768", t1, t2,
        std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(float)) == 0);
  }
  {
    const int ch = 32, h = 64, w = 64, kh = 3, kw = 3;
    const int oh = h, ow = w;  // stride 1, same padding
    std::vector<float> im = rand_vec(static_cast<size_t>(ch) * h * w, rng);
    std::vector<float> c1(static_cast<size_t>(ch) * kh * kw * oh * ow), c2 = c1;
    double t1 = time_of(
        [&] { k::serial::im2col(im.data(), ch, h, w, kh, kw, 1, 1, 1, 1, oh, ow, c1.data()); }, 10);
    double t2 = time_of(
        [&] { k::omp::im2col(im.data(), ch, h, w, kh, kw, 1, 1, 1, 1, oh, ow, c2.data()); }, 10);
    row("im2col 32x64x64 k3", t1, t2,
        std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(float)) == 0);
  }
  {
    const int ch = 32, h = 64, w = 64, kh = 3, kw = 3;
    const int oh = h, ow = w;
    std::vector<float> col = rand_vec(static_cast<size_t>(ch) * kh * kw * oh * ow, rng);
    std::vector<float> im1(static_cast<size_t>(ch) * h * w, 0.0f), im2 = im1;
    double t1 = time_of([&] {
      std::fill(im1.begin(), im1.end(), 0.0f);
      k::serial::col2im(col.data(), ch, h, w, kh, kw, 1, 1, 1, 1, oh, ow, im1.data());
    }, 10);
    double t2 = time_of([&] {
      std::fill(im2.begin(), im2.end(), 0.0f);
      k::omp::col2im(col.data(), ch, h, w, kh, kw, 1, 1, 1, 1, oh, ow, im2.data());
    }, 10);
    row("col2im 32x64x64 k3", t1, t2,
        std::memcmp(im1.data(), im2.data(), im1.size() * sizeof(float)) == 0);
  }
  {
    const int planes = 64, h = 64, w = 64;
    std::vector<float> in = rand_vec(static_cast<size_t>(planes) * h * w, rng);
    std::vector<float> o1(static_cast<size_t>(planes) * (h / 2) * (w / 2)), o2 = o1;
    std::vector<int32_t> i1(o1.size()), i2(o1.size());
    double t1 = time_of(
        [&] { k::serial::maxpool2_forward(in.data(), planes, h, w, o1.data(), i1.data()); }, 20);
    double t2 = time_of(
        [&] { k::omp::maxpool2_forward(in.data(), planes, h, w, o2.data(), i2.data()); }, 20);
    row("maxpool2 64x64x64", t1, t2,
        std::memcmp(o1.data(), o2.data(), o1.size() * sizeof(float)) == 0 &&
            std::memcmp(i1.data(), i2.data(), i1.size() * sizeof(int32_t)) == 0);
  }
  return 0;
}
