#include "blink/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace blink {

ImageU8 ImageU8::filled(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
  ImageU8 img;
  img.w = w;
  img.h = h;
  img.rgb.resize(static_cast<size_t>(w) * h * 3);
  for (size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }
  return img;
}

void ImageU8::fill_rect(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g,
                        uint8_t b) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(w, x1);
  y1 = std::min(h, y1);
  for (int y = y0; y < y1; ++y) {
    uint8_t* row = rgb.data() + (static_cast<size_t>(y) * w + x0) * 3;
    for (int x = x0; x < x1; ++x) {
      row[0] = r;
      row[1] = g;
      row[2] = b;
      row += 3;
    }
  }
}

void u8_to_planes(const uint8_t* rgb, int w, int h, float* planes) {
  const int64_t hw = static_cast<int64_t>(w) * h;
  for (int64_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c)
      planes[c * hw + i] = static_cast<float>(rgb[i * 3 + c]) * (1.0f / 255.0f);
}

void planes_to_u8(const float* planes, int w, int h, uint8_t* rgb) {
  const int64_t hw = static_cast<int64_t>(w) * h;
  for (int64_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c) {
      const float v = std::clamp(planes[c * hw + i], 0.0f, 1.0f);
      rgb[i * 3 + c] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
}

void resize_bilinear(const float* src, int c, int sh, int sw, float* dst, int dh,
                     int dw) {
  if (sh == dh && sw == dw) {
    std::copy(src, src + static_cast<int64_t>(c) * sh * sw, dst);
    return;
  }
  const float ry = dh > 1 ? static_cast<float>(sh - 1) / (dh - 1) : 0.0f;
  const float rx = dw > 1 ? static_cast<float>(sw - 1) / (dw - 1) : 0.0f;
  for (int ch = 0; ch < c; ++ch) {
    const float* sp = src + static_cast<int64_t>(ch) * sh * sw;
    float* dp = dst + static_cast<int64_t>(ch) * dh * dw;
    for (int y = 0; y < dh; ++y) {
      const float fy = y * ry;
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, sh - 1);
      const float wy = fy - y0;
      for (int x = 0; x < dw; ++x) {
        const float fx = x * rx;
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, sw - 1);
        const float wx = fx - x0;
        const float a = sp[y0 * sw + x0] * (1 - wx) + sp[y0 * sw + x1] * wx;
        const float b = sp[y1 * sw + x0] * (1 - wx) + sp[y1 * sw + x1] * wx;
        dp[y * dw + x] = a * (1 - wy) + b * wy;
      }
    }
  }
}

void write_ppm(const std::string& path, const ImageU8& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "P6\n" << img.w << " " << img.h << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

ImageU8 read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
    throw std::runtime_error("not a supported P6 image: " + path);
  f.get();
  ImageU8 img;
  img.w = w;
  img.h = h;
  img.rgb.resize(static_cast<size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(img.rgb.data()),
         static_cast<std::streamsize>(img.rgb.size()));
  if (!f) throw std::runtime_error("truncated image: " + path);
  return img;
}

void write_pgm(const std::string& path, const float* gray, int w, int h) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "P5\n" << w << " " << h << "\n255\n";
  std::vector<uint8_t> buf(static_cast<size_t>(w) * h);
  for (size_t i = 0; i < buf.size(); ++i) {
    const float v = std::clamp(gray[i], 0.0f, 1.0f);
    buf[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace blink
