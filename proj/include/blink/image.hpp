#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace blink {

// Interleaved 8-bit RGB.
struct ImageU8 {
  int w = 0;
  int h = 0;
  std::vector<uint8_t> rgb;  // h*w*3

  static ImageU8 filled(int w, int h, uint8_t r, uint8_t g, uint8_t b);
  void fill_rect(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b);
};

// Planar float [C,H,W] <-> interleaved bytes; values map [0,255] -> [0,1].
void u8_to_planes(const uint8_t* rgb, int w, int h, float* planes);
void planes_to_u8(const float* planes, int w, int h, uint8_t* rgb);

// Bilinear resample of planar [C,H,W] data.
void resize_bilinear(const float* src, int c, int sh, int sw, float* dst, int dh,
                     int dw);

// Binary PPM (P6) and PGM (P5). Grayscale values are clamped from [0,1].
void write_ppm(const std::string& path, const ImageU8& img);
ImageU8 read_ppm(const std::string& path);
void write_pgm(const std::string& path, const float* gray, int w, int h);

}  // namespace blink
