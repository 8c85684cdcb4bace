#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace blink {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Little-endian byte buffers. Writers append; the reader tracks its offset so
// errors can name the exact byte.
struct ByteWriter {
  std::vector<uint8_t> buf;

  void u8(uint8_t v) { buf.push_back(v); }
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(const void* p, size_t n);
  void str(const std::string& s);  // u32 length + bytes
};

struct ByteReader {
  const uint8_t* data;
  size_t size;
  size_t pos = 0;
  std::string what;  // named in errors

  ByteReader(const uint8_t* d, size_t n, std::string name)
      : data(d), size(n), what(std::move(name)) {}

  [[noreturn]] void fail(const std::string& msg) const;
  void need(size_t n) const;
  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  void bytes(void* p, size_t n);
  std::string str();
  bool done() const { return pos == size; }
};

// Whole-file helpers; writes go through a temp file + rename so readers never
// see a half-written artifact.
void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes);
void write_text_atomic(const std::string& path, const std::string& text);
std::vector<uint8_t> read_file(const std::string& path);
std::string read_text_file(const std::string& path);

}  // namespace blink
