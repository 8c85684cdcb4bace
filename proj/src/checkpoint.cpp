#include "blink/checkpoint.hpp"

#include <cstring>

#include "blink/binio.hpp"

namespace blink {

namespace {
constexpr uint32_t kCheckpointVersion = 1;
}

void write_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, Tensor<float>>>& entries) {
  ByteWriter w;
  w.bytes("BLNK", 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    require(t.defined(), "write_checkpoint: undefined tensor '" + name + "'");
    w.str(name);
    w.u32(static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) w.u64(static_cast<uint64_t>(t.dim(i)));
    w.bytes(t.data(), static_cast<size_t>(t.numel()) * 4);
  }
  write_file_atomic(path, w.buf);
}

std::vector<std::pair<std::string, Tensor<float>>> read_checkpoint(
    const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes.data(), bytes.size(), path);
  char magic[5] = {0};
  r.bytes(magic, 4);
  if (std::string(magic) != "BLNK") r.fail("bad magic, not a checkpoint");
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    r.fail("unsupported version " + std::to_string(version) + " (reader supports " +
           std::to_string(kCheckpointVersion) + ")");
  const uint32_t count = r.u32();
  std::vector<std::pair<std::string, Tensor<float>>> entries;
  entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const uint32_t rank = r.u32();
    if (rank > 8) r.fail("implausible rank " + std::to_string(rank));
    Shape shape;
    int64_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const uint64_t e = r.u64();
      if (e == 0 || e > (1ull << 32)) r.fail("bad extent in '" + name + "'");
      shape.push_back(static_cast<int>(e));
      numel *= static_cast<int64_t>(e);
    }
    Tensor<float> t(shape);
    r.bytes(t.data(), static_cast<size_t>(numel) * 4);
    entries.emplace_back(name, std::move(t));
  }
  if (!r.done()) r.fail("trailing bytes after last entry");
  return entries;
}

}  // namespace blink
