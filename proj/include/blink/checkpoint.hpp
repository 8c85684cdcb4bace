#pragma once

#include <string>
#include <utility>
#include <vector>

#include "blink/tensor.hpp"

namespace blink {

// Little-endian tensor container:
//   "BLNK" | version u32 | entry count u32 | entries
//   entry: name length u32 | UTF-8 name | rank u32 | extents u64[rank] | f32 data
// Written atomically (temp file + rename).
void write_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, Tensor<float>>>& entries);

std::vector<std::pair<std::string, Tensor<float>>> read_checkpoint(
    const std::string& path);

}  // namespace blink
