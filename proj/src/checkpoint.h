// src/checkpoint.h
// Binary parameter container. Layout (all integers little-endian):
//   magic   8 bytes  "L2WCKPT\0"
//   version u32      currently 1
//   count   u32      number of tensors
// then per tensor:
//   name_len u32, name bytes (no terminator)
//   ndim     u32, dims u32[ndim]
//   data     f32[prod(dims)]
// Values are stored as 32-bit floats. save() also rounds the live parameters
// to the stored precision so a resumed run continues bit-identically to the
// run that wrote the file. Round-trip save -> load -> save is byte-exact.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "tensor.h"

namespace l2w {

struct CheckpointEntry {
  std::vector<int> shape;
  std::vector<float> data;
};

void save_checkpoint(const std::string& path, ParamStore& params);
// All names/shapes in the file must match params exactly.
void load_checkpoint(const std::string& path, ParamStore& params);
// Raw reader used by tools that inspect files without building a model.
std::map<std::string, CheckpointEntry> read_checkpoint(
    const std::string& path);

}  // namespace l2w
