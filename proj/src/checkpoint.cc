// src/checkpoint.cc
#include "checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace l2w {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', '2', 'W', 'C', 'K', 'P', 'T', '\0'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::istream& is, const std::string& path) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  L2W_CHECK(is.good(), "checkpoint: truncated file " << path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, ParamStore& params) {
  std::ofstream os(path, std::ios::binary);
  L2W_CHECK(os.good(), "checkpoint: cannot open " << path << " for writing");
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_u32(os, static_cast<uint32_t>(params.all().size()));
  for (const auto& p : params.all()) {
    write_u32(os, static_cast<uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u32(os, static_cast<uint32_t>(p->shape.size()));
    for (int d : p->shape) write_u32(os, static_cast<uint32_t>(d));
    std::vector<float> data(p->value.size());
    for (size_t i = 0; i < data.size(); ++i) {
      data[i] = static_cast<float>(p->value[i]);
      p->value[i] = static_cast<Real>(data[i]);  // quantize live state
    }
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(float)));
  }
  L2W_CHECK(os.good(), "checkpoint: write failed for " << path);
}

std::map<std::string, CheckpointEntry> read_checkpoint(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  L2W_CHECK(is.good(), "checkpoint: cannot open " << path);
  char magic[8];
  is.read(magic, 8);
  L2W_CHECK(is.good() && std::memcmp(magic, kMagic, 8) == 0,
            "checkpoint: bad magic in " << path);
  uint32_t version = read_u32(is, path);
  L2W_CHECK(version == kVersion, "checkpoint: unsupported version "
                                     << version << " in " << path);
  uint32_t count = read_u32(is, path);
  std::map<std::string, CheckpointEntry> out;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = read_u32(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint32_t ndim = read_u32(is, path);
    CheckpointEntry e;
    int64_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      e.shape.push_back(static_cast<int>(read_u32(is, path)));
      n *= e.shape.back();
    }
    e.data.resize(n);
    is.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    L2W_CHECK(is.good(), "checkpoint: truncated tensor " << name << " in "
                                                         << path);
    L2W_CHECK(!out.count(name),
              "checkpoint: duplicate tensor " << name << " in " << path);
    out[name] = std::move(e);
  }
  return out;
}

void load_checkpoint(const std::string& path, ParamStore& params) {
  auto entries = read_checkpoint(path);
  L2W_CHECK(entries.size() == params.all().size(),
            "checkpoint: " << path << " holds " << entries.size()
                           << " tensors, model has " << params.all().size());
  for (const auto& p : params.all()) {
    auto it = entries.find(p->name);
    L2W_CHECK(it != entries.end(),
              "checkpoint: missing tensor " << p->name << " in " << path);
    L2W_CHECK(it->second.shape == p->shape,
              "checkpoint: shape mismatch for " << p->name);
    for (size_t i = 0; i < p->value.size(); ++i)
      p->value[i] = static_cast<Real>(it->second.data[i]);
  }
}

}  // namespace l2w
