#include "demcloud/checkpoint.hpp"

#include <cstring>

#include "demcloud/raster_io.hpp"

namespace demcloud::nn {

namespace {
constexpr std::uint16_t kVersion = 1;
}

void save_checkpoint(const std::filesystem::path& path, const UNetConfig& cfg,
                     const UNetParams<float>& params) {
  cfg.validate();
  std::vector<std::uint8_t> out;
  for (char c : {'C', 'F', 'N', 'N'}) out.push_back(static_cast<std::uint8_t>(c));
  le::put_u16(out, kVersion);
  le::put_u32(out, static_cast<std::uint32_t>(cfg.in_channels));
  le::put_u32(out, static_cast<std::uint32_t>(cfg.class_count));
  for (int c : cfg.encoder) le::put_u32(out, static_cast<std::uint32_t>(c));
  le::put_u32(out, static_cast<std::uint32_t>(cfg.bottleneck));
  for (int c : cfg.decoder) le::put_u32(out, static_cast<std::uint32_t>(c));
  le::put_u64(out, params.step);
  le::put_u32(out, static_cast<std::uint32_t>(params.params.size()));
  for (const auto& p : params.params) {
    le::put_u16(out, static_cast<std::uint16_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    if (p.is_bias) {
      out.push_back(1);
      le::put_u32(out, static_cast<std::uint32_t>(p.value.n()));
    } else {
      out.push_back(4);
      for (int d : p.value.dims()) le::put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (float v : p.value.values()) le::put_f32(out, v);
  }
  write_file_bytes(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string origin = path.string();
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw DataError(origin + ": truncated checkpoint");
  };
  auto u32 = [&] {
    need(4);
    auto v = le::get_u32(bytes.data() + pos);
    pos += 4;
    return v;
  };

  need(6);
  if (std::memcmp(bytes.data(), "CFNN", 4) != 0) {
    throw DataError(origin + ": bad magic, expected CFNN");
  }
  if (le::get_u16(bytes.data() + 4) != kVersion) {
    throw DataError(origin + ": unsupported checkpoint version");
  }
  pos = 6;
  Checkpoint ck;
  ck.config.in_channels = static_cast<int>(u32());
  ck.config.class_count = static_cast<int>(u32());
  for (auto& c : ck.config.encoder) c = static_cast<int>(u32());
  ck.config.bottleneck = static_cast<int>(u32());
  for (auto& c : ck.config.decoder) c = static_cast<int>(u32());
  try {
    ck.config.validate();
  } catch (const ConfigError& e) {
    throw DataError(origin + ": invalid architecture in checkpoint: " + e.what());
  }
  need(8);
  const std::uint64_t step = le::get_u64(bytes.data() + pos);
  pos += 8;
  const auto blocks = u32();

  ck.params = init_unet<float>(ck.config, 0);
  ck.params.step = step;
  if (blocks != ck.params.params.size()) {
    throw DataError(origin + ": checkpoint has " + std::to_string(blocks) +
                    " parameter blocks, architecture needs " +
                    std::to_string(ck.params.params.size()));
  }
  for (auto& p : ck.params.params) {
    need(2);
    const auto len = le::get_u16(bytes.data() + pos);
    pos += 2;
    need(len);
    const std::string name(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                           bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
    if (name != p.name) {
      throw DataError(origin + ": expected parameter " + p.name + ", found " + name);
    }
    need(1);
    const int ndims = bytes[pos++];
    std::vector<std::uint32_t> dims;
    for (int d = 0; d < ndims; ++d) dims.push_back(u32());
    const bool ok = p.is_bias ? (ndims == 1 && dims[0] == static_cast<std::uint32_t>(p.value.n()))
                              : (ndims == 4 && dims[0] == static_cast<std::uint32_t>(p.value.n()) &&
                                 dims[1] == static_cast<std::uint32_t>(p.value.c()) &&
                                 dims[2] == static_cast<std::uint32_t>(p.value.h()) &&
                                 dims[3] == static_cast<std::uint32_t>(p.value.w()));
    if (!ok) throw DataError(origin + ": shape mismatch for " + name);
    need(p.value.size() * 4);
    for (auto& v : p.value.values()) {
      v = le::get_f32(bytes.data() + pos);
      pos += 4;
    }
  }
  if (pos != bytes.size()) throw DataError(origin + ": trailing bytes after checkpoint");
  return ck;
}

}  // namespace demcloud::nn
