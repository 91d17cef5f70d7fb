#include "demcloud/raster_io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace demcloud {

namespace le {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const std::uint8_t* p) {
  return static_cast<std::uint64_t>(get_u32(p)) |
         (static_cast<std::uint64_t>(get_u32(p + 4)) << 32);
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace le

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<std::uint8_t> encode_dem(const DemGrid& grid) {
  std::vector<std::uint8_t> out;
  out.reserve(kCfdrHeaderSize + grid.size() * 4);
  out.insert(out.end(), std::begin(kCfdrMagic), std::end(kCfdrMagic));
  le::put_u16(out, kCfdrVersion);
  le::put_u32(out, grid.width());
  le::put_u32(out, grid.height());
  le::put_f32(out, grid.nodata());
  for (float v : grid.values()) le::put_f32(out, v);
  return out;
}

DemGrid decode_dem(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  if (bytes.size() < kCfdrHeaderSize) {
    throw DataError(origin + ": truncated CFDR header (" + std::to_string(bytes.size()) +
                    " bytes)");
  }
  if (std::memcmp(bytes.data(), kCfdrMagic, 4) != 0) {
    throw DataError(origin + ": bad magic, expected CFDR");
  }
  const auto version = le::get_u16(bytes.data() + 4);
  if (version != kCfdrVersion) {
    throw DataError(origin + ": unsupported CFDR version " + std::to_string(version));
  }
  const auto width = le::get_u32(bytes.data() + 6);
  const auto height = le::get_u32(bytes.data() + 10);
  const float nodata = le::get_f32(bytes.data() + 14);
  if (!std::isfinite(nodata)) throw DataError(origin + ": nodata sentinel is not finite");

  const std::uint64_t count = static_cast<std::uint64_t>(width) * height;
  const std::uint64_t expected = kCfdrHeaderSize + count * 4;
  if (bytes.size() != expected) {
    throw DataError(origin + ": payload length mismatch, expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<float> values(count);
  const std::uint8_t* p = bytes.data() + kCfdrHeaderSize;
  for (std::uint64_t i = 0; i < count; ++i, p += 4) {
    const float v = le::get_f32(p);
    if (!std::isfinite(v)) {
      throw DataError(origin + ": non-finite value at x=" + std::to_string(i % width) +
                      " y=" + std::to_string(i / width));
    }
    values[i] = v;
  }
  return DemGrid(width, height, nodata, std::move(values));
}

DemGrid read_dem(const std::filesystem::path& path) {
  return decode_dem(read_file_bytes(path), path.string());
}

void write_dem(const DemGrid& grid, const std::filesystem::path& path) {
  write_file_bytes(path, encode_dem(grid));
}

namespace {

struct PgmImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;
};

PgmImage parse_pgm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* field) -> std::uint32_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw DataError(origin + ": malformed PGM header field " + field);
    }
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 0xFFFFFFFFull) throw DataError(origin + ": PGM header value overflow");
    }
    return static_cast<std::uint32_t>(v);
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw DataError(origin + ": not a binary (P5) PGM file");
  }
  pos = 2;
  PgmImage img;
  img.width = read_uint("width");
  img.height = read_uint("height");
  const auto maxval = read_uint("maxval");
  if (maxval != 255) {
    throw DataError(origin + ": PGM maxval must be 255, found " + std::to_string(maxval));
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw DataError(origin + ": malformed PGM header");
  }
  ++pos;
  const std::uint64_t count = static_cast<std::uint64_t>(img.width) * img.height;
  if (bytes.size() - pos != count) {
    throw DataError(origin + ": PGM payload has " + std::to_string(bytes.size() - pos) +
                    " bytes, expected " + std::to_string(count));
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return img;
}

std::vector<std::uint8_t> encode_pgm(std::uint32_t width, std::uint32_t height,
                                     std::span<const std::uint8_t> pixels) {
  const std::string header =
      "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

}  // namespace

MaskGrid read_mask(const std::filesystem::path& path) {
  auto img = parse_pgm(read_file_bytes(path), path.string());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    auto& v = img.pixels[i];
    if (v == 255) {
      v = 1;
    } else if (v != 0) {
      throw DataError(path.string() + ": mask pixel value " + std::to_string(v) +
                      " at x=" + std::to_string(i % img.width) +
                      " y=" + std::to_string(i / img.width) + " is neither 0 nor 255");
    }
  }
  return MaskGrid(img.width, img.height, std::move(img.pixels));
}

void write_mask(const MaskGrid& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> pixels(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] > 1) throw InvariantError("mask value outside {0,1}");
    pixels[i] = mask[i] ? 255 : 0;
  }
  write_file_bytes(path, encode_pgm(mask.width(), mask.height(), pixels));
}

void write_gray(const GrayImage& image, const std::filesystem::path& path) {
  write_file_bytes(path, encode_pgm(image.width(), image.height(), image.values()));
}

GrayImage read_gray(const std::filesystem::path& path) {
  auto img = parse_pgm(read_file_bytes(path), path.string());
  return GrayImage(img.width, img.height, std::move(img.pixels));
}

ConfidenceGrid read_confidence(const std::filesystem::path& path) {
  auto dem = read_dem(path);
  for (std::size_t i = 0; i < dem.size(); ++i) {
    if (dem[i] < 0.0f || dem[i] > 1.0f) {
      throw DataError(path.string() + ": confidence outside [0,1] at index " +
                      std::to_string(i));
    }
  }
  std::vector<float> values(dem.values().begin(), dem.values().end());
  return ConfidenceGrid(dem.width(), dem.height(), std::move(values));
}

void write_confidence(const ConfidenceGrid& grid, const std::filesystem::path& path) {
  std::vector<float> values(grid.values().begin(), grid.values().end());
  write_dem(DemGrid(grid.width(), grid.height(), -1.0f, std::move(values)), path);
}

}  // namespace demcloud
