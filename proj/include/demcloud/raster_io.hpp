#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "demcloud/grid.hpp"

namespace demcloud {

// CFDR layout, little-endian:
//   0-3 "CFDR" | 4-5 version u16 | 6-9 width u32 | 10-13 height u32 |
//   14-17 nodata f32 | width*height f32, row-major, top row first.
inline constexpr char kCfdrMagic[4] = {'C', 'F', 'D', 'R'};
inline constexpr std::uint16_t kCfdrVersion = 1;
inline constexpr std::size_t kCfdrHeaderSize = 18;

DemGrid read_dem(const std::filesystem::path& path);
void write_dem(const DemGrid& grid, const std::filesystem::path& path);

// Byte-level codec used by the file functions and by the multi-channel
// texture format.
std::vector<std::uint8_t> encode_dem(const DemGrid& grid);
DemGrid decode_dem(const std::vector<std::uint8_t>& bytes, const std::string& origin);

// Masks are binary P5 PGM with maxval 255; 0 -> 0, 255 -> 1.
MaskGrid read_mask(const std::filesystem::path& path);
void write_mask(const MaskGrid& mask, const std::filesystem::path& path);

void write_gray(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_gray(const std::filesystem::path& path);

// Confidence maps reuse CFDR with a -1 sentinel that never occurs; values
// are checked against [0,1] on read.
ConfidenceGrid read_confidence(const std::filesystem::path& path);
void write_confidence(const ConfidenceGrid& grid, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

namespace le {
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v);
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint16_t get_u16(const std::uint8_t* p);
std::uint32_t get_u32(const std::uint8_t* p);
std::uint64_t get_u64(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);
}  // namespace le

}  // namespace demcloud
