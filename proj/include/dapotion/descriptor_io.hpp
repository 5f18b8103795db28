#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dapotion/encoder.hpp"

namespace dapotion {

inline constexpr std::uint16_t kDescriptorVersion = 1;

/// Layout (little-endian):
///   "DAPT" | u16 version | u8 scheme | u16 J | u8 C | u16 W | u16 H | u16 D |
///   u32 channels | f32 voxels[channels * W * H * D] | u64 FNV-1a of the voxel bytes
std::vector<std::uint8_t> encode_descriptor(const DAPotion& d);
DAPotion decode_descriptor(std::span<const std::uint8_t> bytes);

void write_descriptor(const std::filesystem::path& path, const DAPotion& d);
DAPotion read_descriptor(const std::filesystem::path& path);

/// Which block of a joint's channels a slice shows.
enum class SlicePart { kAuto, kN, kU, kI };

struct SliceSelection {
  int joint = 0;
  SlicePart part = SlicePart::kAuto;
  int channel = -1;  // absolute channel index; overrides joint/part when >= 0
};

/// Binary netpbm image of the z = depth slice: a pixmap when the selected
/// block has exactly three color channels, a graymap otherwise. Values in
/// [0, 1] map to [0, 255]; intensity channels are divided by C first.
std::string render_slice(const DAPotion& d, int depth, const SliceSelection& sel = {});

}  // namespace dapotion
