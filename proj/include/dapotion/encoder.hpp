#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dapotion/pose_io.hpp"

namespace dapotion {

enum class Scheme : std::uint8_t { kU = 0, kI = 1, kN = 2, kNUI = 3 };

std::string_view scheme_name(Scheme s);  // "u", "i", "n", "nui"
Scheme parse_scheme(std::string_view name);

/// Channels per joint for a scheme: C for U and N, 1 for I, 2C+1 for N+U+I.
int channels_per_joint(Scheme s, int num_colors);

/// Dense W x H x D x C grid of 32-bit values, channel-major with z fastest:
/// index = ((c * W + x) * H + y) * D + z.
class ChannelVolume {
 public:
  ChannelVolume() = default;
  ChannelVolume(Dims3 dims, int channels, float fill = 0.0f);

  Dims3 dims() const { return dims_; }
  int channels() const { return channels_; }
  std::size_t channel_size() const { return dims_.voxels(); }

  float& at(int c, int x, int y, int z) { return data_[index(c, x, y, z)]; }
  float at(int c, int x, int y, int z) const { return data_[index(c, x, y, z)]; }

  std::span<float> channel(int c) { return {data_.data() + c * channel_size(), channel_size()}; }
  std::span<const float> channel(int c) const { return {data_.data() + c * channel_size(), channel_size()}; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  friend bool operator==(const ChannelVolume&, const ChannelVolume&) = default;

 private:
  std::size_t index(int c, int x, int y, int z) const {
    return ((static_cast<std::size_t>(c) * dims_.w + x) * dims_.h + y) * dims_.d + z;
  }

  Dims3 dims_;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Temporal color code: C nonnegative weights summing to one.
using CodeVector = std::vector<double>;

/// Piecewise-linear hat code over normalized time s = (t-1)/(T-1). Channel c
/// (1-based) peaks at s = (C-c)/(C-1); C = 2 gives ((t-1)/(T-1), 1-(t-1)/(T-1)).
CodeVector color_code(int t, int num_frames, int num_colors);

struct EncoderConfig {
  Dims3 grid{32, 32, 32};
  double sigma = 2.0;  // voxels
  int channels = 3;
  Scheme scheme = Scheme::kNUI;
  double truncation_radius = 3.0;  // multiples of sigma
  double epsilon = 1.0;
  /// Sum out the depth axis before normalization (2D ablation).
  bool collapse_depth = false;

  /// sigma = 4 voxels at a 64-voxel grid, scaled with the grid width.
  static double default_sigma(int grid_width) { return 4.0 * grid_width / 64.0; }
};

void validate(const EncoderConfig& cfg);
std::uint64_t config_hash(const EncoderConfig& cfg);

struct DAPotion {
  Scheme scheme = Scheme::kNUI;
  int num_joints = 0;
  int num_colors = 0;
  ChannelVolume volume;  // channels = num_joints * channels_per_joint(scheme, num_colors)
  std::string source_id;
  std::uint64_t config_hash = 0;

  Dims3 dims() const { return volume.dims(); }
  int channel_count() const { return volume.channels(); }
};

/// Single-channel truncated isotropic Gaussian with unit peak.
ChannelVolume rasterize_heatmap(const Vec3& center, Dims3 dims, double sigma, double truncation_radius);

/// out[c] = h * o_c.
ChannelVolume colorize(const ChannelVolume& heatmap, const CodeVector& code);

/// Elementwise sum over frames.
ChannelVolume aggregate_sum(std::span<const ChannelVolume> colorized);

/// Each channel divided by its own maximum; all-zero channels stay zero.
ChannelVolume normalize_U(const ChannelVolume& s);

/// Channel sum of a U volume.
ChannelVolume intensity_I(const ChannelVolume& u);

/// U / (epsilon + I).
ChannelVolume normalize_N(const ChannelVolume& u, const ChannelVolume& i, double epsilon);

/// Stacks the per-joint descriptors in joint order. N+U+I stacks [N, U, I]
/// within each joint.
DAPotion encode_clip(const GridPoseSequence& poses, const EncoderConfig& cfg);

/// Full pipeline from a parsed pose file: image frame, grid, descriptor.
DAPotion encode_pose_sequence(const PoseSequence& poses, const EncoderConfig& cfg);

/// Channelwise trilinear resampling with corner-aligned sampling.
ChannelVolume resample(const ChannelVolume& v, Dims3 target);

}  // namespace dapotion
