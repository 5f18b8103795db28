#pragma once

#include <array>
#include <utility>
#include <vector>

#include "dapotion/encoder.hpp"
#include "dapotion/rng.hpp"

namespace dapotion {

struct AugmentConfig {
  bool enabled = true;
  double max_rotation_deg = 15.0;  // per axis
  double max_translation = 4.0;    // voxels per axis
  double flip_prob_y = 0.5;
  double flip_prob_z = 0.5;

  /// Translation bound of 4 voxels at a 64-voxel grid, scaled with the grid.
  static AugmentConfig for_grid(int grid_width);
};

void validate(const AugmentConfig& cfg);

/// What each channel of a descriptor means, for flips and range clamping.
struct ChannelLayout {
  Scheme scheme = Scheme::kNUI;
  int num_joints = 0;
  int num_colors = 0;
  std::vector<std::pair<int, int>> mirror_pairs;  // joint indices swapped on a y flip
};

/// Rotates by `angles_deg` about the x, y and z axes (applied in that order)
/// around the volume centre, then translates. Trilinear sampling, zero
/// outside the source volume.
ChannelVolume affine_transform(const ChannelVolume& v, const std::array<double, 3>& angles_deg,
                               const std::array<double, 3>& translation);

/// Reverses the voxel index along `axis` (0 = x, 1 = y, 2 = z).
ChannelVolume flip_axis(const ChannelVolume& v, int axis);

/// Exchanges the channel blocks of each mirror pair of joints.
void swap_mirror_pairs(ChannelVolume& v, const ChannelLayout& layout);

/// Clamps U/N channels to [0, 1] and I channels to [0, C].
void clamp_to_scheme_range(ChannelVolume& v, const ChannelLayout& layout);

/// Random rotation and translation, then independent y and z flips.
/// Depth-collapsed volumes (D = 1) are only rotated about z and translated in
/// the image plane.
ChannelVolume augment(const ChannelVolume& v, const AugmentConfig& cfg, const ChannelLayout& layout, Rng& rng);

}  // namespace dapotion
