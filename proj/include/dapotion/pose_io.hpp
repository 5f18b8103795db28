#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dapotion/common.hpp"

namespace dapotion {

/// Pose regressor output is discretized into this many bins per axis.
inline constexpr double kPoseBins = 256.0;

struct Vec3 {
  double x = 0, y = 0, z = 0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct BBox {
  double x_ul = 0, y_ul = 0, width = 0, height = 0;
  friend bool operator==(const BBox&, const BBox&) = default;
};

using BBoxSequence = std::vector<BBox>;

enum class CoordinateFrame { kBoundingBox, kImage };

/// T x J joint positions. Row-major over (frame, joint).
struct PoseSequence {
  int num_frames = 0;
  int num_joints = 0;
  std::vector<Vec3> positions;
  std::array<double, 2> image_size{0, 0};  // width_px, height_px
  CoordinateFrame frame = CoordinateFrame::kBoundingBox;
  std::optional<BBoxSequence> boxes;
  std::optional<std::string> label;
  std::vector<std::string> joint_names;

  const Vec3& at(int t, int j) const { return positions[static_cast<std::size_t>(t) * num_joints + j]; }
  Vec3& at(int t, int j) { return positions[static_cast<std::size_t>(t) * num_joints + j]; }

  friend bool operator==(const PoseSequence&, const PoseSequence&) = default;
};

/// Throws ParseError when the sequence breaks a PoseSequence invariant.
void validate(const PoseSequence& poses);

PoseSequence parse_pose_sequence(std::istream& in);
PoseSequence parse_pose_sequence(std::string_view text);
PoseSequence load_pose_file(const std::filesystem::path& path);
std::string serialize_pose_sequence(const PoseSequence& poses);

/// Maps (x, y) from the regressor's bounding-box frame into image pixels.
/// z is carried through untouched.
PoseSequence bbox_to_image_frame(const PoseSequence& poses, const BBoxSequence& boxes);

/// Applies bbox_to_image_frame when the sequence carries boxes, otherwise
/// relabels the coordinates as image-frame.
PoseSequence to_image_frame(const PoseSequence& poses);

struct Dims3 {
  int w = 0, h = 0, d = 0;
  std::size_t voxels() const { return static_cast<std::size_t>(w) * h * d; }
  friend bool operator==(const Dims3&, const Dims3&) = default;
};

struct AxisMap {
  double scale = 1.0;
  double offset = 0.0;
  double forward(double p) const { return scale * p + offset; }
  double inverse(double v) const { return (v - offset) / scale; }
};

struct GridSpec {
  Dims3 dims;
  std::array<AxisMap, 3> axes;

  Vec3 forward(const Vec3& p) const;
  Vec3 inverse(const Vec3& v) const;
};

void validate(const GridSpec& grid);

/// Image extent onto [0, W-1] x [0, H-1], depth [0, 256) onto [0, D-1].
GridSpec make_default_grid(Dims3 dims, std::array<double, 2> image_size);

struct GridPoseSequence {
  int num_frames = 0;
  int num_joints = 0;
  std::vector<Vec3> voxels;  // continuous voxel coordinates, row-major (frame, joint)
  GridSpec grid;
  std::optional<std::string> label;
  std::vector<std::string> joint_names;

  const Vec3& at(int t, int j) const { return voxels[static_cast<std::size_t>(t) * num_joints + j]; }
  Vec3& at(int t, int j) { return voxels[static_cast<std::size_t>(t) * num_joints + j]; }
};

GridPoseSequence normalize_to_grid(const PoseSequence& poses, const GridSpec& grid);
GridPoseSequence normalize_to_grid(const PoseSequence& poses, Dims3 dims);

/// Pairs (left, right) of joint indices whose names differ only by an
/// "_L" / "_R" suffix.
std::vector<std::pair<int, int>> mirror_pairs(const std::vector<std::string>& joint_names);

struct ManifestRecord {
  std::filesystem::path path;
  std::string label;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// One `path<TAB>label` record per line. Relative paths resolve against the
/// manifest's directory.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& manifest);
std::string format_manifest(const std::vector<ManifestRecord>& records,
                            const std::filesystem::path& manifest_dir);
void write_manifest(const std::filesystem::path& manifest,
                    const std::vector<ManifestRecord>& records);

/// Identifier used for a clip in score files: the file stem of its path.
std::string clip_id(const std::filesystem::path& path);

}  // namespace dapotion
