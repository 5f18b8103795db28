#include "dapotion/pose_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace dapotion {

using nlohmann::json;

namespace {

double number(const json& v, const char* what) {
  if (!v.is_number()) throw ParseError(std::string("expected number in ") + what);
  double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(std::string("non-finite value in ") + what);
  return d;
}

int count_field(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ParseError(std::string("missing field '") + key + "'");
  if (!it->is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer");
  return it->get<int>();
}

bool in_bins(double v) { return v >= 0.0 && v < kPoseBins; }

}  // namespace

void validate(const PoseSequence& p) {
  if (p.num_frames < 2) throw ParseError("too few frames: need at least 2, got " + std::to_string(p.num_frames));
  if (p.num_joints < 1) throw ParseError("need at least one joint");
  if (p.positions.size() != static_cast<std::size_t>(p.num_frames) * p.num_joints)
    throw ParseError("positions size does not match frames x joints");
  for (const Vec3& v : p.positions) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
      throw ParseError("non-finite joint coordinate");
    if (!in_bins(v.z)) throw ParseError("depth coordinate out of [0, 256)");
    if (p.frame == CoordinateFrame::kBoundingBox && (!in_bins(v.x) || !in_bins(v.y)))
      throw ParseError("coordinate out of [0, 256)");
  }
  if (p.boxes) {
    if (p.boxes->size() != static_cast<std::size_t>(p.num_frames))
      throw ParseError("bboxes must have one entry per frame");
    for (const BBox& b : *p.boxes) {
      if (!std::isfinite(b.x_ul) || !std::isfinite(b.y_ul) || !std::isfinite(b.width) ||
          !std::isfinite(b.height))
        throw ParseError("non-finite bounding box");
      if (b.width <= 0 || b.height <= 0) throw ParseError("bounding box must have positive size");
    }
  }
  if (!p.joint_names.empty() && p.joint_names.size() != static_cast<std::size_t>(p.num_joints))
    throw ParseError("joint_names must have one entry per joint");
}

PoseSequence parse_pose_sequence(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed pose document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("pose document must be an object");

  PoseSequence p;
  p.num_frames = count_field(doc, "frames");
  p.num_joints = count_field(doc, "joints");
  if (p.num_frames < 2) throw ParseError("too few frames: need at least 2, got " + std::to_string(p.num_frames));
  if (p.num_joints < 1) throw ParseError("need at least one joint");

  const json& size = doc.value("image_size", json());
  if (!size.is_array() || size.size() != 2) throw ParseError("image_size must be [w, h]");
  p.image_size = {number(size[0], "image_size"), number(size[1], "image_size")};

  auto pos = doc.find("positions");
  if (pos == doc.end() || !pos->is_array()) throw ParseError("missing positions array");
  if (pos->size() != static_cast<std::size_t>(p.num_frames))
    throw ParseError("positions has " + std::to_string(pos->size()) + " rows, expected " +
                     std::to_string(p.num_frames));
  p.positions.reserve(static_cast<std::size_t>(p.num_frames) * p.num_joints);
  for (const json& row : *pos) {
    if (!row.is_array() || row.size() != static_cast<std::size_t>(p.num_joints))
      throw ParseError("inconsistent row length in positions");
    for (const json& xyz : row) {
      if (!xyz.is_array() || xyz.size() != 3) throw ParseError("joint position must be [x, y, z]");
      p.positions.push_back({number(xyz[0], "positions"), number(xyz[1], "positions"),
                             number(xyz[2], "positions")});
    }
  }

  if (auto it = doc.find("bboxes"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError("bboxes must be an array");
    BBoxSequence boxes;
    for (const json& b : *it) {
      if (!b.is_array() || b.size() != 4) throw ParseError("bbox must be [x_ul, y_ul, w, h]");
      boxes.push_back({number(b[0], "bboxes"), number(b[1], "bboxes"), number(b[2], "bboxes"),
                       number(b[3], "bboxes")});
    }
    p.boxes = std::move(boxes);
  }
  // Without boxes the coordinates are taken to be in the image frame already.
  p.frame = p.boxes ? CoordinateFrame::kBoundingBox : CoordinateFrame::kImage;
  if (auto it = doc.find("label"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("label must be a string");
    p.label = it->get<std::string>();
  }
  if (auto it = doc.find("joint_names"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) throw ParseError("joint_names must be an array");
    for (const json& n : *it) {
      if (!n.is_string()) throw ParseError("joint name must be a string");
      p.joint_names.push_back(n.get<std::string>());
    }
  }
  validate(p);
  return p;
}

PoseSequence parse_pose_sequence(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pose_sequence(ss.str());
}

PoseSequence load_pose_file(const std::filesystem::path& path) {
  std::string text = read_file_text(path);
  try {
    return parse_pose_sequence(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string serialize_pose_sequence(const PoseSequence& p) {
  json doc;
  doc["frames"] = p.num_frames;
  doc["joints"] = p.num_joints;
  doc["image_size"] = {p.image_size[0], p.image_size[1]};
  json rows = json::array();
  for (int t = 0; t < p.num_frames; ++t) {
    json row = json::array();
    for (int j = 0; j < p.num_joints; ++j) {
      const Vec3& v = p.at(t, j);
      row.push_back({v.x, v.y, v.z});
    }
    rows.push_back(std::move(row));
  }
  doc["positions"] = std::move(rows);
  if (p.boxes) {
    json boxes = json::array();
    for (const BBox& b : *p.boxes) boxes.push_back({b.x_ul, b.y_ul, b.width, b.height});
    doc["bboxes"] = std::move(boxes);
  }
  if (p.label) doc["label"] = *p.label;
  if (!p.joint_names.empty()) doc["joint_names"] = p.joint_names;
  return doc.dump() + "\n";
}

PoseSequence bbox_to_image_frame(const PoseSequence& poses, const BBoxSequence& boxes) {
  if (boxes.size() != static_cast<std::size_t>(poses.num_frames))
    throw Error("bounding-box count " + std::to_string(boxes.size()) + " does not match frame count " +
                std::to_string(poses.num_frames));
  for (const BBox& b : boxes)
    if (!(b.width > 0) || !(b.height > 0)) throw Error("bounding box must have positive size");

  PoseSequence out = poses;
  for (int t = 0; t < poses.num_frames; ++t) {
    const BBox& b = boxes[t];
    for (int j = 0; j < poses.num_joints; ++j) {
      Vec3& v = out.at(t, j);
      v.x = b.x_ul + (v.x / kPoseBins) * b.width;
      v.y = b.y_ul + (v.y / kPoseBins) * b.height;
    }
  }
  out.frame = CoordinateFrame::kImage;
  out.boxes.reset();
  return out;
}

PoseSequence to_image_frame(const PoseSequence& poses) {
  if (poses.frame == CoordinateFrame::kImage) return poses;
  if (poses.boxes) return bbox_to_image_frame(poses, *poses.boxes);
  PoseSequence out = poses;
  out.frame = CoordinateFrame::kImage;
  return out;
}

Vec3 GridSpec::forward(const Vec3& p) const {
  return {axes[0].forward(p.x), axes[1].forward(p.y), axes[2].forward(p.z)};
}

Vec3 GridSpec::inverse(const Vec3& v) const {
  return {axes[0].inverse(v.x), axes[1].inverse(v.y), axes[2].inverse(v.z)};
}

void validate(const GridSpec& g) {
  if (g.dims.w < 4 || g.dims.h < 4 || g.dims.d < 4) throw Error("grid dims must be at least 4 per axis");
  for (const AxisMap& a : g.axes)
    if (!(a.scale > 0) || !std::isfinite(a.offset)) throw Error("grid axis scale must be positive");
}

GridSpec make_default_grid(Dims3 dims, std::array<double, 2> image_size) {
  if (!(image_size[0] > 0) || !(image_size[1] > 0))
    throw Error("degenerate image size " + std::to_string(image_size[0]) + "x" +
                std::to_string(image_size[1]));
  GridSpec g;
  g.dims = dims;
  g.axes[0] = {(dims.w - 1) / image_size[0], 0.0};
  g.axes[1] = {(dims.h - 1) / image_size[1], 0.0};
  g.axes[2] = {(dims.d - 1) / kPoseBins, 0.0};
  validate(g);
  return g;
}

GridPoseSequence normalize_to_grid(const PoseSequence& poses, const GridSpec& grid) {
  validate(grid);
  if (!(poses.image_size[0] > 0) || !(poses.image_size[1] > 0)) throw Error("degenerate image size");
  GridPoseSequence out;
  out.num_frames = poses.num_frames;
  out.num_joints = poses.num_joints;
  out.grid = grid;
  out.label = poses.label;
  out.joint_names = poses.joint_names;
  out.voxels.reserve(poses.positions.size());
  const double hi[3] = {grid.dims.w - 1.0, grid.dims.h - 1.0, grid.dims.d - 1.0};
  for (const Vec3& p : poses.positions) {
    Vec3 v = grid.forward(p);
    v.x = std::clamp(v.x, 0.0, hi[0]);
    v.y = std::clamp(v.y, 0.0, hi[1]);
    v.z = std::clamp(v.z, 0.0, hi[2]);
    out.voxels.push_back(v);
  }
  return out;
}

GridPoseSequence normalize_to_grid(const PoseSequence& poses, Dims3 dims) {
  return normalize_to_grid(poses, make_default_grid(dims, poses.image_size));
}

std::vector<std::pair<int, int>> mirror_pairs(const std::vector<std::string>& names) {
  std::map<std::string, int> left, right;
  auto ends_with = [](const std::string& s, const char* suf) {
    return s.size() > 2 && s.compare(s.size() - 2, 2, suf) == 0;
  };
  for (int i = 0; i < static_cast<int>(names.size()); ++i) {
    const std::string& n = names[i];
    if (ends_with(n, "_L")) left[n.substr(0, n.size() - 2)] = i;
    if (ends_with(n, "_R")) right[n.substr(0, n.size() - 2)] = i;
  }
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [base, li] : left)
    if (auto it = right.find(base); it != right.end()) pairs.emplace_back(li, it->second);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& manifest) {
  std::string text = read_file_text(manifest);
  std::vector<ManifestRecord> out;
  const auto dir = manifest.parent_path();
  int line_no = 0;
  for (const std::string& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw ParseError(manifest.string() + ":" + std::to_string(line_no) + ": expected 'path<TAB>label'");
    std::filesystem::path p(std::string(trim(line.substr(0, tab))));
    if (p.is_relative()) p = dir / p;
    out.push_back({p.lexically_normal(), std::string(trim(line.substr(tab + 1)))});
  }
  return out;
}

std::string format_manifest(const std::vector<ManifestRecord>& records,
                            const std::filesystem::path& manifest_dir) {
  std::string out;
  for (const auto& r : records) {
    std::filesystem::path p = r.path;
    if (!manifest_dir.empty()) {
      auto rel = p.lexically_relative(manifest_dir);
      if (!rel.empty()) p = rel;
    }
    out += p.generic_string() + "\t" + r.label + "\n";
  }
  return out;
}

void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestRecord>& records) {
  write_file_atomic(manifest, format_manifest(records, manifest.parent_path()));
}

std::string clip_id(const std::filesystem::path& path) { return path.stem().string(); }

}  // namespace dapotion
