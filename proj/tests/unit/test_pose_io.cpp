#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "dapotion/pose_io.hpp"
#include "dapotion/rng.hpp"
#include "dapotion/synth.hpp"
#include "support/temp_dir.hpp"

using namespace dapotion;

namespace {

PoseSequence random_poses(Rng& rng, bool with_boxes) {
  PoseSequence p;
  p.num_frames = 2 + static_cast<int>(rng.below(6));
  p.num_joints = 1 + static_cast<int>(rng.below(4));
  p.image_size = {rng.uniform(100, 2000), rng.uniform(100, 2000)};
  for (int i = 0; i < p.num_frames * p.num_joints; ++i)
    p.positions.push_back({rng.uniform(0, 256), rng.uniform(0, 256), rng.uniform(0, 256)});
  if (with_boxes) {
    BBoxSequence boxes;
    for (int t = 0; t < p.num_frames; ++t) boxes.push_back({rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 400), rng.uniform(1, 400)});
    p.boxes = boxes;
  } else {
    p.frame = CoordinateFrame::kImage;
  }
  if (rng.bernoulli(0.5)) p.label = "class" + std::to_string(rng.below(10));
  if (rng.bernoulli(0.5))
    for (int j = 0; j < p.num_joints; ++j) p.joint_names.push_back("j" + std::to_string(j));
  return p;
}

}  // namespace

TEST_CASE("minimal document") {
  const auto p = parse_pose_sequence(R"({"frames": 2, "joints": 1, "image_size": [640, 480],
                                         "positions": [[[1, 2, 3]], [[4.5, 5, 6]]], "extra": true})");
  CHECK(p.num_frames == 2);
  CHECK(p.num_joints == 1);
  CHECK(p.at(1, 0) == Vec3{4.5, 5, 6});
  CHECK(p.frame == CoordinateFrame::kImage);
  CHECK_FALSE(p.label.has_value());
}

TEST_CASE("parse errors") {
  auto msg = [](const char* doc) {
    try {
      parse_pose_sequence(doc);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(msg(R"({"frames": 1, "joints": 1, "image_size": [1, 1], "positions": [[[1, 2, 3]]]})").find("too few frames") != std::string::npos);
  CHECK(msg("{not json") .find("malformed") != std::string::npos);
  CHECK(msg(R"({"frames": 2, "joints": 1, "image_size": [1, 1], "positions": [[[1, 2, 300]], [[1, 2, 3]]]})").find("[0, 256)") != std::string::npos);
  CHECK(msg(R"({"frames": 2, "joints": 2, "image_size": [1, 1], "positions": [[[1, 2, 3], [1, 1, 1]], [[1, 2, 3]]]})").find("inconsistent row length") != std::string::npos);
  CHECK(msg(R"({"frames": 2, "joints": 1, "image_size": [1, 1], "positions": [[[1, 2, 3]], [[1, 2, 3]]], "bboxes": [[0, 0, 0, 1], [0, 0, 1, 1]]})") != "no error");
}

TEST_CASE("serialize then parse round-trips random documents") {
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const PoseSequence p = random_poses(rng, k % 2 == 0);
    std::istringstream in(serialize_pose_sequence(p));
    CHECK(parse_pose_sequence(in) == p);
  }
}

TEST_CASE("bounding-box frame to image frame") {
  PoseSequence p;
  p.num_frames = 2;
  p.num_joints = 1;
  p.image_size = {640, 480};
  p.positions = {{128, 0, 17.25}, {0, 255, 3}};
  const BBoxSequence boxes{{10, 20, 100, 50}, {33, 44, 7, 9}};
  const PoseSequence img = bbox_to_image_frame(p, boxes);
  CHECK(img.at(0, 0).x == 60.0);
  CHECK(img.at(0, 0).y == 20.0);
  CHECK(img.at(1, 0).x == 33.0);
  CHECK(img.at(0, 0).z == p.at(0, 0).z);
  CHECK(img.at(1, 0).z == p.at(1, 0).z);
  CHECK(img.frame == CoordinateFrame::kImage);

  const PoseSequence same = bbox_to_image_frame(p, {{0, 0, 256, 256}, {0, 0, 256, 256}});
  CHECK(same.positions == p.positions);

  CHECK_THROWS(bbox_to_image_frame(p, {{0, 0, 1, 1}}));
  CHECK_THROWS(bbox_to_image_frame(p, {{0, 0, 1, 1}, {0, 0, 0, 1}}));
}

TEST_CASE("bounding-box transform is affine in x and y, bit-exact in z") {
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const BBox b{rng.uniform(-20, 80), rng.uniform(-20, 80), rng.uniform(1, 500), rng.uniform(1, 500)};
    const Vec3 p1{rng.uniform(0, 256), rng.uniform(0, 256), rng.uniform(0, 256)};
    const Vec3 p2{rng.uniform(0, 256), rng.uniform(0, 256), rng.uniform(0, 256)};
    const double a = rng.uniform();
    const Vec3 mix{a * p1.x + (1 - a) * p2.x, a * p1.y + (1 - a) * p2.y, a * p1.z + (1 - a) * p2.z};
    PoseSequence p;
    p.num_frames = 1;  // transform only; bypasses parse-time checks
    p.num_joints = 3;
    p.positions = {p1, p2, mix};
    const auto out = bbox_to_image_frame(p, {b});
    CHECK(std::abs(out.at(0, 2).x - (a * out.at(0, 0).x + (1 - a) * out.at(0, 1).x)) < 1e-9);
    CHECK(std::abs(out.at(0, 2).y - (a * out.at(0, 0).y + (1 - a) * out.at(0, 1).y)) < 1e-9);
    for (int j = 0; j < 3; ++j) CHECK(out.at(0, j).z == p.positions[j].z);
  }
}

TEST_CASE("grid mapping: centre, clamping, inverse") {
  PoseSequence p;
  p.num_frames = 2;
  p.num_joints = 2;
  p.image_size = {640, 480};
  p.frame = CoordinateFrame::kImage;
  p.positions = {{320, 240, 128}, {-50, 900, 255.9}, {320, 240, 0}, {700, -1, 300}};
  const auto g = normalize_to_grid(p, Dims3{32, 16, 8});
  CHECK(g.at(0, 0).x == doctest::Approx(15.5));
  CHECK(g.at(0, 0).y == doctest::Approx(7.5));
  CHECK(g.at(0, 0).z == doctest::Approx(3.5));
  CHECK(g.at(0, 1).x == 0.0);
  CHECK(g.at(0, 1).y == 15.0);
  CHECK(g.at(1, 1).x == 31.0);
  CHECK(g.at(1, 1).y == 0.0);
  CHECK(g.at(1, 1).z == 7.0);

  const GridSpec spec = make_default_grid({32, 16, 8}, {640, 480});
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const Vec3 v{rng.uniform(0, 640), rng.uniform(0, 480), rng.uniform(0, 256)};
    const Vec3 back = spec.inverse(spec.forward(v));
    CHECK(back.x == doctest::Approx(v.x).epsilon(1e-12));
    CHECK(back.y == doctest::Approx(v.y).epsilon(1e-12));
    CHECK(back.z == doctest::Approx(v.z).epsilon(1e-12));
  }

  PoseSequence bad = p;
  bad.image_size = {0, 480};
  CHECK_THROWS(normalize_to_grid(bad, Dims3{32, 16, 8}));
  CHECK_THROWS(make_default_grid({3, 16, 8}, {640, 480}));
}

TEST_CASE("grid clamp invariant on random points") {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    PoseSequence p;
    p.num_frames = 2;
    p.num_joints = 3;
    p.image_size = {rng.uniform(10, 1000), rng.uniform(10, 1000)};
    p.frame = CoordinateFrame::kImage;
    for (int i = 0; i < 6; ++i) p.positions.push_back({rng.uniform(-500, 1500), rng.uniform(-500, 1500), rng.uniform(-100, 400)});
    const Dims3 dims{4 + static_cast<int>(rng.below(30)), 4 + static_cast<int>(rng.below(30)), 4 + static_cast<int>(rng.below(30))};
    for (const Vec3& v : normalize_to_grid(p, dims).voxels) {
      CHECK((v.x >= 0 && v.x <= dims.w - 1));
      CHECK((v.y >= 0 && v.y <= dims.h - 1));
      CHECK((v.z >= 0 && v.z <= dims.d - 1));
    }
  }
}

TEST_CASE("mirror pairs from joint names") {
  const auto pairs = mirror_pairs({"head", "wrist_L", "knee_R", "wrist_R", "knee_L", "ankle_L"});
  CHECK(pairs == std::vector<std::pair<int, int>>{{1, 3}, {4, 2}});
}

TEST_CASE("manifests resolve relative paths and round-trip") {
  testing_support::TempDir dir;
  const auto manifest = dir.path() / "m.txt";
  write_file_atomic(manifest, std::string("# comment\nclips/a.json\trun\n/abs/b.json\tjump\n\n"));
  const auto records = read_manifest(manifest);
  REQUIRE(records.size() == 2);
  CHECK(records[0].path == (dir.path() / "clips/a.json").lexically_normal());
  CHECK(records[0].label == "run");
  CHECK(records[1].path == std::filesystem::path("/abs/b.json"));
  write_manifest(dir.path() / "n.txt", records);
  CHECK(read_manifest(dir.path() / "n.txt") == records);
  CHECK(clip_id(records[0].path) == "a");

  write_file_atomic(manifest, std::string("no tab here\n"));
  CHECK_THROWS_AS(read_manifest(manifest), ParseError);
}

TEST_CASE("every synthetic clip parses") {
  Rng rng(5);
  for (auto c : synth::all_classes()) {
    synth::SynthSpec spec;
    spec.motion = c;
    spec.seed = rng.next();
    spec.noise_std = 10;
    const PoseSequence p = synth::generate_clip(spec);
    CHECK(parse_pose_sequence(serialize_pose_sequence(p)) == p);
  }
}
