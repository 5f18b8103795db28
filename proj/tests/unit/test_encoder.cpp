#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support/encoder_oracle.hpp"

using namespace dapotion;

namespace {

EncoderConfig small_config(Dims3 grid, int colors, Scheme scheme, double sigma = 1.0) {
  EncoderConfig cfg;
  cfg.grid = grid;
  cfg.channels = colors;
  cfg.scheme = scheme;
  cfg.sigma = sigma;
  return cfg;
}

ChannelVolume random_nonnegative(Rng& rng, Dims3 dims, int channels, bool with_zero_channel) {
  ChannelVolume v(dims, channels);
  for (float& x : v.data()) x = rng.bernoulli(0.3) ? 0.0f : static_cast<float>(rng.uniform(0, 5));
  if (with_zero_channel) std::fill(v.channel(channels - 1).begin(), v.channel(channels - 1).end(), 0.0f);
  return v;
}

}  // namespace

TEST_CASE("color code endpoints and midpoints") {
  CHECK(color_code(1, 10, 2) == CodeVector{0.0, 1.0});
  CHECK(color_code(10, 10, 2) == CodeVector{1.0, 0.0});
  CHECK(color_code(5, 9, 2) == CodeVector{0.5, 0.5});
  CHECK(color_code(5, 9, 3) == CodeVector{0.0, 1.0, 0.0});
  CHECK(color_code(3, 9, 3) == CodeVector{0.0, 0.5, 0.5});
  CHECK_THROWS(color_code(0, 9, 3));
  CHECK_THROWS(color_code(10, 9, 3));
  CHECK_THROWS(color_code(1, 1, 2));
  CHECK_THROWS(color_code(1, 5, 1));
}

TEST_CASE("two-channel code equals the closed form; hat codes partition unity") {
  for (int T = 2; T <= 64; ++T)
    for (int t = 1; t <= T; ++t) {
      const double s = static_cast<double>(t - 1) / (T - 1);
      const CodeVector o = color_code(t, T, 2);
      CHECK(std::abs(o[0] - s) <= 1e-15);
      CHECK(std::abs(o[1] - (1 - s)) <= 1e-15);
      for (int C = 2; C <= 5; ++C) {
        const CodeVector h = color_code(t, T, C);
        const auto ref = oracle::hat_code(t, T, C);
        double sum = 0;
        int nonzero = 0;
        for (int c = 0; c < C; ++c) {
          CHECK(h[c] >= 0.0);
          CHECK(h[c] <= 1.0);
          CHECK(std::abs(h[c] - ref[c]) < 1e-12);
          sum += h[c];
          nonzero += h[c] != 0.0;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        CHECK(nonzero <= 2);
      }
    }
}

TEST_CASE("heatmap peak, one-sigma value and truncation") {
  const auto h = rasterize_heatmap({4, 4, 4}, {9, 9, 9}, 1.5, 3.0);
  CHECK(h.at(0, 4, 4, 4) == 1.0f);
  CHECK(h.at(0, 4, 4, 4) == *std::max_element(h.data().begin(), h.data().end()));
  const auto g = rasterize_heatmap({2, 2, 2}, {8, 8, 8}, 1.0, 3.0);
  CHECK(g.at(0, 3, 2, 2) == doctest::Approx(std::exp(-0.5)).epsilon(1e-7));
  CHECK(g.at(0, 3, 2, 2) == doctest::Approx(0.60653).epsilon(1e-5));
  // sqrt(3^2 + 1) > 3 sigma
  CHECK(g.at(0, 5, 3, 2) == 0.0f);
  CHECK(g.at(0, 5, 2, 2) > 0.0f);
}

TEST_CASE("colorize and aggregate") {
  Rng rng(1);
  ChannelVolume h({4, 4, 4}, 1);
  for (float& v : h.data()) v = static_cast<float>(rng.uniform());
  const auto a = colorize(h, {1.0, 0.0});
  CHECK(std::equal(a.channel(0).begin(), a.channel(0).end(), h.channel(0).begin()));
  CHECK(std::all_of(a.channel(1).begin(), a.channel(1).end(), [](float v) { return v == 0; }));
  const auto m = colorize(h, {0.5, 0.5});
  for (std::size_t i = 0; i < h.data().size(); ++i) {
    CHECK(m.channel(0)[i] == h.data()[i] / 2);
    CHECK(m.channel(1)[i] == h.data()[i] / 2);
  }
  const auto c3 = colorize(h, color_code(4, 9, 3));
  for (std::size_t i = 0; i < h.data().size(); ++i)
    CHECK(c3.channel(0)[i] + c3.channel(1)[i] + c3.channel(2)[i] == doctest::Approx(h.data()[i]).epsilon(1e-6));

  // Static joint on a voxel, T = 3, C = 2: (0,1) + (.5,.5) + (1,0).
  std::vector<ChannelVolume> frames;
  for (int t = 1; t <= 3; ++t) frames.push_back(colorize(rasterize_heatmap({2, 2, 2}, {5, 5, 5}, 1.0, 3.0), color_code(t, 3, 2)));
  const auto s = aggregate_sum(frames);
  CHECK(s.at(0, 2, 2, 2) == 1.5f);
  CHECK(s.at(1, 2, 2, 2) == 1.5f);
  CHECK(aggregate_sum(std::span(frames).subspan(1, 1)) == frames[1]);

  const auto ab = aggregate_sum(std::span(frames).first(2));
  const auto rest = aggregate_sum(std::span(frames).subspan(2));
  for (std::size_t i = 0; i < s.data().size(); ++i) CHECK(s.data()[i] == doctest::Approx(ab.data()[i] + rest.data()[i]));
  CHECK_THROWS(aggregate_sum(std::span<const ChannelVolume>{}));
  std::vector<ChannelVolume> mismatched{ChannelVolume({2, 2, 2}, 2), ChannelVolume({2, 2, 3}, 2)};
  CHECK_THROWS_AS(aggregate_sum(mismatched), ShapeError);
}

TEST_CASE("U normalization: unit max, zero channels, scale invariance") {
  Rng rng(2);
  const auto s = random_nonnegative(rng, {5, 4, 3}, 3, true);
  const auto u = normalize_U(s);
  for (int c = 0; c < 2; ++c) CHECK(*std::max_element(u.channel(c).begin(), u.channel(c).end()) == 1.0f);
  CHECK(std::all_of(u.channel(2).begin(), u.channel(2).end(), [](float v) { return v == 0; }));
  ChannelVolume scaled = s;
  for (float& v : scaled.data()) v *= 7.5f;
  const auto us = normalize_U(scaled);
  for (std::size_t i = 0; i < u.data().size(); ++i) CHECK(std::abs(u.data()[i] - us.data()[i]) < 1e-6);
}

TEST_CASE("intensity and normalized volumes") {
  ChannelVolume u({1, 1, 2}, 2);
  u.at(0, 0, 0, 0) = 1;
  u.at(1, 0, 0, 0) = 1;
  const auto i = intensity_I(u);
  CHECK(i.channels() == 1);
  CHECK(i.at(0, 0, 0, 0) == 2.0f);
  CHECK(i.at(0, 0, 0, 1) == 0.0f);
  const auto n = normalize_N(u, i, 1.0);
  CHECK(n.at(0, 0, 0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(n.at(1, 0, 0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(n.at(0, 0, 0, 1) == 0.0f);

  Rng rng(3);
  ChannelVolume r({4, 3, 5}, 3);
  for (float& v : r.data()) v = static_cast<float>(rng.uniform());
  const auto ri = intensity_I(r);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 3; ++y)
      for (int z = 0; z < 5; ++z) {
        double sum = 0;
        for (int c = 0; c < 3; ++c) sum += r.at(c, x, y, z);
        CHECK(ri.at(0, x, y, z) == doctest::Approx(sum).epsilon(1e-6));
      }
  const auto rn = normalize_N(r, ri, 1.0);
  for (std::size_t k = 0; k < rn.data().size(); ++k) CHECK(rn.data()[k] <= r.data()[k]);
}

TEST_CASE("channel counts per scheme") {
  Rng rng(4);
  const auto poses = oracle::random_grid_poses(rng, {8, 8, 8}, 3, 2);
  CHECK(encode_clip(poses, small_config({8, 8, 8}, 3, Scheme::kNUI)).channel_count() == 14);
  const auto p16 = oracle::random_grid_poses(rng, {8, 8, 8}, 3, 16);
  CHECK(encode_clip(p16, small_config({8, 8, 8}, 3, Scheme::kU)).channel_count() == 48);
  CHECK(encode_clip(p16, small_config({8, 8, 8}, 3, Scheme::kN)).channel_count() == 48);
  CHECK(encode_clip(p16, small_config({8, 8, 8}, 3, Scheme::kI)).channel_count() == 16);
  CHECK(channels_per_joint(Scheme::kNUI, 4) == 9);
}

TEST_CASE("encoder matches the nested-loop reference") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Dims3 dims{4 + static_cast<int>(rng.below(5)), 4 + static_cast<int>(rng.below(5)), 4 + static_cast<int>(rng.below(5))};
    const int T = 2 + static_cast<int>(rng.below(3));
    const int J = 1 + static_cast<int>(rng.below(2));
    const int C = 2 + static_cast<int>(rng.below(2));
    const Scheme scheme = static_cast<Scheme>(rng.below(4));
    EncoderConfig cfg = small_config(dims, C, scheme, rng.uniform(0.6, 2.0));
    cfg.collapse_depth = trial % 5 == 4;
    const auto poses = oracle::random_grid_poses(rng, dims, T, J);
    const DAPotion d = encode_clip(poses, cfg);
    INFO("trial " << trial);
    CHECK(oracle::max_abs_diff(d.volume, oracle::encode(poses, cfg)) <= 1e-6);
  }
}

TEST_CASE("range invariants of an encoded clip") {
  Rng rng(6);
  const int C = 3;
  const auto poses = oracle::random_grid_poses(rng, {8, 8, 8}, 4, 2);
  const DAPotion d = encode_clip(poses, small_config({8, 8, 8}, C, Scheme::kNUI));
  for (int j = 0; j < 2; ++j) {
    const int base = j * (2 * C + 1);
    for (int c = 0; c < C; ++c) {
      for (float v : d.volume.channel(base + c)) CHECK((v >= 0 && v < 1));
      const auto u = d.volume.channel(base + C + c);
      CHECK(*std::max_element(u.begin(), u.end()) == 1.0f);
    }
    for (float v : d.volume.channel(base + 2 * C)) CHECK((v >= 0 && v <= C));
  }
}

TEST_CASE("reversing time reverses the color channels") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int C = 2 + trial % 3;
    const int T = 2 + static_cast<int>(rng.below(6));
    const auto poses = oracle::random_grid_poses(rng, {8, 8, 8}, T, 2);
    GridPoseSequence reversed = poses;
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < 2; ++j) reversed.at(t, j) = poses.at(T - 1 - t, j);
    const auto cfg = small_config({8, 8, 8}, C, Scheme::kNUI, 1.2);
    const auto a = encode_clip(poses, cfg).volume;
    const auto b = encode_clip(reversed, cfg).volume;
    for (int j = 0; j < 2; ++j) {
      const int base = j * (2 * C + 1);
      for (int c = 0; c < C; ++c)
        for (int block : {0, C}) {
          const auto x = a.channel(base + block + c), y = b.channel(base + block + C - 1 - c);
          for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) <= 1e-6);
        }
      const auto x = a.channel(base + 2 * C), y = b.channel(base + 2 * C);
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) <= 1e-6);
    }
  }
}

TEST_CASE("mirroring joints mirrors the descriptor") {
  Rng rng(8);
  const Dims3 dims{12, 12, 12};
  const double sigma = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    // Supports (radius 3) strictly inside the grid.
    GridPoseSequence poses;
    poses.num_frames = 4;
    poses.num_joints = 2;
    poses.grid.dims = dims;
    for (int i = 0; i < 8; ++i) poses.voxels.push_back({rng.uniform(3.5, 7.5), rng.uniform(3.5, 7.5), rng.uniform(3.5, 7.5)});
    GridPoseSequence mirrored = poses;
    for (Vec3& v : mirrored.voxels) {
      double* coord = axis == 0 ? &v.x : axis == 1 ? &v.y : &v.z;
      *coord = 11.0 - *coord;
    }
    const auto cfg = small_config(dims, 3, Scheme::kNUI, sigma);
    const auto a = encode_clip(poses, cfg).volume;
    const auto b = encode_clip(mirrored, cfg).volume;
    double worst = 0;
    for (int c = 0; c < a.channels(); ++c)
      for (int x = 0; x < 12; ++x)
        for (int y = 0; y < 12; ++y)
          for (int z = 0; z < 12; ++z) {
            const int mx = axis == 0 ? 11 - x : x, my = axis == 1 ? 11 - y : y, mz = axis == 2 ? 11 - z : z;
            worst = std::max(worst, static_cast<double>(std::abs(a.at(c, x, y, z) - b.at(c, mx, my, mz))));
          }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("depth collapse sums out z") {
  Rng rng(9);
  const auto poses = oracle::random_grid_poses(rng, {8, 8, 8}, 3, 1);
  EncoderConfig cfg = small_config({8, 8, 8}, 2, Scheme::kU);
  cfg.collapse_depth = true;
  const DAPotion d = encode_clip(poses, cfg);
  CHECK(d.dims() == Dims3{8, 8, 1});
  CHECK(oracle::max_abs_diff(d.volume, oracle::encode(poses, cfg)) <= 1e-6);
}

TEST_CASE("resampling") {
  Rng rng(10);
  ChannelVolume v({3, 4, 5}, 2);
  for (float& x : v.data()) x = static_cast<float>(rng.uniform());
  CHECK(resample(v, {3, 4, 5}) == v);

  const auto k = resample(ChannelVolume({3, 4, 5}, 1, 0.75f), {7, 2, 9});
  CHECK(std::all_of(k.data().begin(), k.data().end(), [](float x) { return std::abs(x - 0.75f) < 1e-6; }));

  ChannelVolume cube({2, 2, 2}, 1);
  for (float& x : cube.data()) x = static_cast<float>(rng.uniform());
  const auto up = resample(cube, {3, 3, 3});
  for (int y : {0, 2})
    for (int z : {0, 2}) {
      CHECK(up.at(0, 1, y, z) == doctest::Approx((cube.at(0, 0, y / 2, z / 2) + cube.at(0, 1, y / 2, z / 2)) / 2));
      CHECK(up.at(0, y, 1, z) == doctest::Approx((cube.at(0, y / 2, 0, z / 2) + cube.at(0, y / 2, 1, z / 2)) / 2));
      CHECK(up.at(0, y, z, 1) == doctest::Approx((cube.at(0, y / 2, z / 2, 0) + cube.at(0, y / 2, z / 2, 1)) / 2));
    }
  CHECK(up.at(0, 0, 0, 0) == cube.at(0, 0, 0, 0));
  CHECK_THROWS(resample(v, {1, 4, 5}));
}

TEST_CASE("encoder config validation") {
  EncoderConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.channels = 1;
  CHECK_THROWS(validate(cfg));
  cfg = EncoderConfig{};
  cfg.sigma = 0;
  CHECK_THROWS(validate(cfg));
  cfg = EncoderConfig{};
  cfg.truncation_radius = 0.5;
  CHECK_THROWS(validate(cfg));
  cfg = EncoderConfig{};
  cfg.epsilon = 0;
  CHECK_THROWS(validate(cfg));
  CHECK(EncoderConfig::default_sigma(64) == 4.0);
  CHECK(EncoderConfig::default_sigma(16) == 1.0);
  CHECK(parse_scheme("n+u+i") == Scheme::kNUI);
  CHECK_THROWS(parse_scheme("x"));
}
