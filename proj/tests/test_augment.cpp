#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mmpoint/augment.hpp"
#include "mmpoint/core.hpp"
#include "mmpoint/hashing.hpp"
#include "mmpoint/render.hpp"
#include "mmpoint/shapes.hpp"

using namespace mmpoint;
using namespace mmpoint::aug;

namespace {

constexpr double kPi = 3.14159265358979323846;

Augment3DConfig identity3d() {
  Augment3DConfig c;
  c.rotate_max_deg = 0.0;
  c.scale_lo = 1.0;
  c.scale_hi = 1.0;
  c.jitter_sigma = 0.0;
  c.jitter_clip = 0.0;
  c.dropout_max = 0.0;
  return c;
}

PointCloud helix_cloud(int n = 128) {
  Tensor xyz({n, 3});
  for (int i = 0; i < n; ++i) {
    double t = i / static_cast<double>(n - 1);
    xyz.at(i, 0) = std::cos(8 * kPi * t) * (1.0 - 0.5 * t);
    xyz.at(i, 1) = std::sin(8 * kPi * t) * (1.0 - 0.5 * t);
    xyz.at(i, 2) = 2.0 * t - 1.0;
  }
  return PointCloud{normalize_cloud(xyz), 3, 21};
}

std::vector<double> pairwise_distances(const PointCloud& c) {
  int n = c.num_points();
  std::vector<double> d;
  d.reserve(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double dx = c.xyz.at(i, 0) - c.xyz.at(j, 0);
      double dy = c.xyz.at(i, 1) - c.xyz.at(j, 1);
      double dz = c.xyz.at(i, 2) - c.xyz.at(j, 2);
      d.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
    }
  return d;
}

Tensor gradient_image(int res, double phase) {
  Tensor img({res, res});
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x)
      img.at(y, x) = 0.5 + 0.5 * std::sin(phase + 0.3 * x + 0.17 * y) *
                               std::cos(0.21 * y - phase);
  return img;
}

std::vector<AugmentStage> zeroed_catalog() {
  return {
      {"basic", {resized_crop(1.0, 1.0, 1.0, 1.0, false), horizontal_flip(0.0)}},
      {"jitter", {color_jitter(0.0, 0.0)}},
      {"blur", {gaussian_blur(0.0, 0.0)}},
      {"erase", {random_erase(0.0, 0.0, 1.0, 1.0)}},
      {"graymix", {grayscale_mix(0.0, 0.0)}},
  };
}

std::vector<Tensor> probe_images() {
  std::vector<Tensor> probe;
  Stream s(2027);
  for (int c = 0; c < 8; ++c) {
    PointCloud cloud = shapes::generate_object(shapes::draw_spec(c, s), 256, s, c);
    ViewSet vs = render::render_views(cloud, render::CameraRig{}, 32);
    for (int k = 0; k < 4; ++k) probe.push_back(vs.views[static_cast<size_t>(k * 6)].pixels);
  }
  return probe;
}

}  // namespace

TEST_CASE("identity strengths reproduce the cloud in both variants") {
  PointCloud cloud = helix_cloud();
  Stream s(1);
  auto [p1, p2] = augment_point_cloud(cloud, identity3d(), s);
  REQUIRE(p1.num_points() == cloud.num_points());
  REQUIRE(p2.num_points() == cloud.num_points());
  CHECK(p1.label == 3);
  CHECK(p1.object_id == 21);
  CHECK(p2.label == 3);
  for (std::int64_t i = 0; i < cloud.xyz.size(); ++i) {
    CHECK(p1.xyz.data[i] == cloud.xyz.data[i]);
    CHECK(p2.xyz.data[i] == cloud.xyz.data[i]);
  }
}

TEST_CASE("rotation-only augmentation is an isometry") {
  Augment3DConfig cfg = identity3d();
  cfg.rotate_max_deg = 180.0;
  PointCloud cloud = helix_cloud(96);
  Stream s(2);
  auto [p1, p2] = augment_point_cloud(cloud, cfg, s);
  auto d0 = pairwise_distances(cloud);
  auto d1 = pairwise_distances(p1);
  auto d2 = pairwise_distances(p2);
  double rotated = 0;
  for (size_t i = 0; i < d0.size(); ++i) {
    CHECK(std::abs(d1[i] - d0[i]) < 1e-5);
    CHECK(std::abs(d2[i] - d0[i]) < 1e-5);
    rotated = std::max(rotated, std::abs(p1.xyz.data[i % p1.xyz.size()]));
  }
  double moved = 0;
  for (std::int64_t i = 0; i < cloud.xyz.size(); ++i)
    moved = std::max(moved, std::abs(p1.xyz.data[i] - cloud.xyz.data[i]));
  CHECK(moved > 1e-3);
}

TEST_CASE("default augmentation is stream-deterministic and bounded") {
  PointCloud cloud = helix_cloud();
  Augment3DConfig cfg;
  Stream sa(42), sb(42);
  auto [a1, a2] = augment_point_cloud(cloud, cfg, sa);
  auto [b1, b2] = augment_point_cloud(cloud, cfg, sb);
  REQUIRE(a1.num_points() == b1.num_points());
  REQUIRE(a2.num_points() == b2.num_points());
  for (std::int64_t i = 0; i < a1.xyz.size(); ++i) CHECK(a1.xyz.data[i] == b1.xyz.data[i]);
  for (std::int64_t i = 0; i < a2.xyz.size(); ++i) CHECK(a2.xyz.data[i] == b2.xyz.data[i]);

  CHECK(a1.num_points() >= 64);
  CHECK(a2.num_points() >= 64);
  CHECK(a1.num_points() >= static_cast<int>(std::floor(0.9 * 128) - 1));

  bool differ = a1.num_points() != a2.num_points();
  if (!differ)
    for (std::int64_t i = 0; i < a1.xyz.size(); ++i)
      if (a1.xyz.data[i] != a2.xyz.data[i]) {
        differ = true;
        break;
      }
  CHECK(differ);
}

TEST_CASE("default augmentation of the reference cloud matches its recorded hash") {
  PointCloud cloud = helix_cloud();
  Stream s(777);
  auto [p1, p2] = augment_point_cloud(cloud, Augment3DConfig{}, s);
  CHECK(p1.num_points() == 116);
  CHECK(p2.num_points() == 128);
  CHECK(hash_bytes(p1.xyz.data.data(), p1.xyz.data.size() * 8) == 0x7cf5806b1616a9fcULL);
  CHECK(hash_bytes(p2.xyz.data.data(), p2.xyz.data.size() * 8) == 0x849b7224d268d280ULL);
}

TEST_CASE("dropout never leaves fewer than 64 points") {
  Augment3DConfig cfg = identity3d();
  cfg.dropout_max = 0.10;
  PointCloud small = helix_cloud(64);
  PointCloud mid = helix_cloud(70);
  for (int seed = 0; seed < 20; ++seed) {
    Stream s(static_cast<std::uint64_t>(seed));
    auto [p1, p2] = augment_point_cloud(small, cfg, s);
    CHECK(p1.num_points() == 64);
    CHECK(p2.num_points() == 64);
    Stream s2(static_cast<std::uint64_t>(seed));
    auto [q1, q2] = augment_point_cloud(mid, cfg, s2);
    CHECK(q1.num_points() >= 64);
    CHECK(q2.num_points() >= 64);
  }
}

TEST_CASE("cloud augmentation rejects malformed strengths") {
  PointCloud cloud = helix_cloud();
  Stream s(1);
  Augment3DConfig bad = identity3d();
  bad.scale_lo = 1.2;
  bad.scale_hi = 0.9;
  CHECK_THROWS_AS(augment_point_cloud(cloud, bad, s), std::invalid_argument);
  bad = identity3d();
  bad.jitter_sigma = -0.1;
  CHECK_THROWS_AS(augment_point_cloud(cloud, bad, s), std::invalid_argument);
  bad = identity3d();
  bad.dropout_max = 1.0;
  CHECK_THROWS_AS(augment_point_cloud(cloud, bad, s), std::invalid_argument);
}

TEST_CASE("maximal crop returns the full image rectangle") {
  Tensor img = gradient_image(64, 0.4);
  Stream s(3);
  for (int i = 0; i < 5; ++i) {
    CropQuaternion q = sample_crop({1.0, 1.0}, {1.0, 1.0}, img, s);
    CHECK(q.h == 64);
    CHECK(q.w == 64);
    CHECK(q.x == 32.0);
    CHECK(q.y == 32.0);
  }
}

TEST_CASE("quarter-area square crop has extent 32 and center in [16, 48]") {
  Tensor img = gradient_image(64, 0.8);
  Stream s(4);
  double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
  for (int i = 0; i < 300; ++i) {
    CropQuaternion q = sample_crop({0.25, 0.25}, {1.0, 1.0}, img, s);
    CHECK(q.h == 32);
    CHECK(q.w == 32);
    CHECK(q.x >= 16.0);
    CHECK(q.x <= 48.0);
    CHECK(q.y >= 16.0);
    CHECK(q.y <= 48.0);
    min_x = std::min(min_x, q.x);
    max_x = std::max(max_x, q.x);
    min_y = std::min(min_y, q.y);
    max_y = std::max(max_y, q.y);
  }
  CHECK(min_x < 20.0);
  CHECK(max_x > 44.0);
  CHECK(min_y < 20.0);
  CHECK(max_y > 44.0);
}

TEST_CASE("half-area double-aspect crop spans the full width") {
  Tensor img = gradient_image(64, 1.3);
  Stream s(5);
  for (int i = 0; i < 20; ++i) {
    CropQuaternion q = sample_crop({0.5, 0.5}, {2.0, 2.0}, img, s);
    CHECK(q.h == 32);
    CHECK(q.w == 64);
    CHECK(q.x == 32.0);
    CHECK(q.y >= 16.0);
    CHECK(q.y <= 48.0);
  }
}

TEST_CASE("crops keep the sampled area ratio within rounding") {
  Tensor img = gradient_image(64, 2.1);
  Stream s(6);
  for (double target : {0.3, 0.45, 0.6, 0.75, 0.9}) {
    for (int i = 0; i < 40; ++i) {
      CropQuaternion q = sample_crop({target, target}, {0.8, 1.25}, img, s);
      double ratio = static_cast<double>(q.h) * q.w / (64.0 * 64.0);
      CHECK(std::abs(ratio - target) < 0.02);
    }
  }
}

TEST_CASE("impossible rectangles fall back to the full image after redraws") {
  Tensor img = gradient_image(64, 0.2);
  Stream s(7);
  CropQuaternion q = sample_crop({1.0, 1.0}, {2.0, 2.0}, img, s);
  CHECK(q.h == 64);
  CHECK(q.w == 64);
  CHECK(q.x == 32.0);
  CHECK(q.y == 32.0);
}

TEST_CASE("crop sampling validates its ranges") {
  Tensor img = gradient_image(32, 0.0);
  Stream s(8);
  CHECK_THROWS_AS(sample_crop({0.0, 0.5}, {1.0, 1.0}, img, s), std::invalid_argument);
  CHECK_THROWS_AS(sample_crop({0.5, 1.2}, {1.0, 1.0}, img, s), std::invalid_argument);
  CHECK_THROWS_AS(sample_crop({0.5, 1.0}, {0.4, 1.0}, img, s), std::invalid_argument);
  CHECK_THROWS_AS(sample_crop({0.5, 1.0}, {1.0, 2.1}, img, s), std::invalid_argument);
  Tensor bad({3, 4, 5});
  CHECK_THROWS_AS(sample_crop({0.5, 1.0}, {1.0, 1.0}, bad, s), std::invalid_argument);
}

TEST_CASE("crop-resize is identity on the full image and interpolates linearly") {
  Tensor img = gradient_image(8, 0.9);
  Tensor same = crop_resize(img, CropQuaternion{4.0, 4.0, 8, 8});
  for (std::int64_t i = 0; i < img.size(); ++i) CHECK(same.data[i] == img.data[i]);

  Tensor four({4, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) four.at(y, x) = 0.0;
  four.at(1, 1) = 0.2;
  four.at(1, 2) = 0.4;
  four.at(2, 1) = 0.6;
  four.at(2, 2) = 0.8;
  Tensor up = crop_resize(four, CropQuaternion{2.0, 2.0, 2, 2});
  double r0[2] = {0.2, 0.4}, r1[2] = {0.6, 0.8};
  double wy[4] = {0.0, 0.25, 0.75, 1.0};
  double wx[4] = {0.0, 0.25, 0.75, 1.0};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      double top = (1 - wx[x]) * r0[0] + wx[x] * r0[1];
      double bot = (1 - wx[x]) * r1[0] + wx[x] * r1[1];
      double want = (1 - wy[y]) * top + wy[y] * bot;
      CHECK(up.at(y, x) == doctest::Approx(want).epsilon(1e-12));
    }

  Tensor constant = Tensor::full({6, 6}, 0.375);
  Tensor cc = crop_resize(constant, CropQuaternion{3.0, 2.5, 3, 4});
  for (double v : cc.data) CHECK(v == doctest::Approx(0.375).epsilon(1e-12));

  CHECK_THROWS_AS(crop_resize(img, CropQuaternion{7.0, 4.0, 8, 8}), std::invalid_argument);
  CHECK_THROWS_AS(crop_resize(img, CropQuaternion{4.0, 4.0, 0, 4}), std::invalid_argument);
}

TEST_CASE("horizontal flip mirrors columns and double flip restores") {
  Tensor img = gradient_image(16, 1.7);
  Stream s(9);
  Tensor flipped = apply_transform(img, horizontal_flip(1.0), 0.8, s);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(flipped.at(y, x) == img.at(y, 15 - x));
  Tensor twice = apply_transform(flipped, horizontal_flip(1.0), 0.8, s);
  for (std::int64_t i = 0; i < img.size(); ++i) CHECK(twice.data[i] == img.data[i]);
  Tensor none = apply_transform(img, horizontal_flip(0.0), 0.8, s);
  for (std::int64_t i = 0; i < img.size(); ++i) CHECK(none.data[i] == img.data[i]);
}

TEST_CASE("zero-strength point transforms leave pixels untouched") {
  Tensor img = gradient_image(16, 0.6);
  Stream s(10);
  for (const Transform2D& t :
       {color_jitter(0.0, 0.0), gaussian_blur(0.0, 0.0), random_erase(0.0, 0.0, 1.0, 1.0),
        grayscale_mix(0.0, 0.0), resized_crop(1.0, 1.0, 1.0, 1.0, false)}) {
    Tensor out = apply_transform(img, t, 0.8, s);
    for (std::int64_t i = 0; i < img.size(); ++i) CHECK(out.data[i] == img.data[i]);
  }
}

TEST_CASE("blur preserves constants and shrinks variance") {
  Tensor flat = Tensor::full({12, 12}, 0.6);
  Stream s(11);
  Tensor out = apply_transform(flat, gaussian_blur(1.0, 1.0), 0.8, s);
  for (double v : out.data) CHECK(v == doctest::Approx(0.6).epsilon(1e-12));

  Tensor img = gradient_image(24, 2.9);
  Tensor blurred = apply_transform(img, gaussian_blur(1.5, 1.5), 0.8, s);
  auto variance = [](const Tensor& t) {
    double m = 0;
    for (double v : t.data) m += v;
    m /= static_cast<double>(t.size());
    double var = 0;
    for (double v : t.data) var += (v - m) * (v - m);
    return var / static_cast<double>(t.size());
  };
  CHECK(variance(blurred) < variance(img));
}

TEST_CASE("random erase zeroes exactly one rectangle of the sampled area") {
  Tensor ones = Tensor::full({32, 32}, 1.0);
  Stream s(12);
  Tensor out = apply_transform(ones, random_erase(0.1, 0.1, 1.0, 1.0), 0.8, s);
  int zeros = 0;
  for (double v : out.data) {
    CHECK((v == 0.0 || v == 1.0));
    if (v == 0.0) ++zeros;
  }
  int side = static_cast<int>(std::llround(std::sqrt(0.1 * 32 * 32)));
  CHECK(zeros == side * side);
}

TEST_CASE("full grayscale mix collapses the image to neutral gray") {
  Tensor img = gradient_image(16, 1.1);
  Stream s(13);
  Tensor out = apply_transform(img, grayscale_mix(1.0, 1.0), 0.8, s);
  for (double v : out.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("brightness-only jitter scales pixels uniformly") {
  Tensor img = gradient_image(16, 0.3);
  for (auto& v : img.data) v *= 0.4;
  Stream s(14);
  Tensor out = apply_transform(img, color_jitter(0.5, 0.0), 0.8, s);
  double ratio = out.data[0] / img.data[0];
  CHECK(ratio > 0.49);
  CHECK(ratio < 1.51);
  for (std::int64_t i = 0; i < img.size(); ++i)
    if (out.data[i] < 1.0) CHECK(out.data[i] == doctest::Approx(img.data[i] * ratio).epsilon(1e-9));
}

TEST_CASE("default catalog stages carry their introduction level") {
  auto catalog = default_catalog(4);
  REQUIRE(catalog.size() == 5);
  CHECK(catalog[0].name == "basic");
  CHECK(catalog[0].ops.size() == 2);
  CHECK(catalog[1].name == "jitter");
  CHECK(catalog[2].name == "blur");
  CHECK(catalog[3].name == "erase");
  CHECK(catalog[4].name == "graymix");
  for (size_t i = 0; i < catalog.size(); ++i)
    for (const auto& t : catalog[i].ops) CHECK(t.level_introduced == static_cast<int>(i));
  CHECK(catalog[0].ops[0].scheduled_s_lo);
  CHECK(default_catalog(6).size() == 7);
  CHECK_THROWS_AS(default_catalog(7), std::invalid_argument);
  CHECK_THROWS_AS(default_catalog(0), std::invalid_argument);
}

TEST_CASE("pipelines chain catalog prefixes with a descending crop floor") {
  auto catalog = default_catalog(4);
  auto pipelines = build_pipelines(4, catalog);
  REQUIRE(pipelines.size() == 4);
  double floors[4] = {0.8, 0.6, 0.4, 0.2};
  for (int i = 0; i < 4; ++i) {
    CHECK(pipelines[static_cast<size_t>(i)].level == i + 1);
    CHECK(pipelines[static_cast<size_t>(i)].crop_s_floor ==
          doctest::Approx(floors[i]).epsilon(1e-12));
    CHECK(pipelines[static_cast<size_t>(i)].stages.size() == static_cast<size_t>(i) + 2);
  }
  for (int i = 0; i + 1 < 4; ++i) {
    std::string a = pipelines[static_cast<size_t>(i)].serialize();
    std::string b = pipelines[static_cast<size_t>(i) + 1].serialize();
    CHECK(a.size() < b.size());
    CHECK(b.substr(0, a.size()) == a);
  }

  auto single = build_pipelines(1, default_catalog(1));
  REQUIRE(single.size() == 1);
  CHECK(single[0].crop_s_floor == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(single[0].stages.size() == 2);

  CHECK_THROWS_AS(build_pipelines(5, catalog), std::invalid_argument);
  CHECK_THROWS_AS(build_pipelines(0, catalog), std::invalid_argument);
}

TEST_CASE("mixed pipelines pair the basic stage with one distinct stage each") {
  auto catalog = default_catalog(4);
  auto mixed = build_mixed_pipelines(4, catalog);
  REQUIRE(mixed.size() == 4);
  for (int i = 0; i < 4; ++i) {
    const auto& p = mixed[static_cast<size_t>(i)];
    CHECK(p.level == i + 1);
    CHECK(p.crop_s_floor == doctest::Approx(0.5).epsilon(1e-12));
    REQUIRE(p.stages.size() == 2);
    CHECK(p.stages[0].name == "basic");
    CHECK(p.stages[1].name == catalog[static_cast<size_t>(i) + 1].name);
  }
  // The serializations are pairwise distinct and none extends another.
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      std::string a = mixed[static_cast<size_t>(i)].serialize();
      std::string b = mixed[static_cast<size_t>(j)].serialize();
      CHECK(a != b);
      CHECK(b.substr(0, a.size()) != a);
    }

  // Deterministic application, like any pipeline.
  auto img = gradient_image(32, 0.3);
  Stream s1(99), s2(99);
  ViewImage v{img, 5};
  ViewImage o1 = apply_level(v, mixed[2], s1);
  ViewImage o2 = apply_level(v, mixed[2], s2);
  for (std::int64_t q = 0; q < o1.pixels.size(); ++q)
    REQUIRE(o1.pixels.data[static_cast<size_t>(q)] ==
            o2.pixels.data[static_cast<size_t>(q)]);

  CHECK_THROWS_AS(build_mixed_pipelines(5, catalog), std::invalid_argument);
  CHECK_THROWS_AS(build_mixed_pipelines(0, catalog), std::invalid_argument);
}

TEST_CASE("transform serialization pins a readable format") {
  CHECK(resized_crop(0.8, 1.0, 0.75, 4.0 / 3.0, true).serialize() ==
        "crop(s=sched..1,r=0.75..1.33333)");
  CHECK(horizontal_flip(0.5).serialize() == "flip(p=0.5)");
  CHECK(color_jitter(0.4, 0.4).serialize() == "jitter(b=0.4,c=0.4)");
  CHECK(gaussian_blur(0.1, 1.0).serialize() == "blur(sigma=0.1..1)");
  CHECK(random_erase(0.05, 0.2, 0.5, 2.0).serialize() == "erase(a=0.05..0.2,r=0.5..2)");
  CHECK(grayscale_mix(0.2, 0.6).serialize() == "graymix(a=0.2..0.6)");
}

TEST_CASE("zeroed pipeline levels return the input image bitwise") {
  auto pipelines = build_pipelines(4, zeroed_catalog());
  Tensor img = gradient_image(32, 0.5);
  ViewImage view{img, 9};
  for (const auto& p : pipelines) {
    Stream s(15);
    ViewImage out = apply_level(view, p, s);
    CHECK(out.view_index == 9);
    for (std::int64_t i = 0; i < img.size(); ++i) CHECK(out.pixels.data[i] == img.data[i]);
  }
}

TEST_CASE("level application is seed-deterministic with pixels in range") {
  auto pipelines = build_pipelines(4, default_catalog(4));
  Tensor img = gradient_image(32, 1.9);
  ViewImage view{img, 4};
  for (const auto& p : pipelines) {
    Stream sa(99), sb(99);
    ViewImage a = apply_level(view, p, sa);
    ViewImage b = apply_level(view, p, sb);
    CHECK(a.view_index == 4);
    for (std::int64_t i = 0; i < img.size(); ++i) {
      CHECK(a.pixels.data[i] == b.pixels.data[i]);
      CHECK(a.pixels.data[i] >= 0.0);
      CHECK(a.pixels.data[i] <= 1.0);
    }
  }
}

TEST_CASE("deeper levels distort the probe set at least as much") {
  auto pipelines = build_pipelines(4, default_catalog(4));
  auto probe = probe_images();
  REQUIRE(probe.size() == 32);
  auto profile = distortion_profile(pipelines, probe, 515, 6);
  REQUIRE(profile.size() == 4);
  for (size_t i = 0; i + 1 < profile.size(); ++i) CHECK(profile[i] <= profile[i + 1]);
  CHECK(profile[3] > profile[0]);
  CHECK(profile[0] > 0.0);
}
