#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmpoint/augment.hpp"

namespace mmpoint::aug {

namespace {

constexpr double kPi = 3.14159265358979323846;

PointCloud transform_once(const PointCloud& cloud, const Augment3DConfig& cfg,
                          Stream& stream) {
  int n = cloud.num_points();
  Tensor xyz = cloud.xyz;

  double angle = stream.uniform(-cfg.rotate_max_deg, cfg.rotate_max_deg) * kPi / 180.0;
  double c = std::cos(angle), s = std::sin(angle);
  for (int i = 0; i < n; ++i) {
    double x = xyz.at(i, 0), y = xyz.at(i, 1);
    xyz.at(i, 0) = x * c - y * s;
    xyz.at(i, 1) = x * s + y * c;
  }

  double sx = stream.uniform(cfg.scale_lo, cfg.scale_hi);
  double sy = stream.uniform(cfg.scale_lo, cfg.scale_hi);
  double sz = stream.uniform(cfg.scale_lo, cfg.scale_hi);
  for (int i = 0; i < n; ++i) {
    xyz.at(i, 0) *= sx;
    xyz.at(i, 1) *= sy;
    xyz.at(i, 2) *= sz;
  }

  if (cfg.jitter_sigma > 0.0) {
    for (std::int64_t i = 0; i < xyz.size(); ++i) {
      double d = stream.normal(0.0, cfg.jitter_sigma);
      d = std::max(-cfg.jitter_clip, std::min(cfg.jitter_clip, d));
      xyz.data[static_cast<size_t>(i)] += d;
    }
  }

  int drop = static_cast<int>(std::llround(stream.uniform(0.0, cfg.dropout_max) * n));
  for (int attempt = 0; attempt < 100 && drop > 0 && n - drop < 64; ++attempt)
    drop = static_cast<int>(std::llround(stream.uniform(0.0, cfg.dropout_max) * n));
  if (n - drop < 64) drop = std::max(0, n - 64);

  if (drop > 0) {
    std::vector<int> chosen = stream.sample_without_replacement(n, drop);
    std::vector<bool> dropped(static_cast<size_t>(n), false);
    for (int i : chosen) dropped[static_cast<size_t>(i)] = true;
    Tensor kept({n - drop, 3});
    int r = 0;
    for (int i = 0; i < n; ++i) {
      if (dropped[static_cast<size_t>(i)]) continue;
      kept.at(r, 0) = xyz.at(i, 0);
      kept.at(r, 1) = xyz.at(i, 1);
      kept.at(r, 2) = xyz.at(i, 2);
      ++r;
    }
    xyz = std::move(kept);
  }

  return PointCloud{std::move(xyz), cloud.label, cloud.object_id};
}

}  // namespace

std::pair<PointCloud, PointCloud> augment_point_cloud(const PointCloud& cloud,
                                                      const Augment3DConfig& cfg,
                                                      Stream& stream) {
  if (cloud.num_points() < 1) throw std::invalid_argument("augment_point_cloud: empty cloud");
  if (cfg.scale_lo > cfg.scale_hi || cfg.scale_lo <= 0.0)
    throw std::invalid_argument("augment_point_cloud: bad scale range");
  if (cfg.rotate_max_deg < 0.0 || cfg.jitter_sigma < 0.0 || cfg.jitter_clip < 0.0 ||
      cfg.dropout_max < 0.0 || cfg.dropout_max >= 1.0)
    throw std::invalid_argument("augment_point_cloud: negative or out-of-range strength");
  PointCloud first = transform_once(cloud, cfg, stream);
  PointCloud second = transform_once(cloud, cfg, stream);
  return {std::move(first), std::move(second)};
}

}  // namespace mmpoint::aug
