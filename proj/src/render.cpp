#include "mmpoint/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mmpoint::render {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSplatSigmaPx = 0.6;
constexpr double kSplatRadiusPx = 1.5;
constexpr double kExtent = 1.1;  // world half-width mapped onto the image

}  // namespace

CameraAxes camera_axes(const CameraRig& rig, int view_index) {
  if (view_index < 0 || view_index >= rig.n_views)
    throw std::invalid_argument("camera_axes: view index out of range");
  double az = -view_index * rig.azimuth_step_deg * kPi / 180.0;
  double el = rig.elevation_deg * kPi / 180.0;
  double ca = std::cos(az), sa = std::sin(az);
  double ce = std::cos(el), se = std::sin(el);
  CameraAxes ax;
  ax.right[0] = -sa;
  ax.right[1] = ca;
  ax.right[2] = 0.0;
  ax.up[0] = -ca * se;
  ax.up[1] = -sa * se;
  ax.up[2] = ce;
  return ax;
}

ViewSet render_views(const PointCloud& cloud, const CameraRig& rig, int resolution) {
  if (resolution != 32 && resolution != 64 && resolution != 128)
    throw std::invalid_argument("render_views: resolution must be 32, 64, or 128, got " +
                                std::to_string(resolution));
  if (cloud.num_points() < 1) throw std::invalid_argument("render_views: empty cloud");
  if (rig.n_views < 1) throw std::invalid_argument("render_views: rig has no poses");

  const int n = cloud.num_points();
  const int res = resolution;
  const double px_per_world = res / (2.0 * kExtent);
  const double inv_two_sigma2 = 1.0 / (2.0 * kSplatSigmaPx * kSplatSigmaPx);

  ViewSet set;
  set.object_id = cloud.object_id;
  set.views.reserve(static_cast<size_t>(rig.n_views));

  for (int k = 0; k < rig.n_views; ++k) {
    CameraAxes ax = camera_axes(rig, k);
    Tensor img({res, res});
    for (int i = 0; i < n; ++i) {
      double x = cloud.xyz.at(i, 0), y = cloud.xyz.at(i, 1), z = cloud.xyz.at(i, 2);
      double sx = x * ax.right[0] + y * ax.right[1] + z * ax.right[2];
      double sy = x * ax.up[0] + y * ax.up[1] + z * ax.up[2];
      double px = (sx + kExtent) * px_per_world;
      double py = (kExtent - sy) * px_per_world;

      int x0 = std::max(0, static_cast<int>(std::floor(px - kSplatRadiusPx - 0.5)));
      int x1 = std::min(res - 1, static_cast<int>(std::ceil(px + kSplatRadiusPx - 0.5)));
      int y0 = std::max(0, static_cast<int>(std::floor(py - kSplatRadiusPx - 0.5)));
      int y1 = std::min(res - 1, static_cast<int>(std::ceil(py + kSplatRadiusPx - 0.5)));
      for (int iy = y0; iy <= y1; ++iy)
        for (int ix = x0; ix <= x1; ++ix) {
          double dx = ix + 0.5 - px, dy = iy + 0.5 - py;
          double d2 = dx * dx + dy * dy;
          if (d2 > kSplatRadiusPx * kSplatRadiusPx) continue;
          img.at(iy, ix) += std::exp(-d2 * inv_two_sigma2);
        }
    }
    double peak = *std::max_element(img.data.begin(), img.data.end());
    if (peak > 0)
      for (auto& v : img.data) v /= peak;
    set.views.push_back(ViewImage{std::move(img), k});
  }
  return set;
}

}  // namespace mmpoint::render
