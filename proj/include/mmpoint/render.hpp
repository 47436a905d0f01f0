#pragma once

#include "mmpoint/core.hpp"

namespace mmpoint::render {

// Orthographic rig of n_views poses circling the object clockwise in
// azimuth at a fixed elevation. Poses depend only on the view index.
struct CameraRig {
  int n_views = 24;
  double azimuth_step_deg = 15.0;
  double elevation_deg = 20.0;
};

struct CameraAxes {
  double right[3];
  double up[3];
};

CameraAxes camera_axes(const CameraRig& rig, int view_index);

// Soft Gaussian point splatting of the cloud into one single-channel image
// per pose, each normalized to [0,1] by its own peak. Never reads the label.
ViewSet render_views(const PointCloud& cloud, const CameraRig& rig, int resolution);

}  // namespace mmpoint::render
