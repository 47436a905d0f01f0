#pragma once

#include <cstdint>

#include "mmpoint/core.hpp"
#include "mmpoint/rng.hpp"
#include "mmpoint/tensor.hpp"

namespace mmpoint::shapes {

inline constexpr int kNumClasses = 8;

// Class ids: 0 sphere, 1 box, 2 cylinder, 3 cone, 4 torus, 5 capsule,
// 6 pyramid, 7 ellipsoid.
const char* class_name(int class_id);

struct DeformParams {
  double scale[3] = {1.0, 1.0, 1.0};  // per-axis, each in [0.6, 1.4]
  double quat[4] = {1.0, 0.0, 0.0, 0.0};  // rotation, w first
  double noise_sigma = 0.0;
};

struct ShapeSpec {
  int class_id = 0;
  DeformParams deform;
};

// Uniform area sampling of the canonical surface of a class, before any
// deformation. Sphere points come in antipodal pairs when n is even.
Tensor sample_surface(int class_id, int n, Stream& rng);

DeformParams draw_deform_params(Stream& rng, double noise_sigma = 0.01);
ShapeSpec draw_spec(int class_id, Stream& rng, double noise_sigma = 0.01);

// Surface sampling, deformation (scale, rotate, jitter), and normalization
// into the unit ball. Label is the class id.
PointCloud generate_object(const ShapeSpec& spec, int n_points, Stream& rng,
                           std::int64_t object_id = 0);

}  // namespace mmpoint::shapes
