#include "mmpoint/shapes.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mmpoint::shapes {

namespace {

constexpr double kPi = 3.14159265358979323846;

const char* kClassNames[kNumClasses] = {"sphere",  "box",     "cylinder", "cone",
                                        "torus",   "capsule", "pyramid",  "ellipsoid"};

void unit_direction(Stream& rng, double out[3]) {
  while (true) {
    double x = rng.normal(), y = rng.normal(), z = rng.normal();
    double n = std::sqrt(x * x + y * y + z * z);
    if (n > 1e-9) {
      out[0] = x / n;
      out[1] = y / n;
      out[2] = z / n;
      return;
    }
  }
}

void sample_sphere(Tensor& p, int n, Stream& rng) {
  double d[3];
  int pairs = n / 2;
  for (int i = 0; i < pairs; ++i) {
    unit_direction(rng, d);
    for (int a = 0; a < 3; ++a) {
      p.at(2 * i, a) = d[a];
      p.at(2 * i + 1, a) = -d[a];
    }
  }
  if (n % 2) {
    unit_direction(rng, d);
    for (int a = 0; a < 3; ++a) p.at(n - 1, a) = d[a];
  }
}

void sample_box(Tensor& p, int n, Stream& rng) {
  for (int i = 0; i < n; ++i) {
    int face = static_cast<int>(rng.uniform_int(6));
    int axis = face / 2;
    double sign = (face % 2) ? 1.0 : -1.0;
    double uv[2] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    int q = 0;
    for (int a = 0; a < 3; ++a) p.at(i, a) = (a == axis) ? sign : uv[q++];
  }
}

void sample_cylinder(Tensor& p, int n, Stream& rng) {
  double a_side = 4.0 * kPi, a_caps = 2.0 * kPi;
  for (int i = 0; i < n; ++i) {
    double theta = rng.uniform(0.0, 2.0 * kPi);
    if (rng.uniform() * (a_side + a_caps) < a_side) {
      p.at(i, 0) = std::cos(theta);
      p.at(i, 1) = std::sin(theta);
      p.at(i, 2) = rng.uniform(-1.0, 1.0);
    } else {
      double rho = std::sqrt(rng.uniform());
      p.at(i, 0) = rho * std::cos(theta);
      p.at(i, 1) = rho * std::sin(theta);
      p.at(i, 2) = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
  }
}

void sample_cone(Tensor& p, int n, Stream& rng) {
  // Base radius 1 at z=-1, apex at z=+1.
  double a_side = kPi * std::sqrt(5.0), a_base = kPi;
  for (int i = 0; i < n; ++i) {
    double theta = rng.uniform(0.0, 2.0 * kPi);
    if (rng.uniform() * (a_side + a_base) < a_side) {
      double rho = std::sqrt(rng.uniform());
      p.at(i, 0) = rho * std::cos(theta);
      p.at(i, 1) = rho * std::sin(theta);
      p.at(i, 2) = 1.0 - 2.0 * rho;
    } else {
      double rho = std::sqrt(rng.uniform());
      p.at(i, 0) = rho * std::cos(theta);
      p.at(i, 1) = rho * std::sin(theta);
      p.at(i, 2) = -1.0;
    }
  }
}

void sample_torus(Tensor& p, int n, Stream& rng) {
  double R = 1.0, r = 0.4;
  for (int i = 0; i < n; ++i) {
    double phi;
    do {
      phi = rng.uniform(0.0, 2.0 * kPi);
    } while (rng.uniform() * (R + r) > R + r * std::cos(phi));
    double theta = rng.uniform(0.0, 2.0 * kPi);
    double ring = R + r * std::cos(phi);
    p.at(i, 0) = ring * std::cos(theta);
    p.at(i, 1) = ring * std::sin(theta);
    p.at(i, 2) = r * std::sin(phi);
  }
}

void sample_capsule(Tensor& p, int n, Stream& rng) {
  // Cylinder side area 4*pi equals the two hemisphere caps combined.
  double d[3];
  for (int i = 0; i < n; ++i) {
    if (rng.uniform() < 0.5) {
      double theta = rng.uniform(0.0, 2.0 * kPi);
      p.at(i, 0) = std::cos(theta);
      p.at(i, 1) = std::sin(theta);
      p.at(i, 2) = rng.uniform(-1.0, 1.0);
    } else {
      unit_direction(rng, d);
      double shift = d[2] >= 0 ? 1.0 : -1.0;
      p.at(i, 0) = d[0];
      p.at(i, 1) = d[1];
      p.at(i, 2) = d[2] + shift;
    }
  }
}

void sample_pyramid(Tensor& p, int n, Stream& rng) {
  // Square base side 2 at z=-1, apex at (0,0,1).
  const double apex[3] = {0, 0, 1};
  const double corners[4][3] = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1}};
  double base_area = 4.0;
  double side_area = std::sqrt(5.0);  // per triangular face
  double total = base_area + 4.0 * side_area;
  for (int i = 0; i < n; ++i) {
    double w = rng.uniform() * total;
    if (w < base_area) {
      p.at(i, 0) = rng.uniform(-1.0, 1.0);
      p.at(i, 1) = rng.uniform(-1.0, 1.0);
      p.at(i, 2) = -1.0;
    } else {
      int face = static_cast<int>((w - base_area) / side_area);
      if (face > 3) face = 3;
      const double* A = corners[face];
      const double* B = corners[(face + 1) % 4];
      double u = rng.uniform(), v = rng.uniform();
      if (u + v > 1.0) {
        u = 1.0 - u;
        v = 1.0 - v;
      }
      for (int a = 0; a < 3; ++a)
        p.at(i, a) = A[a] + u * (B[a] - A[a]) + v * (apex[a] - A[a]);
    }
  }
}

void sample_ellipsoid(Tensor& p, int n, Stream& rng) {
  double a = 1.0, b = 0.75, c = 0.5;
  double w_max = a * b;
  double d[3];
  for (int i = 0; i < n; ++i) {
    while (true) {
      unit_direction(rng, d);
      double w = std::sqrt(d[0] * d[0] * b * b * c * c + d[1] * d[1] * a * a * c * c +
                           d[2] * d[2] * a * a * b * b);
      if (rng.uniform() * w_max <= w) break;
    }
    p.at(i, 0) = a * d[0];
    p.at(i, 1) = b * d[1];
    p.at(i, 2) = c * d[2];
  }
}

void rotate_by_quat(const double q[4], double& x, double& y, double& z) {
  double w = q[0], qx = q[1], qy = q[2], qz = q[3];
  double cx = qy * z - qz * y, cy = qz * x - qx * z, cz = qx * y - qy * x;
  double ccx = qy * cz - qz * cy, ccy = qz * cx - qx * cz, ccz = qx * cy - qy * cx;
  x += 2.0 * (w * cx + ccx);
  y += 2.0 * (w * cy + ccy);
  z += 2.0 * (w * cz + ccz);
}

}  // namespace

const char* class_name(int class_id) {
  if (class_id < 0 || class_id >= kNumClasses)
    throw std::invalid_argument("unknown shape class id " + std::to_string(class_id));
  return kClassNames[class_id];
}

Tensor sample_surface(int class_id, int n, Stream& rng) {
  if (n < 1) throw std::invalid_argument("sample_surface: n must be positive");
  class_name(class_id);
  Tensor p({n, 3});
  switch (class_id) {
    case 0: sample_sphere(p, n, rng); break;
    case 1: sample_box(p, n, rng); break;
    case 2: sample_cylinder(p, n, rng); break;
    case 3: sample_cone(p, n, rng); break;
    case 4: sample_torus(p, n, rng); break;
    case 5: sample_capsule(p, n, rng); break;
    case 6: sample_pyramid(p, n, rng); break;
    default: sample_ellipsoid(p, n, rng); break;
  }
  return p;
}

DeformParams draw_deform_params(Stream& rng, double noise_sigma) {
  DeformParams d;
  for (int a = 0; a < 3; ++a) d.scale[a] = rng.uniform(0.6, 1.4);
  while (true) {
    double s = 0;
    for (int a = 0; a < 4; ++a) {
      d.quat[a] = rng.normal();
      s += d.quat[a] * d.quat[a];
    }
    if (s > 1e-9) {
      double inv = 1.0 / std::sqrt(s);
      for (int a = 0; a < 4; ++a) d.quat[a] *= inv;
      break;
    }
  }
  d.noise_sigma = noise_sigma;
  return d;
}

ShapeSpec draw_spec(int class_id, Stream& rng, double noise_sigma) {
  class_name(class_id);
  return ShapeSpec{class_id, draw_deform_params(rng, noise_sigma)};
}

PointCloud generate_object(const ShapeSpec& spec, int n_points, Stream& rng,
                           std::int64_t object_id) {
  if (n_points < 64)
    throw std::invalid_argument("generate_object: n_points must be >= 64, got " +
                                std::to_string(n_points));
  const DeformParams& d = spec.deform;
  for (int a = 0; a < 3; ++a)
    if (d.scale[a] < 0.6 || d.scale[a] > 1.4)
      throw std::invalid_argument("generate_object: scale out of [0.6, 1.4]");
  if (d.noise_sigma < 0)
    throw std::invalid_argument("generate_object: negative noise sigma");
  double qn = 0;
  for (int a = 0; a < 4; ++a) qn += d.quat[a] * d.quat[a];
  if (std::abs(qn - 1.0) > 1e-6)
    throw std::invalid_argument("generate_object: rotation quaternion is not unit-norm");

  Tensor p = sample_surface(spec.class_id, n_points, rng);
  for (int i = 0; i < n_points; ++i) {
    double x = p.at(i, 0) * d.scale[0];
    double y = p.at(i, 1) * d.scale[1];
    double z = p.at(i, 2) * d.scale[2];
    rotate_by_quat(d.quat, x, y, z);
    p.at(i, 0) = x;
    p.at(i, 1) = y;
    p.at(i, 2) = z;
  }
  if (d.noise_sigma > 0)
    for (auto& v : p.data) v += rng.normal(0.0, d.noise_sigma);

  PointCloud cloud;
  cloud.xyz = normalize_cloud(p);
  cloud.label = spec.class_id;
  cloud.object_id = object_id;
  return cloud;
}

}  // namespace mmpoint::shapes
