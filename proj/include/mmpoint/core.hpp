#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmpoint/tensor.hpp"

namespace mmpoint {

struct PointCloud {
  Tensor xyz;  // [n, 3]
  int label = -1;
  std::int64_t object_id = -1;

  int num_points() const { return xyz.rank() == 2 ? xyz.dim(0) : 0; }
};

struct ViewImage {
  Tensor pixels;  // [H, W], values in [0, 1]
  int view_index = 0;

  int height() const { return pixels.dim(0); }
  int width() const { return pixels.dim(1); }
};

struct ViewSet {
  std::int64_t object_id = -1;
  std::vector<ViewImage> views;
};

// Identifies which projection space an embedding batch lives in.
struct SpaceTag {
  enum class Kind { Intra, Cross };
  Kind kind = Kind::Intra;
  int level = 0;  // 1-based for Cross, ignored for Intra

  static SpaceTag intra() { return {Kind::Intra, 0}; }
  static SpaceTag cross(int level) { return {Kind::Cross, level}; }

  bool operator==(const SpaceTag&) const = default;
};

struct EmbeddingBatch {
  Tensor z;  // [B, d], rows unit-norm
  SpaceTag tag;
};

// Centers a cloud on its centroid and scales it into the unit ball so the
// farthest point sits at radius 1. Throws on clouds with zero extent.
Tensor normalize_cloud(const Tensor& xyz);

// Throws if any row of z deviates from unit norm by more than tol.
void check_unit_rows(const Tensor& z, double tol = 1e-5, const char* what = "embedding");

EmbeddingBatch make_embedding_batch(Tensor z, SpaceTag tag);

}  // namespace mmpoint
