#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmpoint/core.hpp"
#include "mmpoint/rng.hpp"
#include "mmpoint/tensor.hpp"

namespace mmpoint::aug {

// Point-cloud augmentation strengths. The defaults realize the full transform
// set; setting every strength to its identity value (rotate 0, scale [1,1],
// jitter 0, dropout 0) reproduces the input exactly.
struct Augment3DConfig {
  double rotate_max_deg = 180.0;
  double scale_lo = 0.8;
  double scale_hi = 1.25;
  double jitter_sigma = 0.01;
  double jitter_clip = 0.05;
  double dropout_max = 0.10;
};

// Draws two independently transformed variants of a normalized cloud.
// Applies rotation about the vertical axis, anisotropic scaling, clipped
// Gaussian jitter, and point dropout, in that order. Dropout keeps the
// surviving points in their original order and re-draws its fraction while
// fewer than 64 points would remain. Label and object_id carry over.
std::pair<PointCloud, PointCloud> augment_point_cloud(const PointCloud& cloud,
                                                      const Augment3DConfig& cfg,
                                                      Stream& stream);

// Crop rectangle in pixel coordinates: (x, y) is the center, h and w the
// extent. A valid quaternion lies fully inside its source image.
struct CropQuaternion {
  double x = 0.0;
  double y = 0.0;
  int h = 0;
  int w = 0;
};

// Samples an area ratio s from s_range and an aspect ratio r from r_range,
// solves h = round(sqrt(s*H*W/r)), w = round(sqrt(s*H*W*r)), and places the
// center uniformly over positions where the rectangle fits. Draws whose
// rounded extent exceeds the image are re-drawn; after 10 failed attempts
// the full image is returned.
CropQuaternion sample_crop(std::pair<double, double> s_range,
                           std::pair<double, double> r_range, const Tensor& image,
                           Stream& stream);

// Extracts the rectangle and resizes it back to the source resolution with
// bilinear interpolation. A full-image quaternion returns the input
// unchanged.
Tensor crop_resize(const Tensor& image, const CropQuaternion& q);

enum class Kind {
  kResizedCrop,
  kHorizontalFlip,
  kColorJitter,
  kGaussianBlur,
  kRandomErase,
  kGrayscaleMix,
};

// One image transform with its sampling ranges. Only the fields of the
// active kind are meaningful. A transform whose strength fields are all at
// their identity values applies as a no-op.
struct Transform2D {
  Kind kind = Kind::kResizedCrop;
  int level_introduced = 0;

  // resized-crop: area ratio in [s_lo, s_hi], aspect in [r_lo, r_hi]. When
  // scheduled_s_lo is set, the applying pipeline's crop floor replaces s_lo.
  double s_lo = 1.0;
  double s_hi = 1.0;
  double r_lo = 1.0;
  double r_hi = 1.0;
  bool scheduled_s_lo = false;

  double flip_prob = 0.0;

  // color-jitter: multiplicative brightness and contrast half-ranges.
  double brightness = 0.0;
  double contrast = 0.0;

  // gaussian-blur: 5-tap separable kernel with sigma in [sigma_lo, sigma_hi].
  double sigma_lo = 0.0;
  double sigma_hi = 0.0;

  // random-erase: zeroed rectangle with area fraction in [area_lo, area_hi]
  // and aspect in [erase_aspect_lo, erase_aspect_hi].
  double area_lo = 0.0;
  double area_hi = 0.0;
  double erase_aspect_lo = 1.0;
  double erase_aspect_hi = 1.0;

  // grayscale-mix: blend weight toward neutral mid-gray in [mix_lo, mix_hi].
  double mix_lo = 0.0;
  double mix_hi = 0.0;

  std::string serialize() const;
};

Transform2D resized_crop(double s_lo, double s_hi, double r_lo, double r_hi,
                         bool scheduled_s_lo);
Transform2D horizontal_flip(double prob);
Transform2D color_jitter(double brightness, double contrast);
Transform2D gaussian_blur(double sigma_lo, double sigma_hi);
Transform2D random_erase(double area_lo, double area_hi, double aspect_lo,
                         double aspect_hi);
Transform2D grayscale_mix(double mix_lo, double mix_hi);

// One catalog entry; entry i supplies the transforms introduced at level i.
struct AugmentStage {
  std::string name;
  std::vector<Transform2D> ops;
};

// Level-i pipeline: the stage chain [t0 .. t_i] plus the crop area floor
// this level resolves scheduled crops to.
struct AugmentationPipeline {
  int level = 1;
  double crop_s_floor = 0.8;
  std::vector<AugmentStage> stages;

  // Stage chain as a string. The serialization of a pipeline is a strict
  // prefix of every deeper pipeline built from the same catalog; resolved
  // crop floors are deliberately excluded to keep that property.
  std::string serialize() const;
};

// Stages t0..t_m: basic crop-and-flip, then color-jitter, gaussian-blur,
// random-erase, grayscale-mix, and two stronger repeats. Supports m up to 6.
std::vector<AugmentStage> default_catalog(int m);

// Builds [T_1 .. T_m] where T_i chains the first i+1 catalog stages and
// resolves the scheduled crop floor linearly from 0.8 at level 1 down to
// 0.2 at level m. Requires m >= 1 and a catalog of at least m+1 stages.
std::vector<AugmentationPipeline> build_pipelines(int m,
                                                  const std::vector<AugmentStage>& catalog);

// Builds m mutually distinct two-stage pipelines without the level
// hierarchy: pipeline i chains the basic stage with catalog stage i alone,
// and every crop floor sits at the midpoint of the schedule. Requirements
// match build_pipelines.
std::vector<AugmentationPipeline> build_mixed_pipelines(
    int m, const std::vector<AugmentStage>& catalog);

// Applies one transform. crop_s_floor substitutes the area floor of
// scheduled crops and is ignored otherwise.
Tensor apply_transform(const Tensor& image, const Transform2D& t, double crop_s_floor,
                       Stream& stream);

// Runs the pipeline's transforms in catalog order. Pixels stay in [0, 1];
// the view index carries over.
ViewImage apply_level(const ViewImage& view, const AugmentationPipeline& pipeline,
                      Stream& stream);

// Mean L2 pixel distortion per pipeline over a probe set, averaged over
// draws_per_image independent applications. Used to check that deeper
// levels distort at least as much as shallower ones.
std::vector<double> distortion_profile(const std::vector<AugmentationPipeline>& pipelines,
                                       const std::vector<Tensor>& probe,
                                       std::uint64_t seed, int draws_per_image = 4);

}  // namespace mmpoint::aug
