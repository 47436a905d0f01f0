#include <cmath>
#include <stdexcept>
#include <string>

#include "mmpoint/augment.hpp"

namespace mmpoint::aug {

namespace {

constexpr double kCropFloorStart = 0.8;
constexpr double kCropFloorEnd = 0.2;

double crop_floor_for_level(int level, int m) {
  if (m <= 1) return kCropFloorStart;
  double f = static_cast<double>(level - 1) / static_cast<double>(m - 1);
  return kCropFloorStart + f * (kCropFloorEnd - kCropFloorStart);
}

}  // namespace

std::vector<AugmentStage> default_catalog(int m) {
  if (m < 1 || m > 6)
    throw std::invalid_argument("default_catalog: stage count supports m in [1, 6], got " +
                                std::to_string(m));
  std::vector<AugmentStage> catalog;
  catalog.push_back({"basic", {resized_crop(kCropFloorStart, 1.0, 0.75, 4.0 / 3.0, true),
                               horizontal_flip(0.5)}});
  catalog.push_back({"jitter", {color_jitter(0.4, 0.4)}});
  catalog.push_back({"blur", {gaussian_blur(0.1, 1.0)}});
  catalog.push_back({"erase", {random_erase(0.05, 0.2, 0.5, 2.0)}});
  catalog.push_back({"graymix", {grayscale_mix(0.2, 0.6)}});
  catalog.push_back({"jitter-strong", {color_jitter(0.8, 0.8)}});
  catalog.push_back({"blur-strong", {gaussian_blur(1.0, 2.0)}});
  catalog.resize(static_cast<size_t>(m) + 1);
  for (size_t i = 0; i < catalog.size(); ++i)
    for (auto& t : catalog[i].ops) t.level_introduced = static_cast<int>(i);
  return catalog;
}

std::vector<AugmentationPipeline> build_pipelines(int m,
                                                  const std::vector<AugmentStage>& catalog) {
  if (m < 1) throw std::invalid_argument("build_pipelines: need m >= 1");
  if (catalog.size() < static_cast<size_t>(m) + 1)
    throw std::invalid_argument("build_pipelines: m = " + std::to_string(m) +
                                " exceeds a catalog of " + std::to_string(catalog.size()) +
                                " stages");
  std::vector<AugmentationPipeline> pipelines;
  pipelines.reserve(static_cast<size_t>(m));
  for (int level = 1; level <= m; ++level) {
    AugmentationPipeline p;
    p.level = level;
    p.crop_s_floor = crop_floor_for_level(level, m);
    p.stages.assign(catalog.begin(), catalog.begin() + level + 1);
    pipelines.push_back(std::move(p));
  }
  return pipelines;
}

std::vector<AugmentationPipeline> build_mixed_pipelines(
    int m, const std::vector<AugmentStage>& catalog) {
  if (m < 1) throw std::invalid_argument("build_mixed_pipelines: need m >= 1");
  if (catalog.size() < static_cast<size_t>(m) + 1)
    throw std::invalid_argument("build_mixed_pipelines: m = " + std::to_string(m) +
                                " exceeds a catalog of " + std::to_string(catalog.size()) +
                                " stages");
  std::vector<AugmentationPipeline> pipelines;
  pipelines.reserve(static_cast<size_t>(m));
  for (int level = 1; level <= m; ++level) {
    AugmentationPipeline p;
    p.level = level;
    p.crop_s_floor = 0.5 * (kCropFloorStart + kCropFloorEnd);
    p.stages = {catalog[0], catalog[static_cast<size_t>(level)]};
    pipelines.push_back(std::move(p));
  }
  return pipelines;
}

std::string AugmentationPipeline::serialize() const {
  std::string out;
  for (const auto& stage : stages) {
    out += stage.name + "[";
    for (size_t i = 0; i < stage.ops.size(); ++i) {
      if (i > 0) out += "+";
      out += stage.ops[i].serialize();
    }
    out += "]|";
  }
  return out;
}

ViewImage apply_level(const ViewImage& view, const AugmentationPipeline& pipeline,
                      Stream& stream) {
  Tensor img = view.pixels;
  for (const auto& stage : pipeline.stages)
    for (const auto& t : stage.ops) img = apply_transform(img, t, pipeline.crop_s_floor, stream);
  return ViewImage{std::move(img), view.view_index};
}

std::vector<double> distortion_profile(const std::vector<AugmentationPipeline>& pipelines,
                                       const std::vector<Tensor>& probe,
                                       std::uint64_t seed, int draws_per_image) {
  if (probe.empty()) throw std::invalid_argument("distortion_profile: empty probe set");
  if (draws_per_image < 1)
    throw std::invalid_argument("distortion_profile: need at least one draw per image");
  SeedTree tree(seed);
  std::vector<double> profile;
  profile.reserve(pipelines.size());
  for (size_t pi = 0; pi < pipelines.size(); ++pi) {
    double total = 0.0;
    for (size_t img = 0; img < probe.size(); ++img) {
      for (int d = 0; d < draws_per_image; ++d) {
        Stream s = tree.stream("probe", img * 64 + static_cast<std::uint64_t>(d));
        ViewImage v{probe[img], 0};
        ViewImage out = apply_level(v, pipelines[pi], s);
        double sq = 0.0;
        for (std::int64_t q = 0; q < probe[img].size(); ++q) {
          double diff = out.pixels.data[static_cast<size_t>(q)] -
                        probe[img].data[static_cast<size_t>(q)];
          sq += diff * diff;
        }
        total += std::sqrt(sq);
      }
    }
    profile.push_back(total / (static_cast<double>(probe.size()) * draws_per_image));
  }
  return profile;
}

}  // namespace mmpoint::aug
