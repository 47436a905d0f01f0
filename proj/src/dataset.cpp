#include "mmpoint/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mmpoint/hashing.hpp"
#include "mmpoint/render.hpp"
#include "mmpoint/rng.hpp"
#include "mmpoint/shapes.hpp"
#include "dataset_io.hpp"

namespace mmpoint::data {

namespace fs = std::filesystem;

Split stratified_split(const std::vector<int>& labels, int classes) {
  if (classes < 1) throw std::invalid_argument("stratified_split: classes must be >= 1");
  Split s;
  for (int c = 0; c < classes; ++c) {
    std::vector<int> members;
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(static_cast<int>(i));
    int n_test = static_cast<int>(std::ceil(0.2 * static_cast<double>(members.size())));
    int n_train = static_cast<int>(members.size()) - n_test;
    for (int i = 0; i < n_train; ++i) s.train.push_back(members[static_cast<size_t>(i)]);
    for (size_t i = static_cast<size_t>(n_train); i < members.size(); ++i)
      s.test.push_back(members[i]);
  }
  return s;
}

DatasetHandle build_dataset(const std::string& dir, const DatasetConfig& cfg,
                            std::uint64_t seed) {
  if (cfg.classes < 1 || cfg.classes > shapes::kNumClasses)
    throw std::invalid_argument("build_dataset: classes must be in [1, " +
                                std::to_string(shapes::kNumClasses) + "]");
  if (cfg.per_class < 2)
    throw std::invalid_argument("build_dataset: per_class must be >= 2 to fill both splits");
  if (cfg.n_views < 1)
    throw std::invalid_argument("build_dataset: n_views must be >= 1");

  SeedTree tree(seed);
  render::CameraRig rig;
  rig.n_views = cfg.n_views;
  io::Writer w(dir);
  for (int c = 0; c < cfg.classes; ++c)
    for (int j = 0; j < cfg.per_class; ++j) {
      std::int64_t index = static_cast<std::int64_t>(c) * cfg.per_class + j;
      Stream s = tree.stream("data", static_cast<std::uint64_t>(index));
      shapes::ShapeSpec spec = shapes::draw_spec(c, s);
      PointCloud cloud = shapes::generate_object(spec, cfg.n_points, s, index);
      w.add(cloud, render::render_views(cloud, rig, cfg.resolution));
    }
  w.finish("procedural", cfg.classes, cfg.per_class, cfg.n_points, cfg.n_views,
           cfg.resolution, seed);
  return DatasetHandle::open(dir);
}

DatasetHandle DatasetHandle::open(const std::string& dir) {
  fs::path root(dir);
  std::ifstream mf(root / "manifest.json", std::ios::binary);
  if (!mf) throw std::runtime_error("dataset: no manifest.json under " + dir);
  nlohmann::json m = nlohmann::json::parse(mf, nullptr, true);
  if (m.at("version").get<int>() != 1)
    throw std::runtime_error("dataset: unsupported manifest version");

  DatasetHandle h;
  h.dir_ = dir;
  h.count_ = m.at("count").get<int>();
  h.classes_ = m.at("classes").get<int>();
  h.n_points_ = m.at("n_points").get<int>();
  h.n_views_ = m.at("n_views").get<int>();
  h.resolution_ = m.at("resolution").get<int>();
  for (const auto& o : m.at("objects")) {
    h.object_ids_.push_back(o.at("id").get<std::int64_t>());
    h.labels_.push_back(o.at("label").get<int>());
  }
  h.split_.train = m.at("train").get<std::vector<int>>();
  h.split_.test = m.at("test").get<std::vector<int>>();
  if (static_cast<int>(h.labels_.size()) != h.count_)
    throw std::runtime_error("dataset: manifest object list does not match count");

  auto n = static_cast<std::uint64_t>(h.count_);
  io::check_blob_size(root / "points.f32", n * h.n_points_ * 3, "points");
  io::check_blob_size(
      root / "views.f32",
      n * h.n_views_ * static_cast<std::uint64_t>(h.resolution_) * h.resolution_, "views");
  h.manifest_hash_ = hash_file((root / "manifest.json").string());
  return h;
}

int DatasetHandle::label(int index) const {
  if (index < 0 || index >= count_) throw std::out_of_range("dataset: object index");
  return labels_[static_cast<size_t>(index)];
}

std::int64_t DatasetHandle::object_id(int index) const {
  if (index < 0 || index >= count_) throw std::out_of_range("dataset: object index");
  return object_ids_[static_cast<size_t>(index)];
}

PointCloud DatasetHandle::cloud(int index) const {
  if (index < 0 || index >= count_) throw std::out_of_range("dataset: object index");
  auto per = static_cast<std::uint64_t>(n_points_) * 3;
  Tensor xyz({n_points_, 3},
             io::read_f32((fs::path(dir_) / "points.f32").string(),
                          static_cast<std::uint64_t>(index) * per, per));
  return PointCloud{std::move(xyz), labels_[static_cast<size_t>(index)],
                    object_ids_[static_cast<size_t>(index)]};
}

Tensor DatasetHandle::view(int index, int view_index) const {
  if (index < 0 || index >= count_) throw std::out_of_range("dataset: object index");
  if (view_index < 0 || view_index >= n_views_)
    throw std::out_of_range("dataset: view index");
  auto per = static_cast<std::uint64_t>(resolution_) * resolution_;
  auto offset = (static_cast<std::uint64_t>(index) * n_views_ + view_index) * per;
  return Tensor({resolution_, resolution_},
                io::read_f32((fs::path(dir_) / "views.f32").string(), offset, per));
}

ViewSet DatasetHandle::views(int index) const {
  ViewSet vs;
  vs.object_id = object_id(index);
  for (int j = 0; j < n_views_; ++j) vs.views.push_back(ViewImage{view(index, j), j});
  return vs;
}

}  // namespace mmpoint::data
