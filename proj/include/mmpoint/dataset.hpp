#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmpoint/core.hpp"

namespace mmpoint::data {

struct DatasetConfig {
  int classes = 8;
  int per_class = 100;
  int n_points = 1024;
  int resolution = 64;
  int n_views = 24;
};

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

// Per class, the last ceil(0.2 * count) objects become the test split.
Split stratified_split(const std::vector<int>& labels, int classes);

// Directory-backed dataset: manifest.json plus little-endian float32 blobs
// for points and pre-rendered views. Reads are lazy per object.
class DatasetHandle {
 public:
  static DatasetHandle open(const std::string& dir);

  int count() const { return count_; }
  int classes() const { return classes_; }
  int n_points() const { return n_points_; }
  int n_views() const { return n_views_; }
  int resolution() const { return resolution_; }
  const std::string& dir() const { return dir_; }
  const std::vector<int>& train_indices() const { return split_.train; }
  const std::vector<int>& test_indices() const { return split_.test; }

  int label(int index) const;
  std::int64_t object_id(int index) const;
  PointCloud cloud(int index) const;
  Tensor view(int index, int view_index) const;
  ViewSet views(int index) const;

  std::uint64_t manifest_hash() const { return manifest_hash_; }

 private:
  std::string dir_;
  int count_ = 0, classes_ = 0, n_points_ = 0, n_views_ = 0, resolution_ = 0;
  std::vector<int> labels_;
  std::vector<std::int64_t> object_ids_;
  Split split_;
  std::uint64_t manifest_hash_ = 0;
};

DatasetHandle build_dataset(const std::string& dir, const DatasetConfig& cfg,
                            std::uint64_t seed);

// Reads an HDF5 archive holding "data" shaped (N, P, 3) and a "label"
// table, subsamples each cloud to n_points, renders views, and persists
// the same directory layout build_dataset writes.
DatasetHandle ingest_external(const std::string& dir, const std::string& archive_path,
                              int n_points, int resolution, std::uint64_t seed);

}  // namespace mmpoint::data
