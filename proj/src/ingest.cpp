#include <hdf5.h>

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmpoint/dataset.hpp"
#include "mmpoint/render.hpp"
#include "mmpoint/rng.hpp"
#include "dataset_io.hpp"

namespace mmpoint::data {

namespace {

struct H5Guard {
  hid_t id;
  herr_t (*closer)(hid_t);
  ~H5Guard() {
    if (id >= 0) closer(id);
  }
};

std::string shape_string(const std::vector<hsize_t>& dims) {
  std::string s = "(";
  for (size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

std::vector<hsize_t> dataset_dims(hid_t dset) {
  hid_t space = H5Dget_space(dset);
  H5Guard g{space, H5Sclose};
  int rank = H5Sget_simple_extent_ndims(space);
  if (rank < 0) throw std::runtime_error("ingest: cannot read dataset extent");
  std::vector<hsize_t> dims(static_cast<size_t>(rank));
  H5Sget_simple_extent_dims(space, dims.data(), nullptr);
  return dims;
}

}  // namespace

DatasetHandle ingest_external(const std::string& dir, const std::string& archive_path,
                              int n_points, int resolution, std::uint64_t seed) {
  H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);

  hid_t file = H5Fopen(archive_path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT);
  if (file < 0) throw std::runtime_error("ingest: cannot open archive " + archive_path);
  H5Guard gf{file, H5Fclose};

  hid_t dset = H5Dopen2(file, "data", H5P_DEFAULT);
  if (dset < 0) throw std::runtime_error("ingest: archive has no 'data' dataset");
  H5Guard gd{dset, H5Dclose};
  auto dims = dataset_dims(dset);
  if (dims.size() != 3 || dims[2] != 3)
    throw std::runtime_error("ingest: expected 'data' shaped (N, P, 3), got " +
                             shape_string(dims));
  const int N = static_cast<int>(dims[0]);
  const int P = static_cast<int>(dims[1]);
  if (N < 1) throw std::runtime_error("ingest: archive holds no clouds");
  if (P < n_points)
    throw std::runtime_error("ingest: clouds have " + std::to_string(P) +
                             " points, need at least " + std::to_string(n_points));

  hid_t lset = H5Dopen2(file, "label", H5P_DEFAULT);
  if (lset < 0) throw std::runtime_error("ingest: archive is missing the label table");
  H5Guard gl{lset, H5Dclose};
  auto ldims = dataset_dims(lset);
  hsize_t lcount = 1;
  for (auto d : ldims) lcount *= d;
  if (lcount != dims[0])
    throw std::runtime_error("ingest: label table has " + std::to_string(lcount) +
                             " entries for " + std::to_string(N) + " clouds");

  std::vector<float> raw(static_cast<size_t>(N) * P * 3);
  if (H5Dread(dset, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data()) < 0)
    throw std::runtime_error("ingest: failed reading 'data'");
  std::vector<int> labels(static_cast<size_t>(N));
  if (H5Dread(lset, H5T_NATIVE_INT, H5S_ALL, H5S_ALL, H5P_DEFAULT, labels.data()) < 0)
    throw std::runtime_error("ingest: failed reading 'label'");

  int classes = 0;
  for (int l : labels) {
    if (l < 0) throw std::runtime_error("ingest: negative label in archive");
    classes = std::max(classes, l + 1);
  }

  SeedTree tree(seed);
  render::CameraRig rig;
  io::Writer w(dir);
  for (int i = 0; i < N; ++i) {
    Stream s = tree.stream("data", static_cast<std::uint64_t>(i));
    std::vector<int> pick = s.sample_without_replacement(P, n_points);
    Tensor xyz({n_points, 3});
    for (int a = 0; a < n_points; ++a) {
      size_t src = (static_cast<size_t>(i) * P + static_cast<size_t>(pick[static_cast<size_t>(a)])) * 3;
      xyz.at(a, 0) = raw[src];
      xyz.at(a, 1) = raw[src + 1];
      xyz.at(a, 2) = raw[src + 2];
    }
    PointCloud cloud{normalize_cloud(xyz), labels[static_cast<size_t>(i)], i};
    w.add(cloud, render::render_views(cloud, rig, resolution));
  }
  w.finish("ingested", classes, 0, n_points, rig.n_views, resolution, seed);
  return DatasetHandle::open(dir);
}

}  // namespace mmpoint::data
