#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmpoint/core.hpp"
#include "mmpoint/dataset.hpp"
#include "mmpoint/hashing.hpp"
#include "mmpoint/tensor.hpp"

namespace mmpoint::data::io {

static_assert(std::endian::native == std::endian::little,
              "blob format is little-endian float32");

inline void write_f32(std::ofstream& f, const Tensor& t) {
  std::vector<float> buf(t.data.size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(t.data[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

inline std::vector<double> read_f32(const std::string& path, std::uint64_t offset_floats,
                                    std::uint64_t count_floats) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("dataset: cannot open blob " + path);
  f.seekg(static_cast<std::streamoff>(offset_floats * sizeof(float)));
  std::vector<float> buf(count_floats);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(count_floats * sizeof(float)));
  if (!f) throw std::runtime_error("dataset: short read from blob " + path);
  return std::vector<double>(buf.begin(), buf.end());
}

inline void check_blob_size(const std::filesystem::path& p, std::uint64_t expect_floats,
                            const char* which) {
  if (!std::filesystem::exists(p))
    throw std::runtime_error(std::string("dataset: missing blob ") + which);
  auto got = std::filesystem::file_size(p);
  if (got != expect_floats * sizeof(float))
    throw std::runtime_error(std::string("dataset: blob ") + which + " has " +
                             std::to_string(got) + " bytes, manifest expects " +
                             std::to_string(expect_floats * sizeof(float)));
}

// Streams objects to the blob files, then writes the manifest that binds
// their hashes, the split, and every generation parameter.
struct Writer {
  std::filesystem::path dir;
  std::ofstream points, views;
  std::vector<int> labels;
  std::vector<std::int64_t> ids;

  explicit Writer(const std::string& d) : dir(d) {
    std::filesystem::create_directories(dir);
    points.open(dir / "points.f32", std::ios::binary | std::ios::trunc);
    views.open(dir / "views.f32", std::ios::binary | std::ios::trunc);
    if (!points || !views)
      throw std::runtime_error("dataset: cannot create blobs under " + d);
  }

  void add(const PointCloud& cloud, const ViewSet& vs) {
    write_f32(points, cloud.xyz);
    for (const auto& v : vs.views) write_f32(views, v.pixels);
    labels.push_back(cloud.label);
    ids.push_back(cloud.object_id);
  }

  void finish(const char* kind, int classes, int per_class, int n_points, int n_views,
              int resolution, std::uint64_t seed) {
    points.close();
    views.close();
    if (points.fail() || views.fail())
      throw std::runtime_error("dataset: blob write failed under " + dir.string());

    Split split = stratified_split(labels, classes);
    nlohmann::json objects = nlohmann::json::array();
    for (size_t i = 0; i < labels.size(); ++i)
      objects.push_back({{"id", ids[i]}, {"label", labels[i]}});

    nlohmann::json m{
        {"version", 1},
        {"kind", kind},
        {"seed", seed},
        {"classes", classes},
        {"per_class", per_class},
        {"count", static_cast<int>(labels.size())},
        {"n_points", n_points},
        {"n_views", n_views},
        {"resolution", resolution},
        {"objects", objects},
        {"train", split.train},
        {"test", split.test},
        {"blobs",
         {{"points",
           {{"file", "points.f32"}, {"hash", hex64(hash_file((dir / "points.f32").string()))}}},
          {"views",
           {{"file", "views.f32"}, {"hash", hex64(hash_file((dir / "views.f32").string()))}}}}},
    };
    std::ofstream mf(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    mf << m.dump(2) << "\n";
    mf.close();
    if (mf.fail())
      throw std::runtime_error("dataset: manifest write failed under " + dir.string());
  }
};

}  // namespace mmpoint::data::io
