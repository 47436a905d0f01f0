#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "mmpoint/checkpoint.hpp"
#include "mmpoint/core.hpp"
#include "mmpoint/hashing.hpp"
#include "mmpoint/rng.hpp"

using namespace mmpoint;

TEST_CASE("normalize_cloud centers and scales into the unit ball") {
  Stream s(99);
  int n = 200;
  Tensor xyz({n, 3});
  for (auto& v : xyz.data) v = s.normal(2.0, 3.0);

  Tensor out = normalize_cloud(xyz);
  double cx = 0, cy = 0, cz = 0, maxn = 0;
  for (int i = 0; i < n; ++i) {
    cx += out.at(i, 0);
    cy += out.at(i, 1);
    cz += out.at(i, 2);
    maxn = std::max(maxn, std::sqrt(out.at(i, 0) * out.at(i, 0) + out.at(i, 1) * out.at(i, 1) +
                                    out.at(i, 2) * out.at(i, 2)));
  }
  CHECK(std::abs(cx / n) < 1e-12);
  CHECK(std::abs(cy / n) < 1e-12);
  CHECK(std::abs(cz / n) < 1e-12);
  CHECK(maxn == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("normalize_cloud is idempotent") {
  Stream s(7);
  Tensor xyz({50, 3});
  for (auto& v : xyz.data) v = s.uniform(-4, 4);
  Tensor once = normalize_cloud(xyz);
  Tensor twice = normalize_cloud(once);
  for (std::int64_t i = 0; i < once.size(); ++i)
    CHECK(std::abs(once.data[i] - twice.data[i]) < 1e-12);
}

TEST_CASE("normalize_cloud rejects zero-extent clouds") {
  Tensor xyz({10, 3});
  for (int i = 0; i < 10; ++i) {
    xyz.at(i, 0) = 1.5;
    xyz.at(i, 1) = -0.5;
    xyz.at(i, 2) = 2.0;
  }
  CHECK_THROWS_AS(normalize_cloud(xyz), std::invalid_argument);
  CHECK_THROWS(normalize_cloud(Tensor({4, 2})));
}

TEST_CASE("normalize_cloud rejects tiny and non-finite clouds") {
  CHECK_THROWS_AS(normalize_cloud(Tensor({7, 3})), std::invalid_argument);

  Stream s(3);
  Tensor xyz({12, 3});
  for (auto& v : xyz.data) v = s.normal();
  Tensor bad = xyz;
  bad.at(5, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(normalize_cloud(bad), std::invalid_argument);
  bad.at(5, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(normalize_cloud(bad), std::invalid_argument);
  CHECK_NOTHROW(normalize_cloud(xyz));
}

TEST_CASE("seed tree streams are reproducible and name-separated") {
  SeedTree a(123456789ULL);
  SeedTree b(123456789ULL);
  SeedTree c(987654321ULL);

  Stream s1 = a.stream("augment-3d");
  Stream s2 = b.stream("augment-3d");
  for (int i = 0; i < 100; ++i) CHECK(s1.next_u64() == s2.next_u64());

  Stream s3 = a.stream("augment-3d");
  Stream s4 = a.stream("augment-2d-level-1");
  Stream s5 = c.stream("augment-3d");
  int same34 = 0, same35 = 0;
  for (int i = 0; i < 64; ++i) {
    same34 += s3.next_u64() == s4.next_u64();
    same35 += s3.next_u64() == s5.next_u64();
  }
  CHECK(same34 == 0);
  CHECK(same35 == 0);

  // Indexed children: distinct indices give distinct streams, same index the same.
  Stream i0 = a.stream("data", 5, 9);
  Stream i1 = b.stream("data", 5, 9);
  Stream i2 = a.stream("data", 5, 10);
  CHECK(i0.next_u64() == i1.next_u64());
  CHECK(i0.next_u64() != i2.next_u64());
}

TEST_CASE("stream distributions behave sanely") {
  Stream s(2024);
  double acc = 0;
  for (int i = 0; i < 10000; ++i) {
    double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    acc += u;
  }
  CHECK(acc / 10000 == doctest::Approx(0.5).epsilon(0.05));

  double m = 0, m2 = 0;
  for (int i = 0; i < 10000; ++i) {
    double x = s.normal();
    m += x;
    m2 += x * x;
  }
  m /= 10000;
  m2 /= 10000;
  CHECK(std::abs(m) < 0.05);
  CHECK(m2 == doctest::Approx(1.0).epsilon(0.1));

  auto picks = s.sample_without_replacement(10, 10);
  std::set<int> uniq(picks.begin(), picks.end());
  CHECK(uniq.size() == 10);
  CHECK_THROWS(s.sample_without_replacement(3, 5));
}

TEST_CASE("embedding batches enforce unit rows") {
  Tensor z({2, 3});
  z.at(0, 0) = 1.0;
  z.at(1, 1) = 1.0;
  auto eb = make_embedding_batch(z, SpaceTag::cross(2));
  CHECK(eb.tag.kind == SpaceTag::Kind::Cross);
  CHECK(eb.tag.level == 2);

  Tensor bad({1, 3});
  bad.at(0, 0) = 0.5;
  CHECK_THROWS_AS(make_embedding_batch(bad, SpaceTag::intra()), std::invalid_argument);
}

TEST_CASE("content hashing is stable and order-sensitive") {
  const char* x = "abc";
  const char* y = "acb";
  CHECK(hash_bytes(x, 3) != hash_bytes(y, 3));
  CHECK(hash_bytes(x, 3) == hash_bytes("abc", 3));
  CHECK(hex64(0).size() == 16);
  CHECK(hex64(0xdeadbeefULL) == "00000000deadbeef");
}

TEST_CASE("checkpoint load rejects corrupted magic bytes and truncation") {
  namespace fs = std::filesystem;
  ParamStore store;
  store.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
  auto path = fs::temp_directory_path() / "mmpoint_core_ckpt_test.bin";
  save_checkpoint(path.string(), store, nlohmann::json::object());

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  ParamStore fresh;
  CHECK_THROWS_WITH_AS(load_checkpoint(path.string(), fresh),
                       doctest::Contains("magic"), std::runtime_error);

  save_checkpoint(path.string(), store, nlohmann::json::object());
  fs::resize_file(path, fs::file_size(path) - 5);
  ParamStore fresh2;
  CHECK_THROWS_AS(load_checkpoint(path.string(), fresh2), std::runtime_error);
  fs::remove(path);
}
