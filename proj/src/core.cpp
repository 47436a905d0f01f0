#include "mmpoint/core.hpp"

#include <cmath>
#include <fstream>

#include "mmpoint/hashing.hpp"

namespace mmpoint {

Tensor normalize_cloud(const Tensor& xyz) {
  if (xyz.rank() != 2 || xyz.dim(1) != 3)
    throw std::invalid_argument("normalize_cloud: expected [n,3] tensor, got " + xyz.shape_str());
  int n = xyz.dim(0);
  if (n < 8)
    throw std::invalid_argument("normalize_cloud: need at least 8 points, got " +
                                std::to_string(n));
  for (double v : xyz.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("normalize_cloud: non-finite coordinate in input");

  double cx = 0, cy = 0, cz = 0;
  for (int i = 0; i < n; ++i) {
    cx += xyz.at(i, 0);
    cy += xyz.at(i, 1);
    cz += xyz.at(i, 2);
  }
  cx /= n;
  cy /= n;
  cz /= n;

  Tensor out({n, 3});
  double max_norm2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = xyz.at(i, 0) - cx;
    double y = xyz.at(i, 1) - cy;
    double z = xyz.at(i, 2) - cz;
    out.at(i, 0) = x;
    out.at(i, 1) = y;
    out.at(i, 2) = z;
    max_norm2 = std::max(max_norm2, x * x + y * y + z * z);
  }
  double max_norm = std::sqrt(max_norm2);
  if (max_norm < 1e-12)
    throw std::invalid_argument("normalize_cloud: zero-extent cloud (all points coincide)");
  double inv = 1.0 / max_norm;
  for (auto& v : out.data) v *= inv;
  return out;
}

void check_unit_rows(const Tensor& z, double tol, const char* what) {
  if (z.rank() != 2) throw std::invalid_argument(std::string(what) + ": expected a 2-D batch");
  for (int i = 0; i < z.rows(); ++i) {
    double s = 0;
    for (int j = 0; j < z.cols(); ++j) s += z.at(i, j) * z.at(i, j);
    if (std::abs(std::sqrt(s) - 1.0) > tol)
      throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) +
                                  " is not unit-norm (|z|=" + std::to_string(std::sqrt(s)) + ")");
  }
}

EmbeddingBatch make_embedding_batch(Tensor z, SpaceTag tag) {
  check_unit_rows(z);
  return EmbeddingBatch{std::move(z), tag};
}

std::uint64_t hash_bytes(const void* bytes, std::size_t n) {
  Fnv64 h;
  h.update(bytes, n);
  return h.digest();
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("hash_file: cannot open " + path);
  Fnv64 h;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    h.update(buf, static_cast<std::size_t>(f.gcount()));
  }
  return h.digest();
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace mmpoint
