#include "mmpoint/encoders.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mmpoint::enc {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<int> knn_indices(const Tensor& feats, int k) {
  if (feats.rank() != 2 || feats.rows() < 1)
    throw std::invalid_argument("knn: features must be a non-empty [n,d] matrix");
  const int n = feats.rows();
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  if (k > n)
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " exceeds point count n=" +
                                std::to_string(n));

  Eigen::Map<const RowMat> F(feats.ptr(), n, feats.cols());
  Eigen::MatrixXd G = F * F.transpose();

  std::vector<int> out(static_cast<size_t>(n) * static_cast<size_t>(k));
  std::vector<std::pair<double, int>> cand(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double d2 = G(i, i) + G(j, j) - 2.0 * G(i, j);
      cand[static_cast<size_t>(j)] = {d2 < 0.0 ? 0.0 : d2, j};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int a = 0; a < k; ++a)
      out[static_cast<size_t>(i) * k + static_cast<size_t>(a)] = cand[static_cast<size_t>(a)].second;
  }
  return out;
}

PointEncoder make_point_encoder(ParamStore& store, const PointEncoderConfig& cfg, Stream& init) {
  if (cfg.widths.empty()) throw std::invalid_argument("point encoder: needs at least one layer");
  if (cfg.k_nn < 1) throw std::invalid_argument("point encoder: k_nn must be >= 1");
  PointEncoder e;
  e.cfg = cfg;
  int d_in = 3;
  for (size_t l = 0; l < cfg.widths.size(); ++l) {
    int w = cfg.widths[l];
    if (w < 1) throw std::invalid_argument("point encoder: layer widths must be positive");
    Tensor W({2 * d_in, w});
    double s = std::sqrt(2.0 / (2 * d_in));
    for (auto& v : W.data) v = init.normal(0.0, s);
    std::string prefix = "point/l" + std::to_string(l + 1);
    e.w_ids.push_back(store.add(prefix + "/w", std::move(W)));
    e.b_ids.push_back(store.add(prefix + "/b", Tensor::zeros({w})));
    d_in = w;
  }
  return e;
}

PointEncoder::Output PointEncoder::encode(Tape& t, TapeBinding& b, int xyz) const {
  const Tensor& x0 = t.val(xyz);
  if (x0.rank() != 2 || x0.cols() != 3)
    throw std::invalid_argument("point encoder: input is " + x0.shape_str() +
                                ", expected [n,3]");
  if (x0.rows() < cfg.k_nn)
    throw std::invalid_argument("point encoder: cloud has " + std::to_string(x0.rows()) +
                                " points, fewer than k_nn=" + std::to_string(cfg.k_nn));

  int h = xyz;
  for (size_t l = 0; l < cfg.widths.size(); ++l) {
    std::vector<int> idx = knn_indices(t.val(h), cfg.k_nn);
    h = ops::edge_conv(t, h, std::move(idx), cfg.k_nn, b.leaf(t, w_ids[l]), b.leaf(t, b_ids[l]));
  }
  int global = ops::concat_cols(t, ops::col_max(t, h), ops::col_mean(t, h));
  return {h, global};
}

ImageEncoder make_image_encoder(ParamStore& store, const ImageEncoderConfig& cfg, Stream& init) {
  if (cfg.widths.empty()) throw std::invalid_argument("image encoder: needs at least one stage");
  ImageEncoder e;
  e.cfg = cfg;
  int c_in = 1;
  for (size_t l = 0; l < cfg.widths.size(); ++l) {
    int f = cfg.widths[l];
    if (f < 1) throw std::invalid_argument("image encoder: stage widths must be positive");
    Tensor W({f, c_in * 9});
    double s = std::sqrt(2.0 / (c_in * 9));
    for (auto& v : W.data) v = init.normal(0.0, s);
    std::string prefix = "image/s" + std::to_string(l + 1);
    e.w_ids.push_back(store.add(prefix + "/w", std::move(W)));
    e.b_ids.push_back(store.add(prefix + "/b", Tensor::zeros({f})));
    c_in = f;
  }
  return e;
}

int ImageEncoder::encode(Tape& t, TapeBinding& b, int pixels) const {
  const Tensor& x0 = t.val(pixels);
  if (x0.rank() != 3 || x0.dim(0) != 1)
    throw std::invalid_argument("image encoder: input is " + x0.shape_str() +
                                ", expected [1,H,W]");

  int h = pixels;
  for (size_t l = 0; l < cfg.widths.size(); ++l)
    h = ops::relu(t, ops::conv2d(t, h, b.leaf(t, w_ids[l]), b.leaf(t, b_ids[l]), 2, 1));
  return ops::global_avg_pool(t, h);
}

}  // namespace mmpoint::enc
