#pragma once

#include <vector>

#include "mmpoint/params.hpp"
#include "mmpoint/rng.hpp"
#include "mmpoint/tape.hpp"
#include "mmpoint/tensor.hpp"

namespace mmpoint::enc {

// k nearest rows of feats by Euclidean distance, self included, ties broken
// by row index. Returns row indices flattened to [n*k].
std::vector<int> knn_indices(const Tensor& feats, int k);

struct PointEncoderConfig {
  int k_nn = 16;
  std::vector<int> widths = {64, 64, 128};
};

struct ImageEncoderConfig {
  std::vector<int> widths = {32, 64, 128, 256};
};

// Stack of edge convolutions over a neighbor graph that is rebuilt in the
// current feature space before every layer (coordinates for the first).
struct PointEncoder {
  PointEncoderConfig cfg;
  std::vector<int> w_ids, b_ids;

  struct Output {
    int per_point;  // [n, widths.back()]
    int global;     // [1, 2*widths.back()], max and mean pooled halves
  };
  Output encode(Tape& t, TapeBinding& b, int xyz) const;
  int feature_dim() const { return 2 * cfg.widths.back(); }
};

// Strided 3x3 convolution stages over a single-channel image, ending in a
// global average pool.
struct ImageEncoder {
  ImageEncoderConfig cfg;
  std::vector<int> w_ids, b_ids;

  int encode(Tape& t, TapeBinding& b, int pixels) const;  // [1,H,W] -> [1, widths.back()]
  int feature_dim() const { return cfg.widths.back(); }
};

PointEncoder make_point_encoder(ParamStore& store, const PointEncoderConfig& cfg, Stream& init);
ImageEncoder make_image_encoder(ParamStore& store, const ImageEncoderConfig& cfg, Stream& init);

}  // namespace mmpoint::enc
