#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "mmpoint/augment.hpp"

namespace mmpoint::aug {

namespace {

void check_image(const Tensor& image, const char* who) {
  if (image.shape.size() != 2 || image.shape[0] < 1 || image.shape[1] < 1)
    throw std::invalid_argument(std::string(who) + ": expected a [H, W] image");
}

double clamp01(double v) { return std::max(0.0, std::min(1.0, v)); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

Tensor apply_flip(const Tensor& image, double prob, Stream& stream) {
  if (prob <= 0.0) return image;
  if (stream.uniform() >= prob) return image;
  int h = image.shape[0], w = image.shape[1];
  Tensor out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = image.at(y, w - 1 - x);
  return out;
}

Tensor apply_jitter(const Tensor& image, const Transform2D& t, Stream& stream) {
  if (t.brightness <= 0.0 && t.contrast <= 0.0) return image;
  double bf = 1.0 + stream.uniform(-t.brightness, t.brightness);
  double cf = 1.0 + stream.uniform(-t.contrast, t.contrast);
  Tensor out = image;
  for (auto& v : out.data) v *= bf;
  double mean = 0.0;
  for (double v : out.data) mean += v;
  mean /= static_cast<double>(out.size());
  for (auto& v : out.data) v = clamp01((v - mean) * cf + mean);
  return out;
}

Tensor apply_blur(const Tensor& image, const Transform2D& t, Stream& stream) {
  if (t.sigma_hi <= 0.0) return image;
  double sigma = stream.uniform(t.sigma_lo, t.sigma_hi);
  if (sigma <= 0.0) return image;

  double k[5];
  double total = 0.0;
  for (int j = -2; j <= 2; ++j) {
    k[j + 2] = std::exp(-(j * j) / (2.0 * sigma * sigma));
    total += k[j + 2];
  }
  for (double& v : k) v /= total;

  int h = image.shape[0], w = image.shape[1];
  auto edge = [](int i, int n) { return std::max(0, std::min(n - 1, i)); };
  Tensor horiz({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -2; j <= 2; ++j) acc += k[j + 2] * image.at(y, edge(x + j, w));
      horiz.at(y, x) = acc;
    }
  Tensor out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -2; j <= 2; ++j) acc += k[j + 2] * horiz.at(edge(y + j, h), x);
      out.at(y, x) = clamp01(acc);
    }
  return out;
}

Tensor apply_erase(const Tensor& image, const Transform2D& t, Stream& stream) {
  if (t.area_hi <= 0.0) return image;
  int h = image.shape[0], w = image.shape[1];
  double area = stream.uniform(t.area_lo, t.area_hi) * h * w;
  double aspect = std::exp(
      stream.uniform(std::log(t.erase_aspect_lo), std::log(t.erase_aspect_hi)));
  int eh = std::max(1, std::min(h, static_cast<int>(std::llround(std::sqrt(area * aspect)))));
  int ew = std::max(1, std::min(w, static_cast<int>(std::llround(std::sqrt(area / aspect)))));
  int top = static_cast<int>(stream.uniform_int(static_cast<std::uint64_t>(h - eh + 1)));
  int left = static_cast<int>(stream.uniform_int(static_cast<std::uint64_t>(w - ew + 1)));
  Tensor out = image;
  for (int y = top; y < top + eh; ++y)
    for (int x = left; x < left + ew; ++x) out.at(y, x) = 0.0;
  return out;
}

Tensor apply_graymix(const Tensor& image, const Transform2D& t, Stream& stream) {
  if (t.mix_hi <= 0.0) return image;
  double alpha = stream.uniform(t.mix_lo, t.mix_hi);
  Tensor out = image;
  for (auto& v : out.data) v = clamp01((1.0 - alpha) * v + alpha * 0.5);
  return out;
}

}  // namespace

CropQuaternion sample_crop(std::pair<double, double> s_range,
                           std::pair<double, double> r_range, const Tensor& image,
                           Stream& stream) {
  check_image(image, "sample_crop");
  if (s_range.first <= 0.0 || s_range.second > 1.0 || s_range.first > s_range.second)
    throw std::invalid_argument("sample_crop: area range must lie in (0, 1]");
  if (r_range.first < 0.5 || r_range.second > 2.0 || r_range.first > r_range.second)
    throw std::invalid_argument("sample_crop: aspect range must lie in [1/2, 2]");

  int h_img = image.shape[0], w_img = image.shape[1];
  double hw = static_cast<double>(h_img) * static_cast<double>(w_img);
  for (int attempt = 0; attempt < 10; ++attempt) {
    double s = stream.uniform(s_range.first, s_range.second);
    double r = stream.uniform(r_range.first, r_range.second);
    int h = std::max(1, static_cast<int>(std::llround(std::sqrt(s * hw / r))));
    int w = std::max(1, static_cast<int>(std::llround(std::sqrt(s * hw * r))));
    if (h > h_img || w > w_img) continue;
    int top = static_cast<int>(stream.uniform_int(static_cast<std::uint64_t>(h_img - h + 1)));
    int left = static_cast<int>(stream.uniform_int(static_cast<std::uint64_t>(w_img - w + 1)));
    return CropQuaternion{left + w / 2.0, top + h / 2.0, h, w};
  }
  return CropQuaternion{w_img / 2.0, h_img / 2.0, h_img, w_img};
}

Tensor crop_resize(const Tensor& image, const CropQuaternion& q) {
  check_image(image, "crop_resize");
  int h_img = image.shape[0], w_img = image.shape[1];
  if (q.h < 1 || q.w < 1) throw std::invalid_argument("crop_resize: empty rectangle");
  int top = static_cast<int>(std::llround(q.y - q.h / 2.0));
  int left = static_cast<int>(std::llround(q.x - q.w / 2.0));
  if (top < 0 || left < 0 || top + q.h > h_img || left + q.w > w_img)
    throw std::invalid_argument("crop_resize: rectangle exceeds the image");
  if (q.h == h_img && q.w == w_img) return image;

  Tensor out({h_img, w_img});
  double sy = static_cast<double>(q.h) / h_img;
  double sx = static_cast<double>(q.w) / w_img;
  for (int y = 0; y < h_img; ++y) {
    double src_y = (y + 0.5) * sy - 0.5;
    double cy = std::max(0.0, std::min(static_cast<double>(q.h - 1), src_y));
    int y0 = static_cast<int>(cy);
    int y1 = std::min(q.h - 1, y0 + 1);
    double fy = cy - y0;
    for (int x = 0; x < w_img; ++x) {
      double src_x = (x + 0.5) * sx - 0.5;
      double cx = std::max(0.0, std::min(static_cast<double>(q.w - 1), src_x));
      int x0 = static_cast<int>(cx);
      int x1 = std::min(q.w - 1, x0 + 1);
      double fx = cx - x0;
      double v00 = image.at(top + y0, left + x0);
      double v01 = image.at(top + y0, left + x1);
      double v10 = image.at(top + y1, left + x0);
      double v11 = image.at(top + y1, left + x1);
      out.at(y, x) = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                     fy * ((1 - fx) * v10 + fx * v11);
    }
  }
  return out;
}

Transform2D resized_crop(double s_lo, double s_hi, double r_lo, double r_hi,
                         bool scheduled_s_lo) {
  Transform2D t;
  t.kind = Kind::kResizedCrop;
  t.s_lo = s_lo;
  t.s_hi = s_hi;
  t.r_lo = r_lo;
  t.r_hi = r_hi;
  t.scheduled_s_lo = scheduled_s_lo;
  return t;
}

Transform2D horizontal_flip(double prob) {
  Transform2D t;
  t.kind = Kind::kHorizontalFlip;
  t.flip_prob = prob;
  return t;
}

Transform2D color_jitter(double brightness, double contrast) {
  Transform2D t;
  t.kind = Kind::kColorJitter;
  t.brightness = brightness;
  t.contrast = contrast;
  return t;
}

Transform2D gaussian_blur(double sigma_lo, double sigma_hi) {
  Transform2D t;
  t.kind = Kind::kGaussianBlur;
  t.sigma_lo = sigma_lo;
  t.sigma_hi = sigma_hi;
  return t;
}

Transform2D random_erase(double area_lo, double area_hi, double aspect_lo,
                         double aspect_hi) {
  Transform2D t;
  t.kind = Kind::kRandomErase;
  t.area_lo = area_lo;
  t.area_hi = area_hi;
  t.erase_aspect_lo = aspect_lo;
  t.erase_aspect_hi = aspect_hi;
  return t;
}

Transform2D grayscale_mix(double mix_lo, double mix_hi) {
  Transform2D t;
  t.kind = Kind::kGrayscaleMix;
  t.mix_lo = mix_lo;
  t.mix_hi = mix_hi;
  return t;
}

std::string Transform2D::serialize() const {
  switch (kind) {
    case Kind::kResizedCrop:
      return "crop(s=" + (scheduled_s_lo ? std::string("sched") : fmt(s_lo)) + ".." +
             fmt(s_hi) + ",r=" + fmt(r_lo) + ".." + fmt(r_hi) + ")";
    case Kind::kHorizontalFlip:
      return "flip(p=" + fmt(flip_prob) + ")";
    case Kind::kColorJitter:
      return "jitter(b=" + fmt(brightness) + ",c=" + fmt(contrast) + ")";
    case Kind::kGaussianBlur:
      return "blur(sigma=" + fmt(sigma_lo) + ".." + fmt(sigma_hi) + ")";
    case Kind::kRandomErase:
      return "erase(a=" + fmt(area_lo) + ".." + fmt(area_hi) + ",r=" +
             fmt(erase_aspect_lo) + ".." + fmt(erase_aspect_hi) + ")";
    case Kind::kGrayscaleMix:
      return "graymix(a=" + fmt(mix_lo) + ".." + fmt(mix_hi) + ")";
  }
  throw std::logic_error("Transform2D::serialize: unknown kind");
}

Tensor apply_transform(const Tensor& image, const Transform2D& t, double crop_s_floor,
                       Stream& stream) {
  check_image(image, "apply_transform");
  switch (t.kind) {
    case Kind::kResizedCrop: {
      double lo = t.scheduled_s_lo ? crop_s_floor : t.s_lo;
      if (lo >= 1.0 && t.s_hi >= 1.0 && t.r_lo == 1.0 && t.r_hi == 1.0) return image;
      CropQuaternion q = sample_crop({lo, t.s_hi}, {t.r_lo, t.r_hi}, image, stream);
      return crop_resize(image, q);
    }
    case Kind::kHorizontalFlip:
      return apply_flip(image, t.flip_prob, stream);
    case Kind::kColorJitter:
      return apply_jitter(image, t, stream);
    case Kind::kGaussianBlur:
      return apply_blur(image, t, stream);
    case Kind::kRandomErase:
      return apply_erase(image, t, stream);
    case Kind::kGrayscaleMix:
      return apply_graymix(image, t, stream);
  }
  throw std::logic_error("apply_transform: unknown kind");
}

}  // namespace mmpoint::aug
