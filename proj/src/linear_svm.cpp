#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "mmpoint/evalsuite.hpp"

namespace mmpoint::eval {

namespace {

void check_features(const Tensor& feats, size_t n_labels, const char* who) {
  if (feats.rank() != 2)
    throw std::invalid_argument(std::string(who) + ": features must be [n, d]");
  if (static_cast<size_t>(feats.rows()) != n_labels)
    throw std::invalid_argument(std::string(who) + ": " + std::to_string(feats.rows()) +
                                " feature rows vs " + std::to_string(n_labels) + " labels");
}

}  // namespace

LinearModel train_linear_svm(const Tensor& feats, const std::vector<int>& labels,
                             const LinearSvmConfig& cfg) {
  check_features(feats, labels.size(), "train_linear_svm");
  if (cfg.c_reg <= 0.0)
    throw std::invalid_argument("train_linear_svm: regularization weight must be positive");
  std::set<int> uniq(labels.begin(), labels.end());
  if (uniq.size() < 2)
    throw std::invalid_argument("train_linear_svm: need at least two classes, got " +
                                std::to_string(uniq.size()));

  int n = feats.rows(), d = feats.cols();
  std::vector<double> qii(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = 1.0;  // the appended bias coordinate
    for (int c = 0; c < d; ++c) s += feats.at(i, c) * feats.at(i, c);
    qii[static_cast<size_t>(i)] = s;
  }

  LinearModel model;
  model.classes.assign(uniq.begin(), uniq.end());
  model.weights = Tensor({static_cast<int>(model.classes.size()), d + 1});

  std::vector<double> w(static_cast<size_t>(d) + 1);
  std::vector<double> alpha(static_cast<size_t>(n));
  std::vector<double> y(static_cast<size_t>(n));
  for (size_t ci = 0; ci < model.classes.size(); ++ci) {
    int cls = model.classes[ci];
    std::fill(w.begin(), w.end(), 0.0);
    std::fill(alpha.begin(), alpha.end(), 0.0);
    for (int i = 0; i < n; ++i) y[static_cast<size_t>(i)] = labels[static_cast<size_t>(i)] == cls ? 1.0 : -1.0;

    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
      double max_pg = 0.0;
      for (int i = 0; i < n; ++i) {
        size_t iq = static_cast<size_t>(i);
        double margin = w[static_cast<size_t>(d)];
        for (int c = 0; c < d; ++c) margin += w[static_cast<size_t>(c)] * feats.at(i, c);
        double grad = y[iq] * margin - 1.0;
        double pg;
        if (alpha[iq] <= 0.0)
          pg = std::min(grad, 0.0);
        else if (alpha[iq] >= cfg.c_reg)
          pg = std::max(grad, 0.0);
        else
          pg = grad;
        max_pg = std::max(max_pg, std::abs(pg));
        if (std::abs(pg) > 1e-14) {
          double next = std::clamp(alpha[iq] - grad / qii[iq], 0.0, cfg.c_reg);
          double delta = (next - alpha[iq]) * y[iq];
          if (delta != 0.0) {
            for (int c = 0; c < d; ++c) w[static_cast<size_t>(c)] += delta * feats.at(i, c);
            w[static_cast<size_t>(d)] += delta;
            alpha[iq] = next;
          }
        }
      }
      if (max_pg < cfg.tol) break;
    }
    for (int c = 0; c <= d; ++c)
      model.weights.at(static_cast<int>(ci), c) = w[static_cast<size_t>(c)];
  }
  return model;
}

std::vector<int> predict(const LinearModel& model, const Tensor& feats) {
  if (feats.rank() != 2 || feats.cols() + 1 != model.weights.cols())
    throw std::invalid_argument("predict: feature width does not match the model");
  int n = feats.rows(), d = feats.cols();
  std::vector<int> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_score = 0.0;
    for (size_t ci = 0; ci < model.classes.size(); ++ci) {
      double score = model.weights.at(static_cast<int>(ci), d);
      for (int c = 0; c < d; ++c)
        score += model.weights.at(static_cast<int>(ci), c) * feats.at(i, c);
      if (ci == 0 || score > best_score) {
        best = model.classes[ci];
        best_score = score;
      }
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

}  // namespace mmpoint::eval
