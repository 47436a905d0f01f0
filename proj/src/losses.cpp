#include "mmpoint/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace mmpoint::losses {

namespace {

void check_shapes(const Tensor& a, const Tensor& b, double tau) {
  if (tau <= 0) throw std::invalid_argument("contrastive loss: tau must be positive");
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("contrastive loss: batches must be 2-D");
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("contrastive loss: batch shapes differ, " + a.shape_str() +
                                " vs " + b.shape_str());
  if (a.rows() < 1) throw std::invalid_argument("contrastive loss: empty batch");
}

// Per-anchor terms for one direction. The denominator is assembled as
// (all off-diagonal mass) + positive, with the positive added last, so the
// ratio never drops below 1 in floating point and the single-pair case is
// exactly zero.
int direction_node(Tape& t, int anchors, int others, double inv_tau) {
  int s_same = ops::scale(t, ops::matmul_nt(t, anchors, anchors), inv_tau);
  int s_cross = ops::scale(t, ops::matmul_nt(t, anchors, others), inv_tau);
  int e_same = ops::exp(t, s_same);
  int e_cross = ops::exp(t, s_cross);
  int rest = ops::add(t, ops::row_sum_offdiag(t, e_same), ops::row_sum_offdiag(t, e_cross));
  int num = ops::diag(t, e_cross);
  int denom = ops::add(t, rest, num);
  int terms = ops::sub(t, ops::log(t, denom), ops::log(t, num));
  return ops::sum(t, terms);
}

}  // namespace

int pairwise_contrast_node(Tape& t, int a, int b, double tau) {
  check_shapes(t.val(a), t.val(b), tau);
  int n = t.val(a).rows();
  double inv_tau = 1.0 / tau;
  int fwd = direction_node(t, a, b, inv_tau);
  int rev = direction_node(t, b, a, inv_tau);
  return ops::scale(t, ops::add(t, fwd, rev), 1.0 / (2.0 * n));
}

double pairwise_contrast(const EmbeddingBatch& a, const EmbeddingBatch& b, double tau) {
  check_shapes(a.z, b.z, tau);
  check_unit_rows(a.z, 1e-5, "pairwise_contrast lhs");
  check_unit_rows(b.z, 1e-5, "pairwise_contrast rhs");
  Tape t;
  int an = t.leaf(a.z), bn = t.leaf(b.z);
  return t.val(pairwise_contrast_node(t, an, bn, tau)).data[0];
}

double loss_intra(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double tau) {
  return pairwise_contrast(z1, z2, tau);
}

double loss_inter(const EmbeddingBatch& zp, const EmbeddingBatch& v, double tau) {
  return pairwise_contrast(zp, v, tau);
}

InterPlusValue loss_inter_plus(const std::vector<EmbeddingBatch>& z1,
                               const std::vector<EmbeddingBatch>& z2,
                               const std::vector<EmbeddingBatch>& views, double tau) {
  if (views.empty() || z1.size() != views.size() || z2.size() != views.size())
    throw std::invalid_argument("loss_inter_plus: level lists must share length m >= 1");
  InterPlusValue out;
  for (size_t j = 0; j < views.size(); ++j) {
    double lv = loss_inter(z1[j], views[j], tau) + loss_inter(z2[j], views[j], tau);
    out.per_level.push_back(lv);
    out.total += lv;
  }
  return out;
}

int loss_inter_plus_node(Tape& t, const std::vector<int>& z1, const std::vector<int>& z2,
                         const std::vector<int>& views, double tau,
                         std::vector<double>* per_level_out) {
  if (views.empty() || z1.size() != views.size() || z2.size() != views.size())
    throw std::invalid_argument("loss_inter_plus: level lists must share length m >= 1");
  if (per_level_out) per_level_out->clear();
  int total = -1;
  for (size_t j = 0; j < views.size(); ++j) {
    int l1 = pairwise_contrast_node(t, z1[j], views[j], tau);
    int l2 = pairwise_contrast_node(t, z2[j], views[j], tau);
    int lv = ops::add(t, l1, l2);
    if (per_level_out) per_level_out->push_back(t.val(lv).data[0]);
    total = j == 0 ? lv : ops::add(t, total, lv);
  }
  return total;
}

double mi_lower_bound(double loss, int k) {
  if (k < 1) throw std::invalid_argument("mi_lower_bound: k must be >= 1");
  return std::log(static_cast<double>(k)) - loss;
}

}  // namespace mmpoint::losses
