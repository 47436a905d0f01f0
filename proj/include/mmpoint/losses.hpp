#pragma once

#include <vector>

#include "mmpoint/core.hpp"
#include "mmpoint/tape.hpp"

namespace mmpoint::losses {

// Symmetric contrastive loss over two paired batches of unit-norm rows.
// For each anchor the positive is its paired row; negatives are every other
// row of both batches. The batch-size-1 case is exactly zero. Throws on
// tau <= 0, mismatched shapes, or (value API) rows off the unit sphere.
double pairwise_contrast(const EmbeddingBatch& a, const EmbeddingBatch& b, double tau);

double loss_intra(const EmbeddingBatch& z1, const EmbeddingBatch& z2, double tau);
double loss_inter(const EmbeddingBatch& zp, const EmbeddingBatch& v, double tau);

struct InterPlusValue {
  double total = 0;
  std::vector<double> per_level;  // pairwise(z1_j, v_j) + pairwise(z2_j, v_j)
};

// Sum over levels of both point variants contrasted against the level's view
// batch. All three lists must have the same length m >= 1.
InterPlusValue loss_inter_plus(const std::vector<EmbeddingBatch>& z1,
                               const std::vector<EmbeddingBatch>& z2,
                               const std::vector<EmbeddingBatch>& views, double tau);

// log(k) - loss; valid for k >= 1.
double mi_lower_bound(double loss, int k);

// Tape builders used inside training graphs. Inputs are [B,d] nodes whose
// rows are unit-norm by construction (head outputs).
int pairwise_contrast_node(Tape& t, int a, int b, double tau);
int loss_inter_plus_node(Tape& t, const std::vector<int>& z1, const std::vector<int>& z2,
                         const std::vector<int>& views, double tau,
                         std::vector<double>* per_level_out = nullptr);

}  // namespace mmpoint::losses
