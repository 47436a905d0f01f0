#pragma once

#include <functional>
#include <vector>

#include "mmpoint/tensor.hpp"

namespace mmpoint {

// Reverse-mode tape. Nodes are created in topological order by the op
// helpers below; backward() walks them in reverse. Values are doubles
// throughout so analytic gradients can be checked against 64-bit central
// finite differences.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;
    bool needs_grad = false;
  };

  int leaf(Tensor v, bool needs_grad = false) {
    return push(std::move(v), needs_grad, nullptr);
  }

  int push(Tensor v, bool needs_grad, std::function<void(Tape&)> back) {
    nodes.push_back(Node{std::move(v), Tensor{}, std::move(back), needs_grad});
    return static_cast<int>(nodes.size()) - 1;
  }

  const Tensor& val(int id) const { return nodes[static_cast<size_t>(id)].value; }
  Tensor& grad(int id) { return nodes[static_cast<size_t>(id)].grad; }
  bool needs_grad(int id) const { return nodes[static_cast<size_t>(id)].needs_grad; }

  // Seeds d(root)/d(root) = 1 and accumulates gradients into every node
  // reachable from the root that has needs_grad set. Root must be scalar.
  void backward(int root);

  std::size_t size() const { return nodes.size(); }

  std::vector<Node> nodes;
};

namespace ops {

int add(Tape& t, int a, int b);
int sub(Tape& t, int a, int b);
int scale(Tape& t, int a, double c);
int hadamard(Tape& t, int a, int b);

// C = A [M,K] * B [K,N]
int matmul(Tape& t, int a, int b);
// C = A [M,K] * B^T with B [N,K]
int matmul_nt(Tape& t, int a, int b);
// [M,N] plus a length-N bias broadcast over rows
int add_row_bias(Tape& t, int a, int bias);

int relu(Tape& t, int a);
// Rows of a [M,N] matrix scaled to unit L2 norm.
int l2_normalize_rows(Tape& t, int a);
int concat_cols(Tape& t, int a, int b);

int exp(Tape& t, int a);
int log(Tape& t, int a);

int row_sum(Tape& t, int a);          // [M,N] -> [M]
int row_sum_offdiag(Tape& t, int a);  // [M,M] -> [M], skips the diagonal
int diag(Tape& t, int a);             // [M,M] -> [M]

int col_max(Tape& t, int a);   // [M,N] -> [1,N], max over rows
int col_mean(Tape& t, int a);  // [M,N] -> [1,N]

int sum(Tape& t, int a);   // -> [1]
int mean(Tape& t, int a);  // -> [1]
int dot(Tape& t, int a, int b);

int stack_rows(Tape& t, const std::vector<int>& rows);  // k nodes [1,d] -> [k,d]

// Edge convolution over a fixed neighbor graph. x [n,d], idx flattened
// [n*k] row indices, W [2d,w], b [w]. For each point the edge feature
// concat(x_i, x_j - x_i) goes through the shared affine map and rectifier;
// the output is the per-channel max over the k neighbors.
int edge_conv(Tape& t, int x, std::vector<int> idx, int k, int w_id, int b_id);

// 3x3 convolution, x [C,H,W], W [F,C*9], b [F]. Output [F,Ho,Wo].
int conv2d(Tape& t, int x, int w_id, int b_id, int stride, int pad);

int global_avg_pool(Tape& t, int x);  // [C,H,W] -> [1,C]

}  // namespace ops

}  // namespace mmpoint
