#include "mmpoint/tape.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace mmpoint {

using RM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RM>;
using CMapRM = Eigen::Map<const RM>;

static MapRM as_mat(Tensor& t, int rows, int cols) {
  return MapRM(t.ptr(), rows, cols);
}
static CMapRM as_mat(const Tensor& t, int rows, int cols) {
  return CMapRM(t.ptr(), rows, cols);
}

void Tape::backward(int root) {
  auto& r = nodes[static_cast<size_t>(root)];
  if (r.value.size() != 1)
    throw std::invalid_argument("backward: root must be scalar, got " + r.value.shape_str());
  if (!r.needs_grad) return;
  for (int i = 0; i <= root; ++i) {
    auto& n = nodes[static_cast<size_t>(i)];
    if (n.needs_grad) n.grad = Tensor::zeros(n.value.shape);
  }
  r.grad.data[0] = 1.0;
  for (int i = root; i >= 0; --i) {
    auto& n = nodes[static_cast<size_t>(i)];
    if (n.back && n.needs_grad) n.back(*this);
  }
}

namespace ops {

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
}

int add(Tape& t, int a, int b) {
  const Tensor &A = t.val(a), &B = t.val(b);
  check_same_shape(A, B, "add");
  Tensor v = A;
  for (std::int64_t i = 0; i < v.size(); ++i) v.data[i] += B.data[i];
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad(a);
      for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad(b);
      for (std::int64_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i];
    }
  });
}

int sub(Tape& t, int a, int b) {
  const Tensor &A = t.val(a), &B = t.val(b);
  check_same_shape(A, B, "sub");
  Tensor v = A;
  for (std::int64_t i = 0; i < v.size(); ++i) v.data[i] -= B.data[i];
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad(a);
      for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad(b);
      for (std::int64_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
    }
  });
}

int scale(Tape& t, int a, double c) {
  Tensor v = t.val(a);
  for (auto& x : v.data) x *= c;
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, c, id](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad(a);
    for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
  });
}

int hadamard(Tape& t, int a, int b) {
  const Tensor &A = t.val(a), &B = t.val(b);
  check_same_shape(A, B, "hadamard");
  Tensor v = A;
  for (std::int64_t i = 0; i < v.size(); ++i) v.data[i] *= B.data[i];
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, b, id](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor &A = t.val(a), &B = t.val(b);
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad(a);
      for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * B.data[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad(b);
      for (std::int64_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * A.data[i];
    }
  });
}

int matmul(Tape& t, int a, int b) {
  const Tensor &A = t.val(a), &B = t.val(b);
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
    throw std::invalid_argument("matmul: incompatible shapes " + A.shape_str() + " x " +
                                B.shape_str());
  int M = A.rows(), K = A.cols(), N = B.cols();
  Tensor v({M, N});
  as_mat(v, M, N).noalias() = as_mat(A, M, K) * as_mat(B, K, N);
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, b, id, M, K, N](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.needs_grad(a))
      as_mat(t.grad(a), M, K).noalias() += as_mat(g, M, N) * as_mat(t.val(b), K, N).transpose();
    if (t.needs_grad(b))
      as_mat(t.grad(b), K, N).noalias() += as_mat(t.val(a), M, K).transpose() * as_mat(g, M, N);
  });
}

int matmul_nt(Tape& t, int a, int b) {
  const Tensor &A = t.val(a), &B = t.val(b);
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.cols())
    throw std::invalid_argument("matmul_nt: incompatible shapes " + A.shape_str() + " x " +
                                B.shape_str() + "^T");
  int M = A.rows(), K = A.cols(), N = B.rows();
  Tensor v({M, N});
  as_mat(v, M, N).noalias() = as_mat(A, M, K) * as_mat(B, N, K).transpose();
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, b, id, M, K, N](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.needs_grad(a))
      as_mat(t.grad(a), M, K).noalias() += as_mat(g, M, N) * as_mat(t.val(b), N, K);
    if (t.needs_grad(b))
      as_mat(t.grad(b), N, K).noalias() += as_mat(g, M, N).transpose() * as_mat(t.val(a), M, K);
  });
}

int add_row_bias(Tape& t, int a, int bias) {
  const Tensor &A = t.val(a), &B = t.val(bias);
  if (A.rank() != 2 || B.rank() != 1 || B.dim(0) != A.cols())
    throw std::invalid_argument("add_row_bias: shapes " + A.shape_str() + " + " + B.shape_str());
  int M = A.rows(), N = A.cols();
  Tensor v = A;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) v.at(i, j) += B.at(j);
  bool ng = t.needs_grad(a) || t.needs_grad(bias);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, bias, id, M, N](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad(a);
      for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    }
    if (t.needs_grad(bias)) {
      Tensor& gb = t.grad(bias);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) gb.at(j) += g.at(i, j);
    }
  });
}

int relu(Tape& t, int a) {
  Tensor v = t.val(a);
  for (auto& x : v.data) x = x > 0 ? x : 0.0;
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, id](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    const Tensor& y = t.val(id);
    Tensor& ga = t.grad(a);
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (y.data[i] > 0) ga.data[i] += g.data[i];
  });
}

int l2_normalize_rows(Tape& t, int a) {
  const Tensor& A = t.val(a);
  if (A.rank() != 2) throw std::invalid_argument("l2_normalize_rows: expected 2-D");
  int M = A.rows(), N = A.cols();
  Tensor v({M, N});
  std::vector<double> norms(static_cast<size_t>(M));
  for (int i = 0; i < M; ++i) {
    double s = 0;
    for (int j = 0; j < N; ++j) s += A.at(i, j) * A.at(i, j);
    double n = std::sqrt(s);
    if (n < 1e-12)
      throw std::invalid_argument("l2_normalize_rows: zero-norm row " + std::to_string(i));
    norms[static_cast<size_t>(i)] = n;
    double inv = 1.0 / n;
    for (int j = 0; j < N; ++j) v.at(i, j) = A.at(i, j) * inv;
  }
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, id, M, N, norms = std::move(norms)](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    const Tensor& y = t.val(id);
    Tensor& ga = t.grad(a);
    for (int i = 0; i < M; ++i) {
      double dotyg = 0;
      for (int j = 0; j < N; ++j) dotyg += y.at(i, j) * g.at(i, j);
      double inv = 1.0 / norms[static_cast<size_t>(i)];
      for (int j = 0; j < N; ++j) ga.at(i, j) += (g.at(i, j) - y.at(i, j) * dotyg) * inv;
    }
  });
}

int concat_cols(Tape& t, int a, int b) {
  const Tensor &A = t.val(a), &B = t.val(b);
  if (A.rank() != 2 || B.rank() != 2 || A.rows() != B.rows())
    throw std::invalid_argument("concat_cols: shapes " + A.shape_str() + ", " + B.shape_str());
  int M = A.rows(), Na = A.cols(), Nb = B.cols();
  Tensor v({M, Na + Nb});
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < Na; ++j) v.at(i, j) = A.at(i, j);
    for (int j = 0; j < Nb; ++j) v.at(i, Na + j) = B.at(i, j);
  }
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, b, id, M, Na, Nb](Tape& t) {
    const Tensor& g = t.grad(id);
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad(a);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < Na; ++j) ga.at(i, j) += g.at(i, j);
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad(b);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < Nb; ++j) gb.at(i, j) += g.at(i, Na + j);
    }
  });
}

int exp(Tape& t, int a) {
  Tensor v = t.val(a);
  for (auto& x : v.data) x = std::exp(x);
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, id](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    const Tensor& y = t.val(id);
    Tensor& ga = t.grad(a);
    for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * y.data[i];
  });
}

int log(Tape& t, int a) {
  Tensor v = t.val(a);
  for (auto& x : v.data) {
    if (x <= 0) throw std::domain_error("log: non-positive input");
    x = std::log(x);
  }
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, id](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    const Tensor& x = t.val(a);
    Tensor& ga = t.grad(a);
    for (std::int64_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / x.data[i];
  });
}

int row_sum(Tape& t, int a) {
  const Tensor& A = t.val(a);
  if (A.rank() != 2) throw std::invalid_argument("row_sum: expected 2-D");
  int M = A.rows(), N = A.cols();
  Tensor v({M});
  for (int i = 0; i < M; ++i) {
    double s = 0;
    for (int j = 0; j < N; ++j) s += A.at(i, j);
    v.at(i) = s;
  }
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, id, M, N](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad(a);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j) ga.at(i, j) += g.at(i);
  });
}

int row_sum_offdiag(Tape& t, int a) {
  const Tensor& A = t.val(a);
  if (A.rank() != 2 || A.rows() != A.cols())
    throw std::invalid_argument("row_sum_offdiag: expected square matrix");
  int M = A.rows();
  Tensor v({M});
  for (int i = 0; i < M; ++i) {
    double s = 0;
    for (int j = 0; j < M; ++j)
      if (j != i) s += A.at(i, j);
    v.at(i) = s;
  }
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, id, M](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad(a);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j)
        if (j != i) ga.at(i, j) += g.at(i);
  });
}

int diag(Tape& t, int a) {
  const Tensor& A = t.val(a);
  if (A.rank() != 2 || A.rows() != A.cols())
    throw std::invalid_argument("diag: expected square matrix");
  int M = A.rows();
  Tensor v({M});
  for (int i = 0; i < M; ++i) v.at(i) = A.at(i, i);
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, id, M](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad(a);
    for (int i = 0; i < M; ++i) ga.at(i, i) += g.at(i);
  });
}

int col_max(Tape& t, int a) {
  const Tensor& A = t.val(a);
  if (A.rank() != 2 || A.rows() < 1) throw std::invalid_argument("col_max: expected non-empty 2-D");
  int M = A.rows(), N = A.cols();
  Tensor v({1, N});
  std::vector<int> arg(static_cast<size_t>(N), 0);
  for (int j = 0; j < N; ++j) {
    double best = A.at(0, j);
    int bi = 0;
    for (int i = 1; i < M; ++i)
      if (A.at(i, j) > best) {
        best = A.at(i, j);
        bi = i;
      }
    v.at(0, j) = best;
    arg[static_cast<size_t>(j)] = bi;
  }
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, id, N, arg = std::move(arg)](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad(a);
    for (int j = 0; j < N; ++j) ga.at(arg[static_cast<size_t>(j)], j) += g.at(0, j);
  });
}

int col_mean(Tape& t, int a) {
  const Tensor& A = t.val(a);
  if (A.rank() != 2 || A.rows() < 1)
    throw std::invalid_argument("col_mean: expected non-empty 2-D");
  int M = A.rows(), N = A.cols();
  Tensor v({1, N});
  for (int j = 0; j < N; ++j) {
    double s = 0;
    for (int i = 0; i < M; ++i) s += A.at(i, j);
    v.at(0, j) = s / M;
  }
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [a, id, M, N](Tape& t) {
    if (!t.needs_grad(a)) return;
    const Tensor& g = t.grad(id);
    Tensor& ga = t.grad(a);
    double inv = 1.0 / M;
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < M; ++i) ga.at(i, j) += g.at(0, j) * inv;
  });
}

int sum(Tape& t, int a) {
  const Tensor& A = t.val(a);
  double s = 0;
  for (double x : A.data) s += x;
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(Tensor::scalar(s), ng, [a, id](Tape& t) {
    if (!t.needs_grad(a)) return;
    double g = t.grad(id).data[0];
    Tensor& ga = t.grad(a);
    for (auto& x : ga.data) x += g;
  });
}

int mean(Tape& t, int a) {
  const Tensor& A = t.val(a);
  if (A.size() == 0) throw std::invalid_argument("mean: empty tensor");
  double s = 0;
  for (double x : A.data) s += x;
  double inv = 1.0 / static_cast<double>(A.size());
  bool ng = t.needs_grad(a);
  int id = static_cast<int>(t.size());
  return t.push(Tensor::scalar(s * inv), ng, [a, id, inv](Tape& t) {
    if (!t.needs_grad(a)) return;
    double g = t.grad(id).data[0] * inv;
    Tensor& ga = t.grad(a);
    for (auto& x : ga.data) x += g;
  });
}

int dot(Tape& t, int a, int b) {
  const Tensor &A = t.val(a), &B = t.val(b);
  if (A.size() != B.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0;
  for (std::int64_t i = 0; i < A.size(); ++i) s += A.data[i] * B.data[i];
  bool ng = t.needs_grad(a) || t.needs_grad(b);
  int id = static_cast<int>(t.size());
  return t.push(Tensor::scalar(s), ng, [a, b, id](Tape& t) {
    double g = t.grad(id).data[0];
    const Tensor &A = t.val(a), &B = t.val(b);
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad(a);
      for (std::int64_t i = 0; i < A.size(); ++i) ga.data[i] += g * B.data[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad(b);
      for (std::int64_t i = 0; i < B.size(); ++i) gb.data[i] += g * A.data[i];
    }
  });
}

int stack_rows(Tape& t, const std::vector<int>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
  int d = t.val(rows[0]).size() > 0 ? static_cast<int>(t.val(rows[0]).size()) : 0;
  int B = static_cast<int>(rows.size());
  Tensor v({B, d});
  bool ng = false;
  for (int i = 0; i < B; ++i) {
    const Tensor& r = t.val(rows[static_cast<size_t>(i)]);
    if (static_cast<int>(r.size()) != d)
      throw std::invalid_argument("stack_rows: inconsistent row sizes");
    for (int j = 0; j < d; ++j) v.at(i, j) = r.data[static_cast<size_t>(j)];
    ng = ng || t.needs_grad(rows[static_cast<size_t>(i)]);
  }
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [rows, id, B, d](Tape& t) {
    const Tensor& g = t.grad(id);
    for (int i = 0; i < B; ++i) {
      int r = rows[static_cast<size_t>(i)];
      if (!t.needs_grad(r)) continue;
      Tensor& gr = t.grad(r);
      for (int j = 0; j < d; ++j) gr.data[static_cast<size_t>(j)] += g.at(i, j);
    }
  });
}

int edge_conv(Tape& t, int x, std::vector<int> idx, int k, int w_id, int b_id) {
  const Tensor& X = t.val(x);
  const Tensor& W = t.val(w_id);
  const Tensor& b = t.val(b_id);
  if (X.rank() != 2) throw std::invalid_argument("edge_conv: features must be 2-D");
  int n = X.rows(), d = X.cols();
  if (W.rank() != 2 || W.rows() != 2 * d)
    throw std::invalid_argument("edge_conv: weight must be [2d,w], got " + W.shape_str());
  int w = W.cols();
  if (b.rank() != 1 || b.dim(0) != w) throw std::invalid_argument("edge_conv: bias must be [w]");
  if (static_cast<int>(idx.size()) != n * k)
    throw std::invalid_argument("edge_conv: neighbor index size mismatch");

  // Edge features for all points, then one shared GEMM.
  Tensor E({n * k, 2 * d});
  for (int i = 0; i < n; ++i) {
    const double* xi = X.ptr() + static_cast<size_t>(i) * d;
    for (int s = 0; s < k; ++s) {
      const double* xj = X.ptr() + static_cast<size_t>(idx[static_cast<size_t>(i) * k + s]) * d;
      double* e = E.ptr() + (static_cast<size_t>(i) * k + s) * (2 * d);
      for (int c = 0; c < d; ++c) {
        e[c] = xi[c];
        e[d + c] = xj[c] - xi[c];
      }
    }
  }
  Tensor P({n * k, w});
  as_mat(P, n * k, w).noalias() = as_mat(E, n * k, 2 * d) * as_mat(W, 2 * d, w);

  Tensor v({n, w});
  std::vector<std::int32_t> slot(static_cast<size_t>(n) * w, -1);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < w; ++c) {
      double best = 0.0;
      int bs = -1;
      for (int s = 0; s < k; ++s) {
        double pre = P.at(i * k + s, c) + b.at(c);
        if (pre > best) {
          best = pre;
          bs = s;
        }
      }
      v.at(i, c) = best;
      slot[static_cast<size_t>(i) * w + c] = bs;
    }
  }

  bool ng = t.needs_grad(x) || t.needs_grad(w_id) || t.needs_grad(b_id);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng,
                [x, w_id, b_id, id, n, d, k, w, idx = std::move(idx),
                 slot = std::move(slot)](Tape& t) {
    const Tensor& g = t.grad(id);
    const Tensor& X = t.val(x);
    const Tensor& W = t.val(w_id);
    bool need_x = t.needs_grad(x);
    bool need_w = t.needs_grad(w_id);
    bool need_b = t.needs_grad(b_id);

    // Transposed weight copy gives contiguous per-channel rows below.
    std::vector<double> Wt(static_cast<size_t>(w) * 2 * d);
    for (int r = 0; r < 2 * d; ++r)
      for (int c = 0; c < w; ++c)
        Wt[static_cast<size_t>(c) * 2 * d + r] = W.at(r, c);
    std::vector<double> dWt(need_w ? static_cast<size_t>(w) * 2 * d : 0, 0.0);

    Tensor* gx = need_x ? &t.grad(x) : nullptr;
    Tensor* gb = need_b ? &t.grad(b_id) : nullptr;

    for (int i = 0; i < n; ++i) {
      const double* xi = X.ptr() + static_cast<size_t>(i) * d;
      double* gxi = need_x ? gx->ptr() + static_cast<size_t>(i) * d : nullptr;
      for (int c = 0; c < w; ++c) {
        int s = slot[static_cast<size_t>(i) * w + c];
        if (s < 0) continue;
        double go = g.at(i, c);
        if (go == 0.0) continue;
        int j = idx[static_cast<size_t>(i) * k + s];
        const double* xj = X.ptr() + static_cast<size_t>(j) * d;
        if (need_w) {
          double* dw = dWt.data() + static_cast<size_t>(c) * 2 * d;
          for (int r = 0; r < d; ++r) {
            dw[r] += go * xi[r];
            dw[d + r] += go * (xj[r] - xi[r]);
          }
        }
        if (need_b) gb->at(c) += go;
        if (need_x) {
          const double* wt = Wt.data() + static_cast<size_t>(c) * 2 * d;
          double* gxj = gx->ptr() + static_cast<size_t>(j) * d;
          for (int r = 0; r < d; ++r) {
            gxi[r] += go * (wt[r] - wt[d + r]);
            gxj[r] += go * wt[d + r];
          }
        }
      }
    }
    if (need_w) {
      Tensor& gw = t.grad(w_id);
      for (int r = 0; r < 2 * d; ++r)
        for (int c = 0; c < w; ++c)
          gw.at(r, c) += dWt[static_cast<size_t>(c) * 2 * d + r];
    }
  });
}

static void im2col(const Tensor& x, int C, int H, int W, int Ho, int Wo, int stride, int pad,
                   Tensor& cols) {
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      double* row = cols.ptr() + (static_cast<size_t>(oy) * Wo + ox) * (C * 9);
      for (int c = 0; c < C; ++c) {
        const double* xc = x.ptr() + static_cast<size_t>(c) * H * W;
        for (int ky = 0; ky < 3; ++ky) {
          int iy = oy * stride - pad + ky;
          for (int kx = 0; kx < 3; ++kx) {
            int ix = ox * stride - pad + kx;
            double val = 0.0;
            if (iy >= 0 && iy < H && ix >= 0 && ix < W)
              val = xc[static_cast<size_t>(iy) * W + ix];
            row[c * 9 + ky * 3 + kx] = val;
          }
        }
      }
    }
  }
}

int conv2d(Tape& t, int x, int w_id, int b_id, int stride, int pad) {
  const Tensor& X = t.val(x);
  const Tensor& W = t.val(w_id);
  const Tensor& b = t.val(b_id);
  if (X.rank() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W]");
  int C = X.dim(0), H = X.dim(1), Wd = X.dim(2);
  if (W.rank() != 2 || W.cols() != C * 9)
    throw std::invalid_argument("conv2d: weight must be [F, C*9], got " + W.shape_str());
  int F = W.rows();
  if (b.rank() != 1 || b.dim(0) != F) throw std::invalid_argument("conv2d: bias must be [F]");
  int Ho = (H + 2 * pad - 3) / stride + 1;
  int Wo = (Wd + 2 * pad - 3) / stride + 1;
  if (Ho < 1 || Wo < 1) throw std::invalid_argument("conv2d: output collapses to zero size");

  Tensor cols({Ho * Wo, C * 9});
  im2col(X, C, H, Wd, Ho, Wo, stride, pad, cols);
  Tensor outm({Ho * Wo, F});
  as_mat(outm, Ho * Wo, F).noalias() =
      as_mat(cols, Ho * Wo, C * 9) * as_mat(W, F, C * 9).transpose();

  Tensor v({F, Ho, Wo});
  for (int f = 0; f < F; ++f) {
    double bf = b.at(f);
    double* of = v.ptr() + static_cast<size_t>(f) * Ho * Wo;
    for (int p = 0; p < Ho * Wo; ++p) of[p] = outm.at(p, f) + bf;
  }

  bool ng = t.needs_grad(x) || t.needs_grad(w_id) || t.needs_grad(b_id);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng,
                [x, w_id, b_id, id, C, H, Wd, F, Ho, Wo, stride, pad](Tape& t) {
    const Tensor& g = t.grad(id);
    Tensor gm({Ho * Wo, F});
    for (int f = 0; f < F; ++f) {
      const double* gf = g.ptr() + static_cast<size_t>(f) * Ho * Wo;
      for (int p = 0; p < Ho * Wo; ++p) gm.at(p, f) = gf[p];
    }
    if (t.needs_grad(b_id)) {
      Tensor& gb = t.grad(b_id);
      for (int f = 0; f < F; ++f) {
        double s = 0;
        const double* gf = g.ptr() + static_cast<size_t>(f) * Ho * Wo;
        for (int p = 0; p < Ho * Wo; ++p) s += gf[p];
        gb.at(f) += s;
      }
    }
    if (t.needs_grad(w_id)) {
      Tensor cols({Ho * Wo, C * 9});
      im2col(t.val(x), C, H, Wd, Ho, Wo, stride, pad, cols);
      as_mat(t.grad(w_id), F, C * 9).noalias() +=
          as_mat(gm, Ho * Wo, F).transpose() * as_mat(cols, Ho * Wo, C * 9);
    }
    if (t.needs_grad(x)) {
      Tensor dcols({Ho * Wo, C * 9});
      as_mat(dcols, Ho * Wo, C * 9).noalias() =
          as_mat(gm, Ho * Wo, F) * as_mat(t.val(w_id), F, C * 9);
      Tensor& gx = t.grad(x);
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          const double* row = dcols.ptr() + (static_cast<size_t>(oy) * Wo + ox) * (C * 9);
          for (int c = 0; c < C; ++c) {
            double* gxc = gx.ptr() + static_cast<size_t>(c) * H * Wd;
            for (int ky = 0; ky < 3; ++ky) {
              int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < 3; ++kx) {
                int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= Wd) continue;
                gxc[static_cast<size_t>(iy) * Wd + ix] += row[c * 9 + ky * 3 + kx];
              }
            }
          }
        }
      }
    }
  });
}

int global_avg_pool(Tape& t, int x) {
  const Tensor& X = t.val(x);
  if (X.rank() != 3) throw std::invalid_argument("global_avg_pool: input must be [C,H,W]");
  int C = X.dim(0), H = X.dim(1), W = X.dim(2);
  Tensor v({1, C});
  double inv = 1.0 / (static_cast<double>(H) * W);
  for (int c = 0; c < C; ++c) {
    double s = 0;
    const double* xc = X.ptr() + static_cast<size_t>(c) * H * W;
    for (int p = 0; p < H * W; ++p) s += xc[p];
    v.at(0, c) = s * inv;
  }
  bool ng = t.needs_grad(x);
  int id = static_cast<int>(t.size());
  return t.push(std::move(v), ng, [x, id, C, H, W, inv](Tape& t) {
    if (!t.needs_grad(x)) return;
    const Tensor& g = t.grad(id);
    Tensor& gx = t.grad(x);
    for (int c = 0; c < C; ++c) {
      double gc = g.at(0, c) * inv;
      double* gxc = gx.ptr() + static_cast<size_t>(c) * H * W;
      for (int p = 0; p < H * W; ++p) gxc[p] += gc;
    }
  });
}

}  // namespace ops

}  // namespace mmpoint
