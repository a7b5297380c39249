#ifndef GLOP_AUTODIFF_HPP
#define GLOP_AUTODIFF_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace glop {

// Dense row-major matrix of doubles. Everything the toy-scale neural
// components need; no BLAS, sizes stay small.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
  std::size_t size() const { return a.size(); }

  static Mat zeros_like(const Mat& m) { return Mat(m.rows, m.cols); }
};

// Reverse-mode tape over Mat-valued nodes. Build a graph with the op
// functions below, call backward(loss) with a 1x1 loss node, then read
// gradients via grad(). Leaves may carry names so parameter gradients can
// be collected by name after backward.
class Tape {
 public:
  struct Node {
    Mat val;
    Mat grad;
    std::string name;                       // nonempty for named leaves
    std::function<void(Tape&, int)> back;   // accumulates into parents
  };

  int leaf(Mat value, std::string name = {}) {
    nodes_.push_back({std::move(value), {}, std::move(name), nullptr});
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Mat& val(int id) const { return nodes_[id].val; }
  Mat& grad(int id) { return nodes_[id].grad; }

  int push(Mat value, std::function<void(Tape&, int)> back) {
    nodes_.push_back({std::move(value), {}, {}, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  void accumulate(int id, const Mat& g) {
    Mat& dst = nodes_[id].grad;
    if (dst.rows == 0) dst = Mat(nodes_[id].val.rows, nodes_[id].val.cols);
    for (std::size_t k = 0; k < g.a.size(); ++k) dst.a[k] += g.a[k];
  }

  // Runs backpropagation from a scalar node.
  void backward(int loss) {
    const Mat& l = nodes_[loss].val;
    if (l.rows != 1 || l.cols != 1) throw std::logic_error("backward: loss must be 1x1");
    for (auto& n : nodes_) n.grad = Mat();
    nodes_[loss].grad = Mat(1, 1, 1.0);
    for (int id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.back && n.grad.rows != 0) n.back(*this, id);
    }
  }

  // Gradients of all named leaves, keyed by name (zero matrices for leaves
  // the loss never touched).
  std::map<std::string, Mat> named_grads() const {
    std::map<std::string, Mat> out;
    for (const auto& n : nodes_)
      if (!n.name.empty())
        out[n.name] = n.grad.rows ? n.grad : Mat(n.val.rows, n.val.cols);
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

namespace ad {

inline void check_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols) throw std::logic_error(std::string(op) + ": shape mismatch");
}

// C = A * B, with optional transposes.
inline int matmul(Tape& t, int a, int b, bool ta = false, bool tb = false) {
  const Mat& A = t.val(a);
  const Mat& B = t.val(b);
  int ar = ta ? A.cols : A.rows, ac = ta ? A.rows : A.cols;
  int br = tb ? B.cols : B.rows, bc = tb ? B.rows : B.cols;
  if (ac != br) throw std::logic_error("matmul: inner dim mismatch");
  Mat C(ar, bc);
  for (int i = 0; i < ar; ++i)
    for (int k = 0; k < ac; ++k) {
      double av = ta ? A(k, i) : A(i, k);
      if (av == 0.0) continue;
      for (int j = 0; j < bc; ++j) C(i, j) += av * (tb ? B(j, k) : B(k, j));
    }
  return t.push(std::move(C), [a, b, ta, tb](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    const Mat& A = tp.val(a);
    const Mat& B = tp.val(b);
    // dA = G * B^T (adjusted for transposes), dB = A^T * G
    Mat dA(A.rows, A.cols), dB(B.rows, B.cols);
    int ar = ta ? A.cols : A.rows, ac = ta ? A.rows : A.cols, bc = tb ? B.rows : B.cols;
    for (int i = 0; i < ar; ++i)
      for (int k = 0; k < ac; ++k) {
        double acc = 0.0;
        for (int j = 0; j < bc; ++j) acc += G(i, j) * (tb ? B(j, k) : B(k, j));
        if (ta) dA(k, i) += acc; else dA(i, k) += acc;
      }
    for (int k = 0; k < ac; ++k)
      for (int j = 0; j < bc; ++j) {
        double acc = 0.0;
        for (int i = 0; i < ar; ++i) acc += (ta ? A(k, i) : A(i, k)) * G(i, j);
        if (tb) dB(j, k) += acc; else dB(k, j) += acc;
      }
    tp.accumulate(a, dA);
    tp.accumulate(b, dB);
  });
}

inline int add(Tape& t, int a, int b) {
  const Mat& A = t.val(a);
  const Mat& B = t.val(b);
  check_same_shape(A, B, "add");
  Mat C = A;
  for (std::size_t k = 0; k < C.a.size(); ++k) C.a[k] += B.a[k];
  return t.push(std::move(C), [a, b](Tape& tp, int self) {
    tp.accumulate(a, tp.grad(self));
    tp.accumulate(b, tp.grad(self));
  });
}

inline int sub(Tape& t, int a, int b) {
  const Mat& A = t.val(a);
  const Mat& B = t.val(b);
  check_same_shape(A, B, "sub");
  Mat C = A;
  for (std::size_t k = 0; k < C.a.size(); ++k) C.a[k] -= B.a[k];
  return t.push(std::move(C), [a, b](Tape& tp, int self) {
    tp.accumulate(a, tp.grad(self));
    Mat g = tp.grad(self);
    for (double& v : g.a) v = -v;
    tp.accumulate(b, g);
  });
}

inline int scale(Tape& t, int a, double c) {
  Mat C = t.val(a);
  for (double& v : C.a) v *= c;
  return t.push(std::move(C), [a, c](Tape& tp, int self) {
    Mat g = tp.grad(self);
    for (double& v : g.a) v *= c;
    tp.accumulate(a, g);
  });
}

inline int add_const(Tape& t, int a, double c) {
  Mat C = t.val(a);
  for (double& v : C.a) v += c;
  return t.push(std::move(C), [a](Tape& tp, int self) { tp.accumulate(a, tp.grad(self)); });
}

// Adds a 1 x c row vector to every row.
inline int add_rowvec(Tape& t, int a, int r) {
  const Mat& A = t.val(a);
  const Mat& R = t.val(r);
  if (R.rows != 1 || R.cols != A.cols) throw std::logic_error("add_rowvec: shape mismatch");
  Mat C = A;
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) C(i, j) += R(0, j);
  return t.push(std::move(C), [a, r](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    tp.accumulate(a, G);
    Mat gr(1, G.cols);
    for (int i = 0; i < G.rows; ++i)
      for (int j = 0; j < G.cols; ++j) gr(0, j) += G(i, j);
    tp.accumulate(r, gr);
  });
}

inline int mul_elem(Tape& t, int a, int b) {
  const Mat& A = t.val(a);
  const Mat& B = t.val(b);
  check_same_shape(A, B, "mul_elem");
  Mat C = A;
  for (std::size_t k = 0; k < C.a.size(); ++k) C.a[k] *= B.a[k];
  return t.push(std::move(C), [a, b](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    Mat da = G, db = G;
    const Mat& A = tp.val(a);
    const Mat& B = tp.val(b);
    for (std::size_t k = 0; k < G.a.size(); ++k) { da.a[k] *= B.a[k]; db.a[k] *= A.a[k]; }
    tp.accumulate(a, da);
    tp.accumulate(b, db);
  });
}

inline int relu(Tape& t, int a) {
  Mat C = t.val(a);
  for (double& v : C.a) v = v > 0.0 ? v : 0.0;
  return t.push(std::move(C), [a](Tape& tp, int self) {
    Mat g = tp.grad(self);
    const Mat& A = tp.val(a);
    for (std::size_t k = 0; k < g.a.size(); ++k)
      if (A.a[k] <= 0.0) g.a[k] = 0.0;
    tp.accumulate(a, g);
  });
}

inline int tanh_op(Tape& t, int a) {
  Mat C = t.val(a);
  for (double& v : C.a) v = std::tanh(v);
  return t.push(std::move(C), [a](Tape& tp, int self) {
    Mat g = tp.grad(self);
    const Mat& Y = tp.val(self);
    for (std::size_t k = 0; k < g.a.size(); ++k) g.a[k] *= 1.0 - Y.a[k] * Y.a[k];
    tp.accumulate(a, g);
  });
}

inline int sigmoid(Tape& t, int a) {
  Mat C = t.val(a);
  for (double& v : C.a) v = 1.0 / (1.0 + std::exp(-v));
  return t.push(std::move(C), [a](Tape& tp, int self) {
    Mat g = tp.grad(self);
    const Mat& Y = tp.val(self);
    for (std::size_t k = 0; k < g.a.size(); ++k) g.a[k] *= Y.a[k] * (1.0 - Y.a[k]);
    tp.accumulate(a, g);
  });
}

inline int exp_op(Tape& t, int a) {
  Mat C = t.val(a);
  for (double& v : C.a) v = std::exp(v);
  return t.push(std::move(C), [a](Tape& tp, int self) {
    Mat g = tp.grad(self);
    const Mat& Y = tp.val(self);
    for (std::size_t k = 0; k < g.a.size(); ++k) g.a[k] *= Y.a[k];
    tp.accumulate(a, g);
  });
}

inline int log_op(Tape& t, int a) {
  Mat C = t.val(a);
  for (double& v : C.a) v = std::log(v);
  return t.push(std::move(C), [a](Tape& tp, int self) {
    Mat g = tp.grad(self);
    const Mat& A = tp.val(a);
    for (std::size_t k = 0; k < g.a.size(); ++k) g.a[k] /= A.a[k];
    tp.accumulate(a, g);
  });
}

// 1 x cols mean over rows.
inline int mean_rows(Tape& t, int a) {
  const Mat& A = t.val(a);
  Mat C(1, A.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) C(0, j) += A(i, j);
  for (double& v : C.a) v /= A.rows;
  return t.push(std::move(C), [a](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    const Mat& A = tp.val(a);
    Mat g(A.rows, A.cols);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) g(i, j) = G(0, j) / A.rows;
    tp.accumulate(a, g);
  });
}

// 1 x 1 sum of all entries.
inline int sum_all(Tape& t, int a) {
  const Mat& A = t.val(a);
  double s = 0.0;
  for (double v : A.a) s += v;
  return t.push(Mat(1, 1, s), [a](Tape& tp, int self) {
    const Mat& A = tp.val(a);
    Mat g(A.rows, A.cols, tp.grad(self)(0, 0));
    tp.accumulate(a, g);
  });
}

// Horizontal concatenation of row-compatible blocks.
inline int concat_cols(Tape& t, const std::vector<int>& parts) {
  int rows = t.val(parts[0]).rows, cols = 0;
  for (int p : parts) {
    if (t.val(p).rows != rows) throw std::logic_error("concat_cols: row mismatch");
    cols += t.val(p).cols;
  }
  Mat C(rows, cols);
  int off = 0;
  for (int p : parts) {
    const Mat& P = t.val(p);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < P.cols; ++j) C(i, off + j) = P(i, j);
    off += P.cols;
  }
  return t.push(std::move(C), [parts](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    int off = 0;
    for (int p : parts) {
      const Mat& P = tp.val(p);
      Mat g(P.rows, P.cols);
      for (int i = 0; i < P.rows; ++i)
        for (int j = 0; j < P.cols; ++j) g(i, j) = G(i, off + j);
      tp.accumulate(p, g);
      off += P.cols;
    }
  });
}

// Selects rows by index; backward scatter-adds.
inline int gather_rows(Tape& t, int a, std::vector<int> idx) {
  const Mat& A = t.val(a);
  Mat C(static_cast<int>(idx.size()), A.cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < A.cols; ++j) C(static_cast<int>(i), j) = A(idx[i], j);
  return t.push(std::move(C), [a, idx](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    const Mat& A = tp.val(a);
    Mat g(A.rows, A.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < A.cols; ++j) g(idx[i], j) += G(static_cast<int>(i), j);
    tp.accumulate(a, g);
  });
}

// Sums rows of A into `n` buckets given one bucket id per row.
inline int scatter_sum_rows(Tape& t, int a, std::vector<int> bucket, int n) {
  const Mat& A = t.val(a);
  if (static_cast<int>(bucket.size()) != A.rows) throw std::logic_error("scatter_sum_rows: index size");
  Mat C(n, A.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) C(bucket[i], j) += A(i, j);
  return t.push(std::move(C), [a, bucket](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    const Mat& A = tp.val(a);
    Mat g(A.rows, A.cols);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) g(i, j) = G(bucket[i], j);
    tp.accumulate(a, g);
  });
}

// Dense rows x cols matrix filled with the constant `base`, with the m x 1
// column `values` written at the given (row, col) positions. Positions must
// be distinct; the base carries no gradient.
inline int scatter_entries(Tape& t, int values, std::vector<std::pair<int, int>> pos, int rows,
                           int cols, double base) {
  const Mat& V = t.val(values);
  if (V.cols != 1 || static_cast<int>(pos.size()) != V.rows)
    throw std::logic_error("scatter_entries: values must be m x 1 matching positions");
  Mat C(rows, cols, base);
  for (std::size_t i = 0; i < pos.size(); ++i) C(pos[i].first, pos[i].second) = V(static_cast<int>(i), 0);
  return t.push(std::move(C), [values, pos](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    Mat g(static_cast<int>(pos.size()), 1);
    for (std::size_t i = 0; i < pos.size(); ++i)
      g(static_cast<int>(i), 0) = G(pos[i].first, pos[i].second);
    tp.accumulate(values, g);
  });
}

// Row-wise layer normalization with learned gain/bias (1 x c each).
inline int layer_norm(Tape& t, int a, int gamma, int beta, double eps = 1e-8) {
  const Mat& A = t.val(a);
  const Mat& Gm = t.val(gamma);
  const Mat& Bt = t.val(beta);
  if (Gm.cols != A.cols || Bt.cols != A.cols) throw std::logic_error("layer_norm: shape");
  Mat C(A.rows, A.cols);
  for (int i = 0; i < A.rows; ++i) {
    double mu = 0.0;
    for (int j = 0; j < A.cols; ++j) mu += A(i, j);
    mu /= A.cols;
    double var = 0.0;
    for (int j = 0; j < A.cols; ++j) var += (A(i, j) - mu) * (A(i, j) - mu);
    var /= A.cols;
    double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < A.cols; ++j) C(i, j) = Gm(0, j) * (A(i, j) - mu) * inv + Bt(0, j);
  }
  return t.push(std::move(C), [a, gamma, beta, eps](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    const Mat& A = tp.val(a);
    const Mat& Gm = tp.val(gamma);
    const int c = A.cols;
    Mat da(A.rows, c), dg(1, c), db(1, c);
    for (int i = 0; i < A.rows; ++i) {
      double mu = 0.0;
      for (int j = 0; j < c; ++j) mu += A(i, j);
      mu /= c;
      double var = 0.0;
      for (int j = 0; j < c; ++j) var += (A(i, j) - mu) * (A(i, j) - mu);
      var /= c;
      double inv = 1.0 / std::sqrt(var + eps);
      // xhat_j = (x_j - mu) * inv
      double sum_gy = 0.0, sum_gyx = 0.0;
      for (int j = 0; j < c; ++j) {
        double xhat = (A(i, j) - mu) * inv;
        double gy = G(i, j) * Gm(0, j);
        sum_gy += gy;
        sum_gyx += gy * xhat;
        dg(0, j) += G(i, j) * xhat;
        db(0, j) += G(i, j);
      }
      for (int j = 0; j < c; ++j) {
        double xhat = (A(i, j) - mu) * inv;
        double gy = G(i, j) * Gm(0, j);
        da(i, j) = inv * (gy - sum_gy / c - xhat * sum_gyx / c);
      }
    }
    tp.accumulate(a, da);
    tp.accumulate(gamma, dg);
    tp.accumulate(beta, db);
  });
}

// Row-wise softmax over unmasked entries; masked entries get probability 0
// and receive no gradient. mask[i*cols+j] != 0 means "allowed".
inline int masked_softmax_rows(Tape& t, int a, std::vector<char> mask) {
  const Mat& A = t.val(a);
  if (static_cast<int>(mask.size()) != A.rows * A.cols)
    throw std::logic_error("masked_softmax_rows: mask size");
  Mat C(A.rows, A.cols);
  for (int i = 0; i < A.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < A.cols; ++j)
      if (mask[static_cast<std::size_t>(i) * A.cols + j]) mx = std::max(mx, A(i, j));
    if (mx == -std::numeric_limits<double>::infinity())
      throw std::logic_error("masked_softmax_rows: fully masked row");
    double z = 0.0;
    for (int j = 0; j < A.cols; ++j)
      if (mask[static_cast<std::size_t>(i) * A.cols + j]) z += std::exp(A(i, j) - mx);
    for (int j = 0; j < A.cols; ++j)
      C(i, j) = mask[static_cast<std::size_t>(i) * A.cols + j] ? std::exp(A(i, j) - mx) / z : 0.0;
  }
  return t.push(std::move(C), [a](Tape& tp, int self) {
    const Mat& G = tp.grad(self);
    const Mat& P = tp.val(self);
    Mat g(P.rows, P.cols);
    for (int i = 0; i < P.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < P.cols; ++j) dot += G(i, j) * P(i, j);
      for (int j = 0; j < P.cols; ++j) g(i, j) = P(i, j) * (G(i, j) - dot);
    }
    tp.accumulate(a, g);
  });
}

// log p(pick) for a 1 x n logits row under a mask (log-softmax + gather).
inline int masked_log_prob(Tape& t, int logits, const std::vector<char>& mask, int pick) {
  const Mat& A = t.val(logits);
  if (A.rows != 1) throw std::logic_error("masked_log_prob: logits must be a row");
  if (!mask[pick]) throw std::logic_error("masked_log_prob: picked a masked action");
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < A.cols; ++j)
    if (mask[j]) mx = std::max(mx, A(0, j));
  double z = 0.0;
  for (int j = 0; j < A.cols; ++j)
    if (mask[j]) z += std::exp(A(0, j) - mx);
  double lp = A(0, pick) - mx - std::log(z);
  std::vector<char> m = mask;
  return t.push(Mat(1, 1, lp), [logits, m, pick](Tape& tp, int self) {
    double g = tp.grad(self)(0, 0);
    const Mat& A = tp.val(logits);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < A.cols; ++j)
      if (m[j]) mx = std::max(mx, A(0, j));
    double z = 0.0;
    for (int j = 0; j < A.cols; ++j)
      if (m[j]) z += std::exp(A(0, j) - mx);
    Mat da(1, A.cols);
    for (int j = 0; j < A.cols; ++j)
      if (m[j]) da(0, j) = g * ((j == pick ? 1.0 : 0.0) - std::exp(A(0, j) - mx) / z);
    tp.accumulate(logits, da);
  });
}

}  // namespace ad

// --- parameters and optimizer ----------------------------------------------

struct ParamStore {
  std::map<std::string, Mat> params;

  Mat& at(const std::string& name) { return params.at(name); }
  const Mat& at(const std::string& name) const { return params.at(name); }

  // Flat L2 norm over every weight, for gradient clipping diagnostics.
  static double l2_norm(const std::map<std::string, Mat>& grads) {
    double s = 0.0;
    for (const auto& [k, g] : grads)
      for (double v : g.a) s += v * v;
    return std::sqrt(s);
  }
};

// Adam with optional global-norm gradient clipping.
class Adam {
 public:
  explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step(ParamStore& store, const std::map<std::string, Mat>& grads, double clip_norm = 0.0) {
    ++t_;
    double scale = 1.0;
    if (clip_norm > 0.0) {
      double norm = ParamStore::l2_norm(grads);
      if (norm > clip_norm) scale = clip_norm / norm;
    }
    for (auto& [name, p] : store.params) {
      auto it = grads.find(name);
      if (it == grads.end()) continue;
      const Mat& g = it->second;
      Mat& m = m_[name];
      Mat& v = v_[name];
      if (m.rows == 0) { m = Mat::zeros_like(p); v = Mat::zeros_like(p); }
      double bc1 = 1.0 - std::pow(beta1_, t_);
      double bc2 = 1.0 - std::pow(beta2_, t_);
      for (std::size_t k = 0; k < p.a.size(); ++k) {
        double gk = g.a[k] * scale;
        m.a[k] = beta1_ * m.a[k] + (1.0 - beta1_) * gk;
        v.a[k] = beta2_ * v.a[k] + (1.0 - beta2_) * gk * gk;
        p.a[k] -= lr_ * (m.a[k] / bc1) / (std::sqrt(v.a[k] / bc2) + eps_);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::map<std::string, Mat> m_, v_;
};

}  // namespace glop

#endif  // GLOP_AUTODIFF_HPP
