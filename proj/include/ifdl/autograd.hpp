#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

// Reverse-mode autodiff over dense double matrices. Every value is a 2-D
// Eigen matrix; scalars are 1x1. Graphs are built eagerly and freed when the
// last Var handle drops.
namespace ifdl::ag {

using Mat = Eigen::MatrixXd;

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Mat value;
  Mat grad;            // same shape as value, allocated lazily by backward()
  bool requires_grad = false;
  std::vector<Var> parents;
  // Propagates this->grad into the parents' grad buffers.
  std::function<void(Node&)> backprop;

  long rows() const { return value.rows(); }
  long cols() const { return value.cols(); }
};

inline Var constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return n;
}

inline Var leaf(Mat v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  return n;
}

inline Var scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

namespace detail {

inline Var make_op(Mat value, std::vector<Var> parents,
                   std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) n->backprop = std::move(backprop);
  return n;
}

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a->rows() != b->rows() || a->cols() != b->cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a->rows()) + "x" +
                                std::to_string(a->cols()) + " vs " +
                                std::to_string(b->rows()) + "x" +
                                std::to_string(b->cols()) + ")");
}

}  // namespace detail

// ---- arithmetic ----

inline Var add(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "add");
  return detail::make_op(a->value + b->value, {a, b}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->grad += n.grad;
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::check_same_shape(a, b, "sub");
  return detail::make_op(a->value - b->value, {a, b}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->grad -= n.grad;
  });
}

inline Var mul(const Var& a, const Var& b) {  // Hadamard
  detail::check_same_shape(a, b, "mul");
  return detail::make_op(a->value.cwiseProduct(b->value), {a, b}, [](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad += n.grad.cwiseProduct(n.parents[1]->value);
    if (n.parents[1]->requires_grad)
      n.parents[1]->grad += n.grad.cwiseProduct(n.parents[0]->value);
  });
}

inline Var scale(const Var& a, double c) {
  return detail::make_op(a->value * c, {a}, [c](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad * c;
  });
}

// a * s where s is a 1x1 variable (used for the blend coefficient).
inline Var scale_by(const Var& a, const Var& s) {
  if (s->rows() != 1 || s->cols() != 1)
    throw std::invalid_argument("scale_by: scalar must be 1x1");
  return detail::make_op(a->value * s->value(0, 0), {a, s}, [](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad += n.grad * n.parents[1]->value(0, 0);
    if (n.parents[1]->requires_grad)
      n.parents[1]->grad(0, 0) +=
          (n.grad.cwiseProduct(n.parents[0]->value)).sum();
  });
}

inline Var add_scalar(const Var& a, double c) {
  return detail::make_op(a->value.array() + c, {a}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad;
  });
}

inline Var matmul(const Var& a, const Var& b) {
  if (a->cols() != b->rows())
    throw std::invalid_argument("matmul: inner dimensions differ");
  return detail::make_op(a->value * b->value, {a, b}, [](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad += n.grad * n.parents[1]->value.transpose();
    if (n.parents[1]->requires_grad)
      n.parents[1]->grad += n.parents[0]->value.transpose() * n.grad;
  });
}

inline Var transpose(const Var& a) {
  return detail::make_op(a->value.transpose(), {a}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad.transpose();
  });
}

// Adds a 1xC row vector to every row of an NxC matrix.
inline Var add_rowvec(const Var& a, const Var& row) {
  if (row->rows() != 1 || row->cols() != a->cols())
    throw std::invalid_argument("add_rowvec: incompatible shapes");
  Mat out = a->value;
  out.rowwise() += Eigen::RowVectorXd(row->value.row(0));
  return detail::make_op(std::move(out), {a, row}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad += n.grad;
    if (n.parents[1]->requires_grad)
      n.parents[1]->grad.row(0) += n.grad.colwise().sum();
  });
}

// ---- reductions ----

inline Var sum(const Var& a) {
  return detail::make_op(Mat::Constant(1, 1, a->value.sum()), {a}, [](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad.array() += n.grad(0, 0);
  });
}

inline Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->value.size());
  return detail::make_op(Mat::Constant(1, 1, a->value.mean()), {a},
                         [inv](Node& n) {
                           if (n.parents[0]->requires_grad)
                             n.parents[0]->grad.array() += n.grad(0, 0) * inv;
                         });
}

// Mean over rows: NxC -> 1xC.
inline Var mean_rows(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->rows());
  Mat out = a->value.colwise().mean();
  return detail::make_op(std::move(out), {a}, [inv](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad.rowwise() +=
          Eigen::RowVectorXd(n.grad.row(0)) * inv;
  });
}

// ---- elementwise nonlinearities ----

inline Var sigmoid(const Var& a) {
  Mat out = a->value.unaryExpr([](double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
  });
  return detail::make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    n.parents[0]->grad.array() +=
        n.grad.array() * n.value.array() * (1.0 - n.value.array());
  });
}

inline Var softplus(const Var& a) {
  Mat out = a->value.unaryExpr([](double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  });
  return detail::make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Mat sig = n.parents[0]->value.unaryExpr([](double z) {
      return z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                    : std::exp(z) / (1.0 + std::exp(z));
    });
    n.parents[0]->grad += n.grad.cwiseProduct(sig);
  });
}

inline Var gelu(const Var& a) {
  // tanh approximation of GELU.
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  Mat out = a->value.unaryExpr([](double x) {
    double inner = 0.7978845608028654 * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(inner));
  });
  (void)k;
  return detail::make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    Mat d = n.parents[0]->value.unaryExpr([](double x) {
      const double c = 0.7978845608028654;
      double u = c * (x + 0.044715 * x * x * x);
      double t = std::tanh(u);
      double du = c * (1.0 + 3.0 * 0.044715 * x * x);
      return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
    });
    n.parents[0]->grad += n.grad.cwiseProduct(d);
  });
}

// 1/x elementwise (used for scalar ratios).
inline Var reciprocal(const Var& a) {
  Mat out = a->value.cwiseInverse();
  return detail::make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    n.parents[0]->grad.array() -=
        n.grad.array() / n.parents[0]->value.array().square();
  });
}

inline Var div(const Var& a, const Var& b) { return mul(a, reciprocal(b)); }

// ---- row-wise softmax / layer norm ----

inline Var softmax_rows(const Var& a) {
  Mat out(a->rows(), a->cols());
  for (long i = 0; i < a->rows(); ++i) {
    Eigen::RowVectorXd r = a->value.row(i);
    double m = r.maxCoeff();
    Eigen::RowVectorXd e = (r.array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return detail::make_op(std::move(out), {a}, [](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    for (long i = 0; i < n.value.rows(); ++i) {
      Eigen::RowVectorXd s = n.value.row(i);
      Eigen::RowVectorXd g = n.grad.row(i);
      double dot = g.dot(s);
      n.parents[0]->grad.row(i) +=
          (s.array() * (g.array() - dot)).matrix();
    }
  });
}

// Per-row layer norm with learned gain/bias (1xC each).
inline Var layernorm_rows(const Var& a, const Var& gamma, const Var& beta,
                          double eps = 1e-5) {
  const long C = a->cols();
  if (gamma->cols() != C || beta->cols() != C)
    throw std::invalid_argument("layernorm_rows: gain/bias dim mismatch");
  Mat xhat(a->rows(), C);
  Eigen::VectorXd inv_std(a->rows());
  for (long i = 0; i < a->rows(); ++i) {
    double m = a->value.row(i).mean();
    double var = (a->value.row(i).array() - m).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    xhat.row(i) = (a->value.row(i).array() - m) * is;
  }
  Mat out = xhat;
  for (long i = 0; i < out.rows(); ++i)
    out.row(i) = out.row(i).cwiseProduct(gamma->value.row(0)) +
                 beta->value.row(0);
  auto xhat_p = std::make_shared<Mat>(std::move(xhat));
  auto inv_p = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
  return detail::make_op(
      std::move(out), {a, gamma, beta}, [xhat_p, inv_p](Node& n) {
        const long C = n.value.cols();
        for (long i = 0; i < n.value.rows(); ++i) {
          Eigen::RowVectorXd g = n.grad.row(i);
          Eigen::RowVectorXd xh = xhat_p->row(i);
          if (n.parents[1]->requires_grad)
            n.parents[1]->grad.row(0) += g.cwiseProduct(xh);
          if (n.parents[2]->requires_grad) n.parents[2]->grad.row(0) += g;
          if (n.parents[0]->requires_grad) {
            Eigen::RowVectorXd gy =
                g.cwiseProduct(n.parents[1]->value.row(0));
            double mean_gy = gy.mean();
            double mean_gyx = gy.cwiseProduct(xh).mean();
            n.parents[0]->grad.row(i) +=
                ((gy.array() - mean_gy - xh.array() * mean_gyx) *
                 (*inv_p)(i))
                    .matrix();
          }
          (void)C;
        }
      });
}

// ---- structural ops ----

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  long rows = 0;
  const long cols = parts[0]->cols();
  for (const auto& p : parts) {
    if (p->cols() != cols)
      throw std::invalid_argument("concat_rows: column mismatch");
    rows += p->rows();
  }
  Mat out(rows, cols);
  long r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p->rows()) = p->value;
    r += p->rows();
  }
  return detail::make_op(std::move(out), parts, [](Node& n) {
    long r = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) p->grad += n.grad.middleRows(r, p->rows());
      r += p->rows();
    }
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  long cols = 0;
  const long rows = parts[0]->rows();
  for (const auto& p : parts) {
    if (p->rows() != rows)
      throw std::invalid_argument("concat_cols: row mismatch");
    cols += p->cols();
  }
  Mat out(rows, cols);
  long c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p->cols()) = p->value;
    c += p->cols();
  }
  return detail::make_op(std::move(out), parts, [](Node& n) {
    long c = 0;
    for (auto& p : n.parents) {
      if (p->requires_grad) p->grad += n.grad.middleCols(c, p->cols());
      c += p->cols();
    }
  });
}

inline Var slice_rows(const Var& a, long start, long count) {
  if (start < 0 || start + count > a->rows())
    throw std::out_of_range("slice_rows: out of range");
  Mat out = a->value.middleRows(start, count);
  return detail::make_op(std::move(out), {a}, [start, count](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad.middleRows(start, count) += n.grad;
  });
}

inline Var slice_cols(const Var& a, long start, long count) {
  if (start < 0 || start + count > a->cols())
    throw std::out_of_range("slice_cols: out of range");
  Mat out = a->value.middleCols(start, count);
  return detail::make_op(std::move(out), {a}, [start, count](Node& n) {
    if (n.parents[0]->requires_grad)
      n.parents[0]->grad.middleCols(start, count) += n.grad;
  });
}

// Row gather (embedding lookup): out.row(i) = a.row(idx[i]).
inline Var gather_rows(const Var& a, std::vector<long> idx) {
  Mat out(static_cast<long>(idx.size()), a->cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a->rows())
      throw std::out_of_range("gather_rows: index out of range");
    out.row(static_cast<long>(i)) = a->value.row(idx[i]);
  }
  return detail::make_op(std::move(out), {a},
                         [idx = std::move(idx)](Node& n) {
                           if (!n.parents[0]->requires_grad) return;
                           for (size_t i = 0; i < idx.size(); ++i)
                             n.parents[0]->grad.row(idx[i]) +=
                                 n.grad.row(static_cast<long>(i));
                         });
}

// Treats an (h*w)xC matrix as an hxw grid of C-vectors in row-major order
// and packs each bxb block into one row: -> (h/b * w/b) x (b*b*C).
inline Var space_to_depth(const Var& a, long h, long w, long b) {
  if (a->rows() != h * w || h % b != 0 || w % b != 0)
    throw std::invalid_argument("space_to_depth: bad geometry");
  const long C = a->cols(), ho = h / b, wo = w / b;
  Mat out(ho * wo, b * b * C);
  for (long r = 0; r < ho; ++r)
    for (long c = 0; c < wo; ++c)
      for (long dr = 0; dr < b; ++dr)
        for (long dc = 0; dc < b; ++dc)
          out.block(r * wo + c, (dr * b + dc) * C, 1, C) =
              a->value.row((r * b + dr) * w + (c * b + dc));
  return detail::make_op(std::move(out), {a}, [h, w, b, C](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    const long ho = h / b, wo = w / b;
    for (long r = 0; r < ho; ++r)
      for (long c = 0; c < wo; ++c)
        for (long dr = 0; dr < b; ++dr)
          for (long dc = 0; dc < b; ++dc)
            n.parents[0]->grad.row((r * b + dr) * w + (c * b + dc)) +=
                n.grad.block(r * wo + c, (dr * b + dc) * C, 1, C);
  });
}

// Inverse of space_to_depth: (h*w) x (b*b*C) -> (h*b * w*b) x C.
inline Var depth_to_space(const Var& a, long h, long w, long b) {
  if (a->rows() != h * w || a->cols() % (b * b) != 0)
    throw std::invalid_argument("depth_to_space: bad geometry");
  const long C = a->cols() / (b * b);
  Mat out(h * b * w * b, C);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c)
      for (long dr = 0; dr < b; ++dr)
        for (long dc = 0; dc < b; ++dc)
          out.row((r * b + dr) * (w * b) + (c * b + dc)) =
              a->value.block(r * w + c, (dr * b + dc) * C, 1, C);
  return detail::make_op(std::move(out), {a}, [h, w, b, C](Node& n) {
    if (!n.parents[0]->requires_grad) return;
    for (long r = 0; r < h; ++r)
      for (long c = 0; c < w; ++c)
        for (long dr = 0; dr < b; ++dr)
          for (long dc = 0; dc < b; ++dc)
            n.parents[0]->grad.block(r * w + c, (dr * b + dc) * C, 1, C) +=
                n.grad.row((r * b + dr) * (w * b) + (c * b + dc));
  });
}

// ---- fused losses ----

// Mean cross entropy over rows of a logit matrix, one target per row.
// Rows whose weight is 0 are excluded from both sum and count.
Var cross_entropy_rows(const Var& logits, const std::vector<long>& targets,
                       const std::vector<double>& row_weights = {});

// ---- backward ----

void backward(const Var& root);

// Convenience: affine map y = x * W + b with b a 1xC row.
inline Var affine(const Var& x, const Var& w, const Var& b) {
  return add_rowvec(matmul(x, w), b);
}

}  // namespace ifdl::ag
