#include "ifdl/autograd.hpp"

#include <cmath>
#include <unordered_set>

namespace ifdl::ag {

Var cross_entropy_rows(const Var& logits, const std::vector<long>& targets,
                       const std::vector<double>& weights_in) {
  const long T = logits->rows();
  const std::vector<double> row_weights =
      weights_in.empty() ? std::vector<double>(T, 1.0) : weights_in;
  if (static_cast<long>(targets.size()) != T ||
      static_cast<long>(row_weights.size()) != T)
    throw std::invalid_argument("cross_entropy_rows: row count mismatch");
  double wsum = 0.0;
  for (long i = 0; i < T; ++i) {
    if (row_weights[i] == 0.0) continue;
    if (targets[i] < 0 || targets[i] >= logits->cols())
      throw std::out_of_range("cross_entropy_rows: target out of range");
    wsum += row_weights[i];
  }
  if (wsum == 0.0)
    throw std::invalid_argument(
        "cross_entropy_rows: no rows carry weight (all padding?)");
  double total = 0.0;
  for (long i = 0; i < T; ++i) {
    if (row_weights[i] == 0.0) continue;
    Eigen::RowVectorXd r = logits->value.row(i);
    double m = r.maxCoeff();
    double lse = m + std::log((r.array() - m).exp().sum());
    total += row_weights[i] * (lse - r(targets[i]));
  }
  Mat out = Mat::Constant(1, 1, total / wsum);
  return detail::make_op(
      std::move(out), {logits},
      [targets, row_weights, wsum](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        const double g = n.grad(0, 0);
        for (long i = 0; i < n.parents[0]->rows(); ++i) {
          if (row_weights[i] == 0.0) continue;
          Eigen::RowVectorXd r = n.parents[0]->value.row(i);
          double m = r.maxCoeff();
          Eigen::RowVectorXd e = (r.array() - m).exp();
          Eigen::RowVectorXd p = e / e.sum();
          p(targets[i]) -= 1.0;
          n.parents[0]->grad.row(i) += g * (row_weights[i] / wsum) * p;
        }
      });
}

void backward(const Var& root) {
  if (root->value.size() != 1)
    throw std::invalid_argument("backward: root must be a scalar");

  // Topological order over the reachable subgraph.
  std::vector<Node*> order;
  std::vector<Var> keepalive;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Var, size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Var p = node->parents[next++];
      if (p->requires_grad && seen.insert(p.get()).second)
        stack.emplace_back(std::move(p), 0);
    } else {
      order.push_back(node.get());
      keepalive.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad = Mat::Zero(n->rows(), n->cols());
  root->grad(0, 0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace ifdl::ag
