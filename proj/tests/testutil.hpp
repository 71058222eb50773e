#pragma once

#include <functional>
#include <random>

#include "ifdl/autograd.hpp"

namespace testutil {

using ifdl::ag::Mat;
using ifdl::ag::Var;

inline Mat random_mat(long rows, long cols, std::mt19937_64& rng,
                      double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Mat m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = d(rng);
  return m;
}

// Central finite differences of a scalar function of one leaf tensor,
// compared against the tape gradient at `probes` random coordinates.
// Returns the worst relative error.
inline double grad_check(const Var& leaf, const std::function<double()>& eval,
                         const std::function<void()>& backprop,
                         std::mt19937_64& rng, int probes = 20,
                         double eps = 1e-6) {
  backprop();
  Mat analytic = leaf->grad;
  // Floor the relative-error denominator at a fraction of the largest
  // gradient entry in the tensor, so near-zero entries are judged on the
  // tensor's scale instead of amplifying finite-difference noise.
  double scale = 1e-3 * analytic.cwiseAbs().maxCoeff();

  std::uniform_int_distribution<long> ri(0, leaf->value.rows() - 1);
  std::uniform_int_distribution<long> ci(0, leaf->value.cols() - 1);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    long i = ri(rng), j = ci(rng);
    double keep = leaf->value(i, j);
    leaf->value(i, j) = keep + eps;
    double up = eval();
    leaf->value(i, j) = keep - eps;
    double down = eval();
    leaf->value(i, j) = keep;
    double fd = (up - down) / (2 * eps);
    double denom =
        std::max({std::abs(fd), std::abs(analytic(i, j)), scale, 1e-8});
    worst = std::max(worst, std::abs(fd - analytic(i, j)) / denom);
  }
  return worst;
}

}  // namespace testutil
