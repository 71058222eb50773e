#include "doctest.h"

#include "ifdl/autograd.hpp"
#include "testutil.hpp"

using namespace ifdl;
using testutil::grad_check;
using testutil::random_mat;

TEST_CASE("elementwise ops forward values") {
  ag::Var a = ag::constant((ag::Mat(2, 2) << 1, 2, 3, 4).finished());
  ag::Var b = ag::constant((ag::Mat(2, 2) << 5, 6, 7, 8).finished());
  CHECK(ag::add(a, b)->value(1, 1) == 12.0);
  CHECK(ag::sub(a, b)->value(0, 0) == -4.0);
  CHECK(ag::mul(a, b)->value(1, 0) == 21.0);
  CHECK(ag::scale(a, 0.5)->value(0, 1) == 1.0);
  CHECK(ag::add_scalar(a, 10.0)->value(0, 0) == 11.0);
  CHECK(ag::sum(a)->value(0, 0) == 10.0);
  CHECK(ag::mean(a)->value(0, 0) == 2.5);
}

TEST_CASE("matmul matches the dense oracle") {
  std::mt19937_64 rng(1);
  ag::Mat A = random_mat(3, 4, rng), B = random_mat(4, 5, rng);
  ag::Var c = ag::matmul(ag::constant(A), ag::constant(B));
  ag::Mat oracle = ag::Mat::Zero(3, 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j)
      for (int k = 0; k < 4; ++k) oracle(i, j) += A(i, k) * B(k, j);
  CHECK((c->value - oracle).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("shape mismatches are rejected") {
  ag::Var a = ag::constant(ag::Mat::Zero(2, 3));
  ag::Var b = ag::constant(ag::Mat::Zero(3, 2));
  CHECK_THROWS_AS(ag::add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(ag::mul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(ag::matmul(a, a), std::invalid_argument);
}

TEST_CASE("softmax rows sum to one and match exp normalization") {
  std::mt19937_64 rng(2);
  ag::Var x = ag::constant(random_mat(4, 6, rng, 3.0));
  ag::Var s = ag::softmax_rows(x);
  for (int i = 0; i < 4; ++i) {
    CHECK(s->value.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    double denom = x->value.row(i).array().exp().sum();
    for (int j = 0; j < 6; ++j)
      CHECK(s->value(i, j) ==
            doctest::Approx(std::exp(x->value(i, j)) / denom).epsilon(1e-12));
  }
}

TEST_CASE("space_to_depth / depth_to_space round trip") {
  std::mt19937_64 rng(3);
  // 8x8 spatial grid with 3 channels, rows = pixels, cols = channels
  ag::Mat x = random_mat(64, 3, rng);
  ag::Var packed = ag::space_to_depth(ag::constant(x), 8, 8, 4);
  CHECK(packed->rows() == 4);   // (8/4)*(8/4)
  CHECK(packed->cols() == 48);  // 3*16
  ag::Var back = ag::depth_to_space(packed, 2, 2, 4);
  CHECK((back->value - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gather and slice pull the right rows") {
  ag::Mat x(4, 2);
  x << 0, 1, 2, 3, 4, 5, 6, 7;
  ag::Var g = ag::gather_rows(ag::constant(x), {3, 0, 3});
  CHECK(g->value(0, 0) == 6.0);
  CHECK(g->value(1, 1) == 1.0);
  CHECK(g->value(2, 0) == 6.0);
  ag::Var s = ag::slice_rows(ag::constant(x), 1, 2);
  CHECK(s->value(0, 0) == 2.0);
  CHECK(s->value(1, 1) == 5.0);
}

namespace {

// worst relative gradient error of mean(f(x)) for a leaf x
template <typename F>
double check_unary(F f, long rows, long cols, uint64_t seed,
                   double scale = 1.0) {
  std::mt19937_64 rng(seed);
  ag::Var x = ag::leaf(random_mat(rows, cols, rng, scale));
  auto eval = [&]() { return ag::mean(f(x))->value(0, 0); };
  auto back = [&]() { ag::backward(ag::mean(f(x))); };
  return grad_check(x, eval, back, rng);
}

}  // namespace

TEST_CASE("gradients of the scalar-field ops match finite differences") {
  CHECK(check_unary([](const ag::Var& x) { return ag::sigmoid(x); }, 3, 4, 10) < 1e-6);
  CHECK(check_unary([](const ag::Var& x) { return ag::softplus(x); }, 3, 4, 11) < 1e-6);
  CHECK(check_unary([](const ag::Var& x) { return ag::gelu(x); }, 3, 4, 12) < 1e-6);
  CHECK(check_unary([](const ag::Var& x) { return ag::reciprocal(ag::add_scalar(ag::mul(x, x), 1.0)); }, 3, 4, 13) < 1e-6);
  // mean(softmax) alone is constant; weight it so the probe is non-degenerate
  std::mt19937_64 wrng(99);
  ag::Mat W = random_mat(3, 5, wrng);
  CHECK(check_unary([&](const ag::Var& x) { return ag::mul(ag::softmax_rows(ag::mul(x, x)), ag::constant(W)); }, 3, 5, 14) < 1e-4);
  CHECK(check_unary([](const ag::Var& x) { return ag::space_to_depth(x, 4, 4, 2); }, 16, 3, 15) < 1e-6);
  CHECK(check_unary([](const ag::Var& x) { return ag::depth_to_space(x, 2, 2, 2); }, 4, 12, 16) < 1e-6);
}

TEST_CASE("gradients flow through matmul, transpose and concat") {
  std::mt19937_64 rng(20);
  ag::Var a = ag::leaf(random_mat(3, 4, rng));
  ag::Mat B = random_mat(4, 3, rng);
  auto build = [&]() {
    ag::Var y = ag::matmul(a, ag::constant(B));
    ag::Var z = ag::concat_rows({y, ag::transpose(ag::slice_rows(y, 0, 3))});
    return ag::mean(ag::mul(z, z));
  };
  auto eval = [&]() { return build()->value(0, 0); };
  auto back = [&]() { ag::backward(build()); };
  CHECK(grad_check(a, eval, back, rng) < 1e-6);
}

TEST_CASE("layernorm gradient, including gain and bias") {
  std::mt19937_64 rng(21);
  ag::Var x = ag::leaf(random_mat(4, 6, rng));
  ag::Var g = ag::leaf(random_mat(1, 6, rng));
  ag::Var b = ag::leaf(random_mat(1, 6, rng));
  auto build = [&]() {
    ag::Var y = ag::layernorm_rows(x, g, b);
    return ag::mean(ag::mul(y, ag::add_scalar(y, 0.3)));
  };
  auto eval = [&]() { return build()->value(0, 0); };
  auto back = [&]() { ag::backward(build()); };
  CHECK(grad_check(x, eval, back, rng) < 1e-5);
  CHECK(grad_check(g, eval, back, rng) < 1e-5);
  CHECK(grad_check(b, eval, back, rng) < 1e-5);
}

TEST_CASE("scale_by exposes the scalar gradient") {
  std::mt19937_64 rng(22);
  ag::Var x = ag::leaf(random_mat(3, 3, rng));
  ag::Var s = ag::leaf(ag::Mat::Constant(1, 1, 0.7));
  auto build = [&]() { return ag::mean(ag::mul(ag::scale_by(x, s), x)); };
  auto eval = [&]() { return build()->value(0, 0); };
  auto back = [&]() { ag::backward(build()); };
  CHECK(grad_check(s, eval, back, rng, 5) < 1e-7);
  // analytic: d/ds mean(s*x*x) = mean(x..2)
  ag::backward(build());
  CHECK(s->grad(0, 0) ==
        doctest::Approx(x->value.array().square().mean()).epsilon(1e-12));
}

TEST_CASE("cross_entropy_rows: values and gradient") {
  // uniform logits, K=3 -> ln 3
  ag::Var z = ag::constant(ag::Mat::Zero(1, 3));
  ag::Var l = ag::cross_entropy_rows(z, {1});
  CHECK(l->value(0, 0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  // saturated correct class
  ag::Mat hot = ag::Mat::Zero(1, 3);
  hot(0, 2) = 20.0;
  CHECK(ag::cross_entropy_rows(ag::constant(hot), {2})->value(0, 0) < 1e-8);

  std::mt19937_64 rng(23);
  ag::Var x = ag::leaf(random_mat(5, 4, rng, 2.0));
  std::vector<long> t = {0, 3, 1, 1, 2};
  auto eval = [&]() { return ag::cross_entropy_rows(x, t)->value(0, 0); };
  auto back = [&]() { ag::backward(ag::cross_entropy_rows(x, t)); };
  CHECK(grad_check(x, eval, back, rng) < 1e-6);

  // log-sum-exp oracle
  double want = 0.0;
  for (int i = 0; i < 5; ++i) {
    double m = x->value.row(i).maxCoeff();
    double lse = m + std::log((x->value.row(i).array() - m).exp().sum());
    want += lse - x->value(i, t[i]);
  }
  CHECK(eval() == doctest::Approx(want / 5).epsilon(1e-12));
}

TEST_CASE("backward accumulates through shared subexpressions") {
  ag::Var x = ag::leaf(ag::Mat::Constant(1, 1, 3.0));
  ag::Var y = ag::mul(x, x);          // x^2
  ag::Var z = ag::add(y, ag::mul(y, x));  // x^2 + x^3
  ag::backward(z);
  CHECK(x->grad(0, 0) == doctest::Approx(2 * 3.0 + 3 * 9.0).epsilon(1e-12));
}
