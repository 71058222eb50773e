#include "ifdl/nn.hpp"

#include <cmath>

namespace ifdl::nn {

using ag::Var;

void add_affine_params(ParamStore& store, const std::string& prefix,
                       long dim_in, long dim_out, std::mt19937_64& rng) {
  store.create(prefix + ".w", dim_in, dim_out, rng,
               1.0 / std::sqrt(static_cast<double>(dim_in)));
  store.create_zero(prefix + ".b", 1, dim_out);
}

Var affine(const ParamStore& store, const std::string& prefix, const Var& x) {
  return ag::affine(x, store.at(prefix + ".w"), store.at(prefix + ".b"));
}

void add_mha_params(ParamStore& store, const std::string& prefix, long dim_q,
                    long dim_kv, long dim_model, long heads,
                    std::mt19937_64& rng) {
  if (dim_model % heads != 0)
    throw std::invalid_argument("mha: heads must divide dim_model");
  const long hd = dim_model / heads;
  for (long h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".h" + std::to_string(h);
    store.create(hp + ".wq", dim_q, hd, rng, 1.0 / std::sqrt((double)dim_q));
    store.create_zero(hp + ".bq", 1, hd);
    store.create(hp + ".wk", dim_kv, hd, rng, 1.0 / std::sqrt((double)dim_kv));
    store.create_zero(hp + ".bk", 1, hd);
    store.create(hp + ".wv", dim_kv, hd, rng, 1.0 / std::sqrt((double)dim_kv));
    store.create_zero(hp + ".bv", 1, hd);
  }
  add_affine_params(store, prefix + ".out", dim_model, dim_model, rng);
}

Var mha(const ParamStore& store, const std::string& prefix, const Var& q,
        const Var& kv, long heads, const ag::Mat* attn_bias) {
  std::vector<Var> head_outs;
  head_outs.reserve(heads);
  for (long h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".h" + std::to_string(h);
    Var Q = ag::affine(q, store.at(hp + ".wq"), store.at(hp + ".bq"));
    Var K = ag::affine(kv, store.at(hp + ".wk"), store.at(hp + ".bk"));
    Var V = ag::affine(kv, store.at(hp + ".wv"), store.at(hp + ".bv"));
    Var scores = ag::scale(ag::matmul(Q, ag::transpose(K)),
                           1.0 / std::sqrt(static_cast<double>(Q->cols())));
    if (attn_bias) scores = ag::add(scores, ag::constant(*attn_bias));
    head_outs.push_back(ag::matmul(ag::softmax_rows(scores), V));
  }
  return affine(store, prefix + ".out", ag::concat_cols(head_outs));
}

void add_layernorm_params(ParamStore& store, const std::string& prefix,
                          long dim) {
  store.create_const(prefix + ".g", 1, dim, 1.0);
  store.create_zero(prefix + ".b", 1, dim);
}

Var layernorm(const ParamStore& store, const std::string& prefix,
              const Var& x) {
  return ag::layernorm_rows(x, store.at(prefix + ".g"),
                            store.at(prefix + ".b"));
}

void add_mlp_params(ParamStore& store, const std::string& prefix, long dim_in,
                    long hidden, long dim_out, std::mt19937_64& rng) {
  add_affine_params(store, prefix + ".fc1", dim_in, hidden, rng);
  add_affine_params(store, prefix + ".fc2", hidden, dim_out, rng);
}

Var mlp(const ParamStore& store, const std::string& prefix, const Var& x) {
  return affine(store, prefix + ".fc2",
                ag::gelu(affine(store, prefix + ".fc1", x)));
}

ag::Mat causal_bias(long n) {
  ag::Mat m = ag::Mat::Zero(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) m(i, j) = -1e9;
  return m;
}

}  // namespace ifdl::nn
