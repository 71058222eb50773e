#pragma once

#include <random>
#include <string>

#include "ifdl/autograd.hpp"
#include "ifdl/params.hpp"

// Shared building blocks for the small transformers in this project.
// Parameters are registered under a prefix so every module shares one
// checkpoint namespace.
namespace ifdl::nn {

// Multi-head attention with per-head query/key/value projections and an
// output projection. dim_q / dim_kv are the widths of the query and
// key/value inputs; dim_model is the width of the output (must divide by
// heads). Softmax scaling is 1/sqrt(head_dim).
void add_mha_params(ParamStore& store, const std::string& prefix, long dim_q,
                    long dim_kv, long dim_model, long heads,
                    std::mt19937_64& rng);

// q: NxDq, kv: MxDkv -> NxDmodel. attn_bias (NxM), when given, is added to
// the pre-softmax scores (use -1e9 entries for causal masking).
ag::Var mha(const ParamStore& store, const std::string& prefix,
            const ag::Var& q, const ag::Var& kv, long heads,
            const ag::Mat* attn_bias = nullptr);

void add_layernorm_params(ParamStore& store, const std::string& prefix,
                          long dim);
ag::Var layernorm(const ParamStore& store, const std::string& prefix,
                  const ag::Var& x);

// Two-layer GELU MLP.
void add_mlp_params(ParamStore& store, const std::string& prefix, long dim_in,
                    long hidden, long dim_out, std::mt19937_64& rng);
ag::Var mlp(const ParamStore& store, const std::string& prefix,
            const ag::Var& x);

void add_affine_params(ParamStore& store, const std::string& prefix,
                       long dim_in, long dim_out, std::mt19937_64& rng);
ag::Var affine(const ParamStore& store, const std::string& prefix,
               const ag::Var& x);

// Strictly lower-triangular-allowed causal bias (0 on/below diagonal,
// -1e9 above).
ag::Mat causal_bias(long n);

}  // namespace ifdl::nn
