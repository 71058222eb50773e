#include "ifdl/promptgen.hpp"

#include "ifdl/nn.hpp"

namespace ifdl::promptgen {

void PromptConfig::validate() const {
  if (num_classes <= 0 || token_dim <= 0 || prompt_dim <= 0 || heads <= 0)
    throw std::invalid_argument("promptgen: all dims must be positive");
  if (prompt_dim % heads != 0)
    throw std::invalid_argument("promptgen: heads must divide prompt_dim");
}

void add_params(ParamStore& store, const PromptConfig& config,
                std::mt19937_64& rng) {
  config.validate();
  nn::add_affine_params(store, "head.cls", config.token_dim,
                        config.num_classes, rng);
  nn::add_affine_params(store, "prompt.proj_logits", config.num_classes,
                        config.prompt_dim, rng);
  nn::add_affine_params(store, "prompt.proj_patch", config.token_dim,
                        config.prompt_dim, rng);
  nn::add_mha_params(store, "prompt.attn", config.prompt_dim,
                     config.prompt_dim, config.prompt_dim, config.heads, rng);
}

ag::Var classify(const ag::Var& cls_token, const ParamStore& store) {
  return nn::affine(store, "head.cls", cls_token);
}

ag::Var make_prompt(const ag::Var& class_logits, const ag::Var& patch_tokens,
                    const PromptConfig& config, const ParamStore& store) {
  config.validate();
  if (patch_tokens->rows() == 0)
    throw std::invalid_argument("make_prompt: no patch tokens");
  if (patch_tokens->cols() != config.token_dim)
    throw std::invalid_argument("make_prompt: patch token dim mismatch");
  if (class_logits->cols() != config.num_classes)
    throw std::invalid_argument("make_prompt: logit dim mismatch");

  // Raw logits (not probabilities) feed the query projection.
  ag::Var q = nn::affine(store, "prompt.proj_logits", class_logits);
  ag::Var p = nn::affine(store, "prompt.proj_patch", patch_tokens);
  ag::Var attn_out = nn::mha(store, "prompt.attn", q, p, config.heads);
  ag::Var enhanced = ag::add_rowvec(p, attn_out);
  return ag::mean_rows(enhanced);
}

}  // namespace ifdl::promptgen
