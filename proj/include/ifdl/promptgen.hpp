#pragma once

#include <random>

#include "ifdl/autograd.hpp"
#include "ifdl/params.hpp"

namespace ifdl::promptgen {

struct PromptConfig {
  int num_classes = 3;
  int token_dim = 64;   // D of the incoming patch tokens / class token
  int prompt_dim = 256; // width of the shared projection space
  int heads = 4;

  void validate() const;
};

void add_params(ParamStore& store, const PromptConfig& config,
                std::mt19937_64& rng);

// Linear classification head over the class token: 1xD -> 1xK.
ag::Var classify(const ag::Var& cls_token, const ParamStore& store);

// Cross-modal feature enhancement: projected logits query projected patch
// tokens through multi-head attention; the attention output is broadcast
// additively onto the projected patch features, which are then average
// pooled into a single prompt embedding (1 x prompt_dim).
//
// Because the residual is a broadcast followed by mean pooling, the output
// equals mean(projected patches) + attention output.
ag::Var make_prompt(const ag::Var& class_logits, const ag::Var& patch_tokens,
                    const PromptConfig& config, const ParamStore& store);

}  // namespace ifdl::promptgen
