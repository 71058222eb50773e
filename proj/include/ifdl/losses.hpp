#pragma once

#include <vector>

#include "ifdl/autograd.hpp"
#include "ifdl/image.hpp"

namespace ifdl::losses {

struct LossWeights {
  double lambda_bce = 1.0;
  double lambda_dice = 1.0;
  double lambda_det = 1.0;

  void validate() const {
    if (lambda_bce < 0 || lambda_dice < 0 || lambda_det < 0)
      throw std::invalid_argument("loss weights must be >= 0");
  }
};

// Mean over pixels of -[t log s(z) + (1-t) log(1-s(z))], computed in the
// stable logit form softplus(z) - z*t.
ag::Var bce_loss(const ag::Var& mask_logits, const BinaryMask& target);

// Soft dice on sigmoid probabilities:
// 1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps).
ag::Var dice_loss(const ag::Var& mask_logits, const BinaryMask& target,
                  double smoothing = 1.0);

// -log softmax(logits)[label] for a single 1xK logit row.
ag::Var ce_loss(const ag::Var& class_logits, long label);

struct Stage1Loss {
  ag::Var total;
  double bce = 0.0;
  double dice = 0.0;
  double ce = 0.0;
};

// lambda_bce*BCE + lambda_dice*Dice + lambda_det*CE. When
// include_localization is false (fully synthetic samples) the localization
// terms are weighted zero.
Stage1Loss stage1_loss(const ag::Var& mask_logits, const BinaryMask& target,
                       const ag::Var& class_logits, long label,
                       const LossWeights& weights,
                       bool include_localization = true);

// Mean -log softmax over non-pad positions; pad positions are excluded
// from both the sum and the count. All-pad targets are an error.
ag::Var sequence_ce_loss(const ag::Var& pred_logits,
                         const std::vector<long>& target_tokens, long pad_id);

ag::Mat mask_to_mat(const BinaryMask& mask);

}  // namespace ifdl::losses
