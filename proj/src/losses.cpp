#include "ifdl/losses.hpp"

namespace ifdl::losses {

ag::Mat mask_to_mat(const BinaryMask& mask) {
  ag::Mat t(static_cast<long>(mask.values.size()), 1);
  for (size_t i = 0; i < mask.values.size(); ++i)
    t(static_cast<long>(i), 0) = mask.values[i] ? 1.0 : 0.0;
  return t;
}

namespace {
void check_shape(const ag::Var& logits, const BinaryMask& target,
                 const char* op) {
  if (logits->value.size() !=
      static_cast<long>(target.height) * target.width)
    throw std::invalid_argument(std::string(op) +
                                ": logits/target shape mismatch");
}
}  // namespace

ag::Var bce_loss(const ag::Var& mask_logits, const BinaryMask& target) {
  check_shape(mask_logits, target, "bce_loss");
  ag::Var t = ag::constant(mask_to_mat(target));
  return ag::mean(ag::sub(ag::softplus(mask_logits),
                          ag::mul(mask_logits, t)));
}

ag::Var dice_loss(const ag::Var& mask_logits, const BinaryMask& target,
                  double smoothing) {
  check_shape(mask_logits, target, "dice_loss");
  if (smoothing < 0) throw std::invalid_argument("dice: smoothing < 0");
  ag::Var t = ag::constant(mask_to_mat(target));
  ag::Var p = ag::sigmoid(mask_logits);
  ag::Var num =
      ag::add_scalar(ag::scale(ag::sum(ag::mul(p, t)), 2.0), smoothing);
  ag::Var den =
      ag::add_scalar(ag::add(ag::sum(p), ag::sum(t)), smoothing);
  return ag::add_scalar(ag::scale(ag::div(num, den), -1.0), 1.0);
}

ag::Var ce_loss(const ag::Var& class_logits, long label) {
  if (class_logits->rows() != 1)
    throw std::invalid_argument("ce_loss: expected a single logit row");
  if (label < 0 || label >= class_logits->cols())
    throw std::out_of_range("ce_loss: label out of range");
  return ag::cross_entropy_rows(class_logits, {label}, {1.0});
}

Stage1Loss stage1_loss(const ag::Var& mask_logits, const BinaryMask& target,
                       const ag::Var& class_logits, long label,
                       const LossWeights& weights, bool include_localization) {
  weights.validate();
  Stage1Loss out;
  ag::Var ce = ce_loss(class_logits, label);
  out.ce = ce->value(0, 0);
  ag::Var total = ag::scale(ce, weights.lambda_det);
  if (include_localization) {
    ag::Var bce = bce_loss(mask_logits, target);
    ag::Var dice = dice_loss(mask_logits, target);
    out.bce = bce->value(0, 0);
    out.dice = dice->value(0, 0);
    total = ag::add(total, ag::add(ag::scale(bce, weights.lambda_bce),
                                   ag::scale(dice, weights.lambda_dice)));
  }
  out.total = total;
  return out;
}

ag::Var sequence_ce_loss(const ag::Var& pred_logits,
                         const std::vector<long>& target_tokens, long pad_id) {
  if (pred_logits->rows() != static_cast<long>(target_tokens.size()))
    throw std::invalid_argument("sequence_ce_loss: length mismatch");
  std::vector<double> weights(target_tokens.size());
  bool any = false;
  for (size_t i = 0; i < target_tokens.size(); ++i) {
    weights[i] = target_tokens[i] == pad_id ? 0.0 : 1.0;
    any = any || target_tokens[i] != pad_id;
  }
  if (!any)
    throw std::invalid_argument("sequence_ce_loss: target is all padding");
  return ag::cross_entropy_rows(pred_logits, target_tokens, weights);
}

}  // namespace ifdl::losses
