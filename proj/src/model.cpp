#include "ifdl/model.hpp"

namespace ifdl::model {

void Stage1Model::init(uint64_t seed) {
  prompt.token_dim = enc.embed_dim;
  dec.image_size = enc.image_size;
  dec.prompt_dim = prompt.prompt_dim;
  std::mt19937_64 rng(seed);
  encoder::add_params(store, enc, rng);
  promptgen::add_params(store, prompt, rng);
  maskdec::add_params(store, dec, rng);
}

Stage1Model::Forward Stage1Model::forward(const ImageTensor& image) const {
  encoder::TokenSequence tokens = encoder::encode(image, enc, store);
  ag::Var logits = promptgen::classify(tokens.cls, store);
  ag::Var prompt_emb =
      promptgen::make_prompt(logits, tokens.patches, prompt, store);
  maskdec::DenseFeatureMap feats = maskdec::dense_features(image, dec, store);
  maskdec::MaskLogits mask = maskdec::decode_mask(feats, prompt_emb, dec, store);
  return Forward{logits, prompt_emb, mask};
}

long Stage1Model::predict_class(const ImageTensor& image) const {
  encoder::TokenSequence tokens = encoder::encode(image, enc, store);
  ag::Var logits = promptgen::classify(tokens.cls, store);
  Eigen::Index best;
  logits->value.row(0).maxCoeff(&best);
  return static_cast<long>(best);
}

BinaryMask Stage1Model::predict_mask(const ImageTensor& image,
                                     double threshold) const {
  return maskdec::binarize(forward(image).mask, threshold);
}

void Stage2Model::init(uint64_t seed,
                       const std::filesystem::path& stage1_checkpoint) {
  lm.visual_dim = enc.embed_dim;
  lm.max_prefix = enc.num_patches() + 1;
  std::mt19937_64 rng(seed);
  encoder::add_params(store, enc, rng);
  stage2::add_params(store, lm, rng);
  if (!stage1_checkpoint.empty()) {
    ParamStore trained;
    trained.load(stage1_checkpoint);
    for (const auto& [name, v] : trained.all())
      if (name.rfind("encoder.", 0) == 0) store.at(name)->value = v->value;
  }
  store.set_trainable("encoder.", false);
}

stage2::VisualTokens Stage2Model::visual_tokens(const ImageTensor& image,
                                                const BinaryMask& mask,
                                                double alpha) const {
  return stage2::region_enhance(image, mask, alpha, enc, store);
}

}  // namespace ifdl::model
