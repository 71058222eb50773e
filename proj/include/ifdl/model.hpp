#pragma once

#include "ifdl/encoder.hpp"
#include "ifdl/maskdec.hpp"
#include "ifdl/params.hpp"
#include "ifdl/promptgen.hpp"
#include "ifdl/stage2.hpp"

namespace ifdl::model {

// Stage-1: ViT backbone -> linear classifier + cross-modal prompt module ->
// frozen dense features + prompt-conditioned mask decoder.
struct Stage1Model {
  encoder::EncoderConfig enc;
  promptgen::PromptConfig prompt;
  maskdec::MaskDecConfig dec;
  ParamStore store;

  void init(uint64_t seed);

  struct Forward {
    ag::Var class_logits;        // 1xK
    ag::Var prompt_embedding;    // 1x256
    maskdec::MaskLogits mask;    // HxW
  };
  Forward forward(const ImageTensor& image) const;

  long predict_class(const ImageTensor& image) const;
  BinaryMask predict_mask(const ImageTensor& image,
                          double threshold = 0.5) const;
};

// Stage-2: the (frozen) Stage-1 encoder feeding the region-aware blend and
// the explanation head. Encoder weights are loaded from a Stage-1
// checkpoint and never updated here.
struct Stage2Model {
  encoder::EncoderConfig enc;
  stage2::LanguageHeadConfig lm;
  ParamStore store;

  void init(uint64_t seed,
            const std::filesystem::path& stage1_checkpoint = {});

  stage2::VisualTokens visual_tokens(const ImageTensor& image,
                                     const BinaryMask& mask,
                                     double alpha) const;
};

}  // namespace ifdl::model
