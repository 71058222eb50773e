#pragma once

#include <random>

#include "ifdl/autograd.hpp"
#include "ifdl/image.hpp"
#include "ifdl/params.hpp"

namespace ifdl::maskdec {

struct MaskDecConfig {
  int image_size = 64;
  int feature_channels = 64;  // C of the dense grid; fixed stride 4
  int prompt_dim = 256;
  int heads = 4;
  int refine_blocks = 2;
  int up_channels = 32;  // channels after the first upsampling stage
  bool features_trainable = false;  // the dense provider is frozen by default

  int grid_size() const { return image_size / 4; }
  void validate() const;
};

// h x w x C grid flattened row-major to (h*w) x C.
struct DenseFeatureMap {
  ag::Var grid;
  int height = 0;
  int width = 0;
};

// Full-resolution per-pixel forgery logits, row-major flattened to (H*W) x 1.
struct MaskLogits {
  ag::Var flat;
  int height = 0;
  int width = 0;

  double at(int y, int x) const { return flat->value(y * width + x, 0); }
};

void add_params(ParamStore& store, const MaskDecConfig& config,
                std::mt19937_64& rng);

// Frozen high-resolution feature provider: a 3x3 convolution over the image
// followed by GELU and 4x4 space-to-depth packing, so each grid cell keeps
// the full-resolution responses of its 4x4 pixel block.
DenseFeatureMap dense_features(const ImageTensor& image,
                               const MaskDecConfig& config,
                               const ParamStore& store);

// Prompt-token cross-attention conditions the grid, two refinement blocks,
// then two learned x2 upsampling stages back to image resolution.
MaskLogits decode_mask(const DenseFeatureMap& features, const ag::Var& prompt,
                       const MaskDecConfig& config, const ParamStore& store);

// Pixel true iff sigmoid(logit) >= threshold; at the default 0.5 this is
// logit >= 0.
BinaryMask binarize(const MaskLogits& logits, double threshold = 0.5);

}  // namespace ifdl::maskdec
