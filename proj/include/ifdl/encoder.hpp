#pragma once

#include <random>

#include "ifdl/autograd.hpp"
#include "ifdl/image.hpp"
#include "ifdl/params.hpp"

namespace ifdl::encoder {

struct EncoderConfig {
  int image_size = 64;
  int patch_size = 8;
  int embed_dim = 64;
  int depth = 2;
  int heads = 4;
  bool trainable = true;

  int num_patches() const {
    return (image_size / patch_size) * (image_size / patch_size);
  }
  void validate() const;
};

// One class token plus N patch tokens.
struct TokenSequence {
  ag::Var cls;      // 1xD
  ag::Var patches;  // NxD
};

// Row-major patches, each row holding the patch's pixels in row-major
// order with interleaved RGB. Concatenating patches reconstructs the image.
ag::Mat patchify(const ImageTensor& image, int patch_size);
ImageTensor unpatchify(const ag::Mat& patches, int height, int width,
                       int patch_size);

// Registers all encoder parameters under "encoder." in the store.
void add_params(ParamStore& store, const EncoderConfig& config,
                std::mt19937_64& rng);

// Pure function of (image, params). Learned absolute positional embeddings,
// pre-norm blocks, GELU MLPs.
TokenSequence encode(const ImageTensor& image, const EncoderConfig& config,
                     const ParamStore& store);

}  // namespace ifdl::encoder
