#include "ifdl/encoder.hpp"

#include <cmath>

#include "ifdl/nn.hpp"

namespace ifdl::encoder {

void EncoderConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
    throw std::invalid_argument(
        "encoder: image_size must be divisible by patch_size");
  if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0)
    throw std::invalid_argument(
        "encoder: embed_dim must be divisible by heads");
  if (depth <= 0) throw std::invalid_argument("encoder: depth must be > 0");
}

ag::Mat patchify(const ImageTensor& image, int patch_size) {
  if (image.height % patch_size != 0 || image.width % patch_size != 0)
    throw std::invalid_argument("patchify: dimensions not divisible");
  const int ph = image.height / patch_size, pw = image.width / patch_size;
  ag::Mat out(ph * pw, 3 * patch_size * patch_size);
  for (int py = 0; py < ph; ++py)
    for (int px = 0; px < pw; ++px) {
      long col = 0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          for (int c = 0; c < 3; ++c)
            out(py * pw + px, col++) =
                image.at(py * patch_size + y, px * patch_size + x, c);
    }
  return out;
}

ImageTensor unpatchify(const ag::Mat& patches, int height, int width,
                       int patch_size) {
  const int ph = height / patch_size, pw = width / patch_size;
  if (patches.rows() != ph * pw ||
      patches.cols() != 3 * patch_size * patch_size)
    throw std::invalid_argument("unpatchify: shape mismatch");
  ImageTensor img(height, width);
  for (int py = 0; py < ph; ++py)
    for (int px = 0; px < pw; ++px) {
      long col = 0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          for (int c = 0; c < 3; ++c)
            img.at(py * patch_size + y, px * patch_size + x, c) =
                patches(py * pw + px, col++);
    }
  return img;
}

void add_params(ParamStore& store, const EncoderConfig& config,
                std::mt19937_64& rng) {
  config.validate();
  const long D = config.embed_dim;
  const long N = config.num_patches();
  const long in_dim = 3L * config.patch_size * config.patch_size;
  nn::add_affine_params(store, "encoder.patch_embed", in_dim, D, rng);
  store.create("encoder.cls", 1, D, rng, 0.02);
  store.create("encoder.pos", N + 1, D, rng, 0.02);
  for (int b = 0; b < config.depth; ++b) {
    const std::string bp = "encoder.block" + std::to_string(b);
    nn::add_layernorm_params(store, bp + ".ln1", D);
    nn::add_mha_params(store, bp + ".attn", D, D, D, config.heads, rng);
    nn::add_layernorm_params(store, bp + ".ln2", D);
    nn::add_mlp_params(store, bp + ".mlp", D, 4 * D, D, rng);
  }
  nn::add_layernorm_params(store, "encoder.ln_f", D);
  if (!config.trainable) store.set_trainable("encoder.", false);
}

TokenSequence encode(const ImageTensor& image, const EncoderConfig& config,
                     const ParamStore& store) {
  config.validate();
  if (image.height != config.image_size || image.width != config.image_size)
    throw std::invalid_argument("encode: image does not match config size");
  for (double v : image.values)
    if (!std::isfinite(v))
      throw std::invalid_argument("encode: non-finite image value");

  const long N = config.num_patches();
  ag::Var x = ag::constant(patchify(image, config.patch_size));
  ag::Var tok = nn::affine(store, "encoder.patch_embed", x);
  ag::Var h = ag::concat_rows({store.at("encoder.cls"), tok});
  h = ag::add(h, store.at("encoder.pos"));
  for (int b = 0;; ++b) {
    const std::string bp = "encoder.block" + std::to_string(b);
    if (!store.contains(bp + ".ln1.g")) break;
    ag::Var n1 = nn::layernorm(store, bp + ".ln1", h);
    h = ag::add(h, nn::mha(store, bp + ".attn", n1, n1, config.heads));
    h = ag::add(h, nn::mlp(store, bp + ".mlp",
                           nn::layernorm(store, bp + ".ln2", h)));
  }
  h = nn::layernorm(store, "encoder.ln_f", h);
  return TokenSequence{ag::slice_rows(h, 0, 1), ag::slice_rows(h, 1, N)};
}

}  // namespace ifdl::encoder
