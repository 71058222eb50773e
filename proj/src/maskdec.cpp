#include "ifdl/maskdec.hpp"

#include <cmath>

#include "ifdl/nn.hpp"

namespace ifdl::maskdec {

void MaskDecConfig::validate() const {
  if (image_size < 8 || image_size % 4 != 0)
    throw std::invalid_argument("maskdec: image_size must be divisible by 4");
  if (feature_channels % 16 != 0 || feature_channels <= 0)
    throw std::invalid_argument(
        "maskdec: feature_channels must be a positive multiple of 16");
  if (prompt_dim <= 0 || heads <= 0 || feature_channels % heads != 0)
    throw std::invalid_argument("maskdec: heads must divide feature_channels");
  if (grid_size() % 2 != 0)
    throw std::invalid_argument("maskdec: grid must be even for upsampling");
}

void add_params(ParamStore& store, const MaskDecConfig& config,
                std::mt19937_64& rng) {
  config.validate();
  const long C = config.feature_channels;
  const long f0 = C / 16;  // conv channels before space-to-depth packing

  // Frozen conv: first three output channels pass RGB through the center
  // tap so full-resolution color survives the packing; the rest are random.
  ag::Mat w = gaussian(27, f0, rng, 1.0 / std::sqrt(27.0));
  const long center = (1 * 3 + 1) * 3;  // (dy=0,dx=0) tap, channel 0
  for (long c = 0; c < std::min<long>(3, f0); ++c) w(center + c, c) += 1.0;
  store.put("sam.conv.w", std::move(w));
  store.create_zero("sam.conv.b", 1, f0);
  if (!config.features_trainable) store.set_trainable("sam.", false);

  nn::add_mha_params(store, "dec.xattn", config.prompt_dim, C, C,
                     config.heads, rng);
  for (int b = 0; b < config.refine_blocks; ++b) {
    const std::string bp = "dec.ref" + std::to_string(b);
    nn::add_layernorm_params(store, bp + ".ln", C);
    nn::add_mlp_params(store, bp + ".mlp", C, 2 * C, C, rng);
  }
  nn::add_affine_params(store, "dec.up1", C, 4L * config.up_channels, rng);
  nn::add_affine_params(store, "dec.up2", config.up_channels, 4, rng);
}

DenseFeatureMap dense_features(const ImageTensor& image,
                               const MaskDecConfig& config,
                               const ParamStore& store) {
  config.validate();
  if (image.height != config.image_size || image.width != config.image_size)
    throw std::invalid_argument("dense_features: image size mismatch");
  const int H = image.height, W = image.width;

  // im2col for a 3x3 zero-padded convolution: row per pixel, 27 columns
  // ordered (dy, dx, channel).
  ag::Mat x(H * W, 27);
  for (int y = 0; y < H; ++y)
    for (int xpos = 0; xpos < W; ++xpos) {
      long col = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          for (int c = 0; c < 3; ++c) {
            int yy = y + dy, xx = xpos + dx;
            x(y * W + xpos, col++) =
                (yy < 0 || yy >= H || xx < 0 || xx >= W)
                    ? 0.0
                    : image.at(yy, xx, c);
          }
    }

  ag::Var responses = ag::gelu(ag::affine(
      ag::constant(std::move(x)), store.at("sam.conv.w"),
      store.at("sam.conv.b")));
  ag::Var grid = ag::space_to_depth(responses, H, W, 4);
  return DenseFeatureMap{grid, config.grid_size(), config.grid_size()};
}

MaskLogits decode_mask(const DenseFeatureMap& features, const ag::Var& prompt,
                       const MaskDecConfig& config, const ParamStore& store) {
  config.validate();
  if (prompt->rows() != 1 || prompt->cols() != config.prompt_dim)
    throw std::invalid_argument("decode_mask: prompt dim mismatch");
  if (features.grid->cols() != config.feature_channels ||
      features.grid->rows() != features.height * features.width)
    throw std::invalid_argument("decode_mask: feature grid shape mismatch");

  ag::Var ctx =
      nn::mha(store, "dec.xattn", prompt, features.grid, config.heads);
  ag::Var h = ag::add_rowvec(features.grid, ctx);
  for (int b = 0; b < config.refine_blocks; ++b) {
    const std::string bp = "dec.ref" + std::to_string(b);
    h = ag::add(h, nn::mlp(store, bp + ".mlp",
                           nn::layernorm(store, bp + ".ln", h)));
  }
  // Two x2 upsampling stages (kernel-2 stride-2 transposed convolutions,
  // expressed as per-cell linear maps plus depth-to-space).
  ag::Var u1 = ag::gelu(ag::depth_to_space(nn::affine(store, "dec.up1", h),
                                           features.height, features.width,
                                           2));
  ag::Var flat = ag::depth_to_space(nn::affine(store, "dec.up2", u1),
                                    2 * features.height, 2 * features.width,
                                    2);
  return MaskLogits{flat, 4 * features.height, 4 * features.width};
}

BinaryMask binarize(const MaskLogits& logits, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("binarize: threshold must be in (0,1)");
  const double cut = std::log(threshold / (1.0 - threshold));
  BinaryMask mask(logits.height, logits.width);
  for (int i = 0; i < logits.height * logits.width; ++i)
    mask.values[i] = logits.flat->value(i, 0) >= cut ? 1 : 0;
  return mask;
}

}  // namespace ifdl::maskdec
