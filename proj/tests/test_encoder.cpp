#include "doctest.h"

#include "ifdl/encoder.hpp"
#include "testutil.hpp"

using namespace ifdl;
using testutil::grad_check;

namespace {
ImageTensor random_image(int size, uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImageTensor img(size, size);
  for (auto& v : img.values) v = (rng() % 256) / 255.0;
  return img;
}
}  // namespace

TEST_CASE("2x2 image with patch_size 2 gives one 12-value patch") {
  ImageTensor img(2, 2);
  for (int i = 0; i < 12; ++i) img.values[i] = i * 0.01;
  ag::Mat p = encoder::patchify(img, 2);
  REQUIRE(p.rows() == 1);
  REQUIRE(p.cols() == 12);
  for (int i = 0; i < 12; ++i) CHECK(p(0, i) == i * 0.01);
}

TEST_CASE("4x4 image with patch_size 2: patch 0 is the top-left block") {
  ImageTensor img(4, 4);
  for (size_t i = 0; i < img.values.size(); ++i) img.values[i] = double(i);
  ag::Mat p = encoder::patchify(img, 2);
  REQUIRE(p.rows() == 4);
  REQUIRE(p.cols() == 12);
  // top-left block pixels: (0,0), (0,1), (1,0), (1,1)
  int k = 0;
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      for (int c = 0; c < 3; ++c) CHECK(p(0, k++) == img.at(y, x, c));
}

TEST_CASE("unpatchify(patchify(x)) == x on random 8x8 images") {
  for (uint64_t seed : {1, 2, 3}) {
    ImageTensor img = random_image(8, seed);
    for (int ps : {2, 4, 8}) {
      ImageTensor back = encoder::unpatchify(encoder::patchify(img, ps), 8, 8, ps);
      CHECK(back.values == img.values);
    }
  }
}

TEST_CASE("encode is deterministic with the documented shapes") {
  encoder::EncoderConfig cfg;
  ParamStore store;
  std::mt19937_64 rng(5);
  encoder::add_params(store, cfg, rng);

  ImageTensor img = random_image(64, 9);
  auto t1 = encoder::encode(img, cfg, store);
  auto t2 = encoder::encode(img, cfg, store);
  CHECK(t1.cls->rows() == 1);
  CHECK(t1.cls->cols() == 64);
  CHECK(t1.patches->rows() == 64);  // (64/8)^2
  CHECK(t1.patches->cols() == 64);
  CHECK(t1.cls->value == t2.cls->value);
  CHECK(t1.patches->value == t2.patches->value);
  CHECK(t1.patches->value.allFinite());
}

TEST_CASE("mismatched image size is rejected") {
  encoder::EncoderConfig cfg;
  ParamStore store;
  std::mt19937_64 rng(5);
  encoder::add_params(store, cfg, rng);
  CHECK_THROWS(encoder::encode(random_image(32, 1), cfg, store));
}

TEST_CASE("encoder weight gradients match finite differences") {
  encoder::EncoderConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;
  cfg.embed_dim = 16;
  cfg.depth = 1;
  cfg.heads = 2;
  ParamStore store;
  std::mt19937_64 rng(6);
  encoder::add_params(store, cfg, rng);
  ImageTensor img = random_image(16, 2);

  // Sum (not mean) keeps gradient entries well above the finite-difference
  // noise floor for a loss of this size.
  auto build = [&]() {
    auto t = encoder::encode(img, cfg, store);
    return ag::sum(ag::mul(t.patches, t.patches));
  };
  auto eval = [&]() { return build()->value(0, 0); };
  auto back = [&]() { ag::backward(build()); };

  std::mt19937_64 probe_rng(7);
  for (const char* name :
       {"encoder.patch_embed.w", "encoder.pos", "encoder.cls",
        "encoder.block0.attn.h0.wq", "encoder.block0.mlp.fc1.w",
        "encoder.block0.ln1.g", "encoder.ln_f.b"}) {
    REQUIRE(store.contains(name));
    // eps balances roundoff noise (dominates below ~1e-5 for a graph this
    // deep) against truncation error; tolerance sized accordingly.
    CHECK(grad_check(store.at(name), eval, back, probe_rng, 20, 1e-4) < 1e-3);
  }
}

TEST_CASE("non-trainable config freezes every encoder tensor") {
  encoder::EncoderConfig cfg;
  cfg.trainable = false;
  ParamStore store;
  std::mt19937_64 rng(5);
  encoder::add_params(store, cfg, rng);
  for (const auto& [name, var] : store.all()) {
    CAPTURE(name);
    CHECK_FALSE(var->requires_grad);
  }
}
