#include "doctest.h"

#include <cstring>
#include <random>

#include <png.h>

#include "ifdl/image.hpp"

using namespace ifdl;

TEST_CASE("all-zero and all-255 masks decode to uniform masks") {
  BinaryMask empty(4, 4);
  BinaryMask full(4, 4);
  for (auto& v : full.values) v = 1;

  CHECK(png::decode_mask(png::encode_mask(empty)) == empty);
  CHECK(png::decode_mask(png::encode_mask(full)) == full);
}

TEST_CASE("gray values threshold at 128") {
  // 2x2 gray PNG with levels {0, 255, 127, 128}, written via libpng itself
  uint8_t pixels[4] = {0, 255, 127, 128};
  png_image spec;
  std::memset(&spec, 0, sizeof(spec));
  spec.version = PNG_IMAGE_VERSION;
  spec.width = 2;
  spec.height = 2;
  spec.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  REQUIRE(png_image_write_to_memory(&spec, nullptr, &size, 0, pixels, 2, nullptr));
  std::vector<uint8_t> bytes(size);
  REQUIRE(png_image_write_to_memory(&spec, bytes.data(), &size, 0, pixels, 2,
                                    nullptr));

  BinaryMask m = png::decode_mask(bytes);
  CHECK_FALSE(m.at(0, 0));  // 0
  CHECK(m.at(0, 1));        // 255
  CHECK_FALSE(m.at(1, 0));  // 127 < 128
  CHECK(m.at(1, 1));        // 128 >= 128

  // multi-channel input is rejected by the mask decoder
  ImageTensor img(2, 2);
  CHECK_THROWS(png::decode_mask(png::encode_image(img)));
}

TEST_CASE("mask codec round trip on random masks (property)") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    int h = 1 + static_cast<int>(rng() % 32);
    int w = 1 + static_cast<int>(rng() % 32);
    BinaryMask m(h, w);
    for (auto& v : m.values) v = rng() & 1;
    CHECK(png::decode_mask(png::encode_mask(m)) == m);
  }
}

TEST_CASE("image codec round trip preserves 8-bit values") {
  std::mt19937_64 rng(7);
  ImageTensor img(5, 9);
  for (auto& v : img.values) v = (rng() % 256) / 255.0;
  ImageTensor back = png::decode_image(png::encode_image(img));
  REQUIRE(back.height == 5);
  REQUIRE(back.width == 9);
  for (size_t i = 0; i < img.values.size(); ++i)
    CHECK(back.values[i] == doctest::Approx(img.values[i]).epsilon(1e-12));
}

TEST_CASE("garbage bytes are rejected") {
  std::vector<uint8_t> junk = {'n', 'o', 't', ' ', 'p', 'n', 'g'};
  CHECK_THROWS(png::decode_mask(junk));
  CHECK_THROWS(png::decode_image(junk));
}

TEST_CASE("file round trip") {
  auto p = std::filesystem::temp_directory_path() / "ifdl_png_io_test.png";
  BinaryMask m(3, 3);
  m.set(1, 1, true);
  png::write_file(p, png::encode_mask(m));
  CHECK(png::decode_mask(png::read_file(p)) == m);
  std::filesystem::remove(p);
  CHECK_THROWS(png::read_file(p));
}
