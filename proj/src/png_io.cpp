#include <png.h>

#include <cstring>
#include <fstream>

#include "ifdl/image.hpp"

namespace ifdl::png {

namespace {

std::vector<uint8_t> encode_gray_or_rgb(const uint8_t* pixels, int h, int w,
                                        bool rgb) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = rgb ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels, 0, nullptr))
    throw std::runtime_error(std::string("png encode (size): ") + img.message);
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels, 0,
                                 nullptr))
    throw std::runtime_error(std::string("png encode: ") + img.message);
  out.resize(size);
  return out;
}

}  // namespace

std::vector<uint8_t> encode_mask(const BinaryMask& mask) {
  if (mask.height <= 0 || mask.width <= 0)
    throw std::invalid_argument("encode_mask: empty mask");
  std::vector<uint8_t> pixels(mask.values.size());
  for (size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = mask.values[i] ? 255 : 0;
  return encode_gray_or_rgb(pixels.data(), mask.height, mask.width, false);
}

BinaryMask decode_mask(const std::vector<uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw std::runtime_error(std::string("png decode: ") + img.message);
  if (img.format & PNG_FORMAT_FLAG_COLOR) {
    png_image_free(&img);
    throw std::invalid_argument("decode_mask: mask PNG must be single-channel");
  }
  if (img.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&img);
    throw std::invalid_argument("decode_mask: mask PNG must be 8-bit");
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<uint8_t> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr))
    throw std::runtime_error(std::string("png decode: ") + img.message);
  BinaryMask mask(static_cast<int>(img.height), static_cast<int>(img.width));
  for (size_t i = 0; i < pixels.size(); ++i)
    mask.values[i] = pixels[i] >= 128 ? 1 : 0;
  return mask;
}

std::vector<uint8_t> encode_image(const ImageTensor& image) {
  if (image.height <= 0 || image.width <= 0)
    throw std::invalid_argument("encode_image: empty image");
  std::vector<uint8_t> pixels(image.values.size());
  for (size_t i = 0; i < pixels.size(); ++i) {
    double v = image.values[i];
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    pixels[i] = static_cast<uint8_t>(v * 255.0 + 0.5);
  }
  return encode_gray_or_rgb(pixels.data(), image.height, image.width, true);
}

ImageTensor decode_image(const std::vector<uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw std::runtime_error(std::string("png decode: ") + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr))
    throw std::runtime_error(std::string("png decode: ") + img.message);
  ImageTensor image(static_cast<int>(img.height),
                    static_cast<int>(img.width));
  for (size_t i = 0; i < pixels.size(); ++i)
    image.values[i] = pixels[i] / 255.0;
  return image;
}

void write_file(const std::filesystem::path& path,
                const std::vector<uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(is),
                              std::istreambuf_iterator<char>());
}

}  // namespace ifdl::png
