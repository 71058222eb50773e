#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace ifdl {

// 8-bit RGB image values normalized to [0,1], row-major.
struct ImageTensor {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // height*width*3, interleaved RGB

  ImageTensor() = default;
  ImageTensor(int h, int w) : height(h), width(w), values(h * w * 3, 0.0) {}

  double& at(int y, int x, int c) { return values[(y * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return values[(y * width + x) * 3 + c];
  }
};

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> values;  // 0/1, row-major

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), values(h * w, 0) {}

  bool at(int y, int x) const { return values[y * width + x] != 0; }
  void set(int y, int x, bool v) { values[y * width + x] = v ? 1 : 0; }
  long count() const {
    long n = 0;
    for (auto v : values) n += v != 0;
    return n;
  }
  bool operator==(const BinaryMask&) const = default;
};

namespace png {

// Masks: single-channel 8-bit PNG, 0 = authentic, 255 = tampered.
// Decoding thresholds at 128 (>= 128 maps to true). Multi-channel or
// non-8-bit input is rejected.
std::vector<uint8_t> encode_mask(const BinaryMask& mask);
BinaryMask decode_mask(const std::vector<uint8_t>& bytes);

// Images: 8-bit RGB PNG.
std::vector<uint8_t> encode_image(const ImageTensor& image);
ImageTensor decode_image(const std::vector<uint8_t>& bytes);

void write_file(const std::filesystem::path& path,
                const std::vector<uint8_t>& bytes);
std::vector<uint8_t> read_file(const std::filesystem::path& path);

}  // namespace png
}  // namespace ifdl
