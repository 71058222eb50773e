#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ifdl/image.hpp"

namespace ifdl::data {

enum class Label { Real, FullySynthetic, Tampered };

std::string label_to_string(Label l);
Label label_from_string(const std::string& s);

// The five sections of a forgery explanation, in fixed order.
struct ExplanationSections {
  std::string type;
  std::string areas;
  std::string tampered_content;
  std::string visual_inconsistencies;
  std::string summary;

  bool operator==(const ExplanationSections&) const = default;
};

inline constexpr std::array<const char*, 5> kSectionKeys = {
    "type", "areas", "tampered_content", "visual_inconsistencies", "summary"};

struct SampleRecord {
  std::string id;
  std::filesystem::path image_path;
  Label label = Label::Real;
  std::optional<std::filesystem::path> mask_path;
  std::optional<ExplanationSections> explanation;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<SampleRecord> records;
};

// Manifest file: UTF-8 JSON lines, one record per line with fields
// id, image, label, optional mask, optional explanation (object with the
// five section keys). Paths are relative to the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

// Stratified per-label split, deterministic for a fixed seed. Ratios must
// be positive and sum to 1. Per-class counts land within one sample of the
// exact ratio. A class whose share of some split rounds to zero is an error.
std::array<DatasetManifest, 3> split_dataset(const DatasetManifest& manifest,
                                             const std::array<double, 3>& ratios,
                                             uint64_t seed);

struct FixtureConfig {
  int image_size = 64;
  int count_real = 120;
  int count_full_synthetic = 120;
  int count_tampered = 120;
  // Side-length range of pasted foreign shapes, in pixels.
  int min_shape = 20;
  int max_shape = 36;
};

// Synthetic forgery corpus: Real images are clean backgrounds with benign
// shapes, FullySynthetic images are procedurally noised, Tampered images
// carry a pasted foreign rectangle or ellipse whose exact footprint is the
// mask. Tampered records get a templated five-section explanation naming
// the shape, quadrant, and color. Deterministic per seed; writes images and
// masks under out_dir and the manifest at out_dir/manifest.jsonl.
DatasetManifest generate_fixture(const FixtureConfig& config, uint64_t seed,
                                 const std::filesystem::path& out_dir);

// Slot vocabulary used by the fixture explanation templates.
inline constexpr std::array<const char*, 2> kFixtureShapes = {"rectangle",
                                                              "ellipse"};
inline constexpr std::array<const char*, 4> kFixtureQuadrants = {
    "top-left", "top-right", "bottom-left", "bottom-right"};
inline constexpr std::array<const char*, 3> kFixtureColors = {"red", "yellow",
                                                              "magenta"};

ExplanationSections fixture_explanation(const std::string& shape,
                                        const std::string& quadrant,
                                        const std::string& color);

ImageTensor load_image(const SampleRecord& rec);
BinaryMask load_mask(const SampleRecord& rec, int height, int width);

}  // namespace ifdl::data
