#include "ifdl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ifdl::data {

using nlohmann::json;

std::string label_to_string(Label l) {
  switch (l) {
    case Label::Real: return "real";
    case Label::FullySynthetic: return "full_synthetic";
    case Label::Tampered: return "tampered";
  }
  throw std::logic_error("bad label");
}

Label label_from_string(const std::string& s) {
  if (s == "real") return Label::Real;
  if (s == "full_synthetic") return Label::FullySynthetic;
  if (s == "tampered") return Label::Tampered;
  throw std::invalid_argument("unknown label: " + s);
}

namespace {

ExplanationSections explanation_from_json(const json& j) {
  ExplanationSections e;
  e.type = j.at("type").get<std::string>();
  e.areas = j.at("areas").get<std::string>();
  e.tampered_content = j.at("tampered_content").get<std::string>();
  e.visual_inconsistencies = j.at("visual_inconsistencies").get<std::string>();
  e.summary = j.at("summary").get<std::string>();
  return e;
}

json explanation_to_json(const ExplanationSections& e) {
  // Section order is fixed; ordered_json preserves it on disk.
  nlohmann::ordered_json j;
  j["type"] = e.type;
  j["areas"] = e.areas;
  j["tampered_content"] = e.tampered_content;
  j["visual_inconsistencies"] = e.visual_inconsistencies;
  j["summary"] = e.summary;
  return j;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("manifest not found: " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  std::string line;
  std::set<std::string> ids;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where =
        path.string() + ":" + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(where + "malformed record: " + e.what());
    }
    SampleRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      rec.image_path = m.root / j.at("image").get<std::string>();
      rec.label = label_from_string(j.at("label").get<std::string>());
      if (j.contains("mask"))
        rec.mask_path = m.root / j.at("mask").get<std::string>();
      if (j.contains("explanation"))
        rec.explanation = explanation_from_json(j.at("explanation"));
    } catch (const json::exception& e) {
      throw std::runtime_error(where + "malformed record: " + e.what());
    }
    if (!ids.insert(rec.id).second)
      throw std::runtime_error(where + "duplicate id: " + rec.id);
    if (rec.label == Label::Tampered && !rec.mask_path)
      throw std::runtime_error(where + "tampered record lacks mask_path");
    if (!std::filesystem::exists(rec.image_path))
      throw std::runtime_error(where + "image not found: " +
                               rec.image_path.string());
    if (rec.mask_path && !std::filesystem::exists(*rec.mask_path))
      throw std::runtime_error(where + "mask not found: " +
                               rec.mask_path->string());
    m.records.push_back(std::move(rec));
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest: " + path.string());
  for (const auto& rec : manifest.records) {
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    j["image"] =
        std::filesystem::relative(rec.image_path, manifest.root).string();
    j["label"] = label_to_string(rec.label);
    if (rec.mask_path)
      j["mask"] =
          std::filesystem::relative(*rec.mask_path, manifest.root).string();
    if (rec.explanation) j["explanation"] = explanation_to_json(*rec.explanation);
    os << j.dump() << "\n";
  }
}

std::array<DatasetManifest, 3> split_dataset(
    const DatasetManifest& manifest, const std::array<double, 3>& ratios,
    uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (r <= 0.0) throw std::invalid_argument("split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must sum to 1");

  std::array<std::vector<size_t>, 3> by_label;
  for (size_t i = 0; i < manifest.records.size(); ++i)
    by_label[static_cast<int>(manifest.records[i].label)].push_back(i);

  std::array<std::vector<size_t>, 3> splits;  // record indices per split
  for (int cls = 0; cls < 3; ++cls) {
    auto idx = by_label[cls];
    if (idx.empty()) continue;
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<uint64_t>(cls));
    std::shuffle(idx.begin(), idx.end(), rng);

    // Largest-remainder rounding of n * ratio per split.
    const long n = static_cast<long>(idx.size());
    std::array<long, 3> counts{};
    std::array<double, 3> frac{};
    long assigned = 0;
    for (int s = 0; s < 3; ++s) {
      double exact = static_cast<double>(n) * ratios[s];
      counts[s] = static_cast<long>(std::floor(exact + 1e-9));
      frac[s] = exact - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    for (long k = assigned; k < n; ++k) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (frac[s] > frac[best] + 1e-12) best = s;
      ++counts[best];
      frac[best] = -1.0;
    }
    for (int s = 0; s < 3; ++s)
      if (counts[s] == 0)
        throw std::runtime_error(
            "class '" + label_to_string(static_cast<Label>(cls)) +
            "' receives 0 samples in split " + std::to_string(s) +
            " (share rounds to zero)");
    size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (long k = 0; k < counts[s]; ++k) splits[s].push_back(idx[pos++]);
  }

  std::array<DatasetManifest, 3> out;
  for (int s = 0; s < 3; ++s) {
    std::sort(splits[s].begin(), splits[s].end());
    out[s].root = manifest.root;
    for (size_t i : splits[s]) out[s].records.push_back(manifest.records[i]);
  }
  return out;
}

ExplanationSections fixture_explanation(const std::string& shape,
                                        const std::string& quadrant,
                                        const std::string& color) {
  ExplanationSections e;
  e.type = "tampered image with a pasted region";
  e.areas = "the " + quadrant + " quadrant";
  e.tampered_content = "a " + color + " " + shape;
  e.visual_inconsistencies =
      "the " + color + " " + shape + " does not match the background palette";
  e.summary =
      "a " + color + " " + shape + " was pasted in the " + quadrant +
      " quadrant";
  return e;
}

namespace {

struct Rgb {
  double r, g, b;
};

// Palette A (benign backgrounds and shapes): cool hues, clearly separated
// from the paste palette {red, yellow, magenta}.
const Rgb kBenign[] = {{0.20, 0.45, 0.70}, {0.25, 0.60, 0.35},
                       {0.45, 0.45, 0.50}, {0.20, 0.60, 0.60},
                       {0.35, 0.35, 0.65}};

Rgb paste_color(const std::string& name) {
  if (name == "red") return {0.90, 0.10, 0.10};
  if (name == "yellow") return {0.95, 0.85, 0.10};
  return {0.90, 0.15, 0.85};  // magenta
}

void fill_background(ImageTensor& img, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 4);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  Rgb base = kBenign[pick(rng)];
  double gx = jitter(rng), gy = jitter(rng);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double fy = static_cast<double>(y) / img.height;
      double fx = static_cast<double>(x) / img.width;
      img.at(y, x, 0) = std::clamp(base.r + gx * fx + gy * fy, 0.0, 1.0);
      img.at(y, x, 1) = std::clamp(base.g + gx * fy, 0.0, 1.0);
      img.at(y, x, 2) = std::clamp(base.b + gy * fx, 0.0, 1.0);
    }
  // A few benign shapes from the same palette.
  std::uniform_int_distribution<int> nshapes(1, 3);
  std::uniform_int_distribution<int> coord(0, img.width - 1);
  std::uniform_int_distribution<int> side(8, 20);
  int n = nshapes(rng);
  for (int k = 0; k < n; ++k) {
    Rgb c = kBenign[pick(rng)];
    int cx = coord(rng), cy = coord(rng), s = side(rng);
    bool ellipse = (pick(rng) % 2) == 0;
    for (int y = std::max(0, cy - s / 2);
         y < std::min(img.height, cy + s / 2); ++y)
      for (int x = std::max(0, cx - s / 2);
           x < std::min(img.width, cx + s / 2); ++x) {
        if (ellipse) {
          double dy = (y - cy + 0.5) / (s / 2.0);
          double dx = (x - cx + 0.5) / (s / 2.0);
          if (dx * dx + dy * dy > 1.0) continue;
        }
        img.at(y, x, 0) = c.r;
        img.at(y, x, 1) = c.g;
        img.at(y, x, 2) = c.b;
      }
  }
}

// Pastes a foreign shape fully inside the chosen quadrant; returns its
// footprint. The mask is written from the same coordinates as the paint.
BinaryMask paste_shape(ImageTensor& img, const std::string& shape,
                       int quadrant, const Rgb& color, int side,
                       std::mt19937_64& rng) {
  const int half = img.width / 2;
  side = std::min(side, half - 2);
  const int qx = (quadrant % 2) * half;
  const int qy = (quadrant / 2) * half;
  std::uniform_int_distribution<int> off(1, half - side - 1);
  const int x0 = qx + off(rng);
  const int y0 = qy + off(rng);

  BinaryMask mask(img.height, img.width);
  const double a = side / 2.0;
  const double cx = x0 + a, cy = y0 + a;
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) {
      if (shape == "ellipse") {
        double dx = (x + 0.5 - cx) / a, dy = (y + 0.5 - cy) / a;
        if (dx * dx + dy * dy > 1.0) continue;
      }
      img.at(y, x, 0) = color.r;
      img.at(y, x, 1) = color.g;
      img.at(y, x, 2) = color.b;
      mask.set(y, x, true);
    }
  return mask;
}

}  // namespace

DatasetManifest generate_fixture(const FixtureConfig& config, uint64_t seed,
                                 const std::filesystem::path& out_dir) {
  if (config.image_size < 16 || config.image_size % 2 != 0)
    throw std::invalid_argument("fixture image_size must be even and >= 16");
  if (config.min_shape < 4 || config.max_shape < config.min_shape)
    throw std::invalid_argument("bad fixture shape size range");
  std::filesystem::create_directories(out_dir / "images");
  std::filesystem::create_directories(out_dir / "masks");

  DatasetManifest m;
  m.root = out_dir;
  std::mt19937_64 rng(seed);

  auto emit = [&](Label label, int index) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "%s_%04d",
                  label == Label::Real ? "real"
                  : label == Label::FullySynthetic ? "synth"
                                                   : "tamp",
                  index);
    SampleRecord rec;
    rec.id = idbuf;
    rec.label = label;
    rec.image_path = out_dir / "images" / (rec.id + std::string(".png"));

    ImageTensor img(config.image_size, config.image_size);
    if (label == Label::FullySynthetic) {
      fill_background(img, rng);
      std::uniform_real_distribution<double> noise(-0.5, 0.5);
      for (auto& v : img.values) v = std::clamp(v + noise(rng), 0.0, 1.0);
    } else {
      fill_background(img, rng);
    }

    if (label == Label::Tampered) {
      std::uniform_int_distribution<int> pick_shape(0, 1);
      std::uniform_int_distribution<int> pick_quadrant(0, 3);
      std::uniform_int_distribution<int> pick_color(0, 2);
      std::uniform_int_distribution<int> pick_side(config.min_shape,
                                                   config.max_shape);
      const std::string shape = kFixtureShapes[pick_shape(rng)];
      const int quadrant = pick_quadrant(rng);
      const std::string color = kFixtureColors[pick_color(rng)];
      BinaryMask mask;
      do {
        mask = paste_shape(img, shape, quadrant, paste_color(color),
                           pick_side(rng), rng);
      } while (mask.count() == 0);
      rec.mask_path = out_dir / "masks" / (rec.id + std::string(".png"));
      png::write_file(*rec.mask_path, png::encode_mask(mask));
      rec.explanation =
          fixture_explanation(shape, kFixtureQuadrants[quadrant], color);
    }

    png::write_file(rec.image_path, png::encode_image(img));
    m.records.push_back(std::move(rec));
  };

  for (int i = 0; i < config.count_real; ++i) emit(Label::Real, i);
  for (int i = 0; i < config.count_full_synthetic; ++i)
    emit(Label::FullySynthetic, i);
  for (int i = 0; i < config.count_tampered; ++i) emit(Label::Tampered, i);

  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

ImageTensor load_image(const SampleRecord& rec) {
  return png::decode_image(png::read_file(rec.image_path));
}

BinaryMask load_mask(const SampleRecord& rec, int height, int width) {
  if (!rec.mask_path) return BinaryMask(height, width);
  BinaryMask mask = png::decode_mask(png::read_file(*rec.mask_path));
  if (mask.height != height || mask.width != width)
    throw std::runtime_error("mask dimensions differ from image for sample " +
                             rec.id);
  if (rec.label == Label::Real && mask.count() != 0)
    throw std::runtime_error("real sample has nonzero mask: " + rec.id);
  return mask;
}

}  // namespace ifdl::data
