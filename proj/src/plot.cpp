#include "ifdl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ifdl::plot {

namespace {

struct Rgb {
  double r, g, b;
};

const Rgb kPalette[] = {
    {0.12, 0.47, 0.71}, {0.89, 0.47, 0.13}, {0.17, 0.63, 0.17},
    {0.84, 0.15, 0.16}, {0.58, 0.40, 0.74}, {0.55, 0.34, 0.29},
};
constexpr int kPaletteSize = 6;

void put(ImageTensor& img, int x, int y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.at(y, x, 0) = c.r;
  img.at(y, x, 1) = c.g;
  img.at(y, x, 2) = c.b;
}

void draw_line(ImageTensor& img, double x0, double y0, double x1, double y1,
               const Rgb& c) {
  double dx = x1 - x0, dy = y1 - y0;
  int steps = static_cast<int>(std::max(std::abs(dx), std::abs(dy))) + 1;
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    int x = static_cast<int>(std::lround(x0 + t * dx));
    int y = static_cast<int>(std::lround(y0 + t * dy));
    put(img, x, y, c);
    put(img, x + 1, y, c);  // 2px stroke so lines survive downscaling
  }
}

ImageTensor blank(int w, int h) {
  ImageTensor img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) put(img, x, y, {1.0, 1.0, 1.0});
  return img;
}

}  // namespace

void line_chart(const std::vector<Series>& series, const std::string& png_path,
                int width, int height) {
  if (series.empty()) throw std::runtime_error("line_chart: no series");
  ImageTensor img = blank(width, height);

  const int ml = 40, mr = 12, mt = 12, mb = 28;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw std::runtime_error("line_chart: x/y length mismatch in " + s.name);
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) throw std::runtime_error("line_chart: empty series");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };

  Rgb axis{0.2, 0.2, 0.2};
  draw_line(img, ml, mt, ml, height - mb, axis);
  draw_line(img, ml, height - mb, width - mr, height - mb, axis);

  for (size_t si = 0; si < series.size(); ++si) {
    const Rgb& c = kPalette[si % kPaletteSize];
    const auto& s = series[si];
    for (size_t i = 0; i + 1 < s.x.size(); ++i)
      draw_line(img, px(s.x[i]), py(s.y[i]), px(s.x[i + 1]), py(s.y[i + 1]), c);
    // legend swatch, top-right corner
    for (int dy = 0; dy < 8; ++dy)
      for (int dx = 0; dx < 8; ++dx)
        put(img, width - mr - 10, mt + 4 + static_cast<int>(si) * 12 + dy, c),
            put(img, width - mr - 10 + dx, mt + 4 + static_cast<int>(si) * 12 + dy, c);
  }
  png::write_file(png_path, png::encode_image(img));
}

void pie_chart(const std::vector<double>& slices, const std::string& png_path,
               int size) {
  if (slices.empty()) throw std::runtime_error("pie_chart: no slices");
  double total = 0.0;
  for (double s : slices) {
    if (s < 0) throw std::runtime_error("pie_chart: negative slice");
    total += s;
  }
  if (total <= 0) throw std::runtime_error("pie_chart: zero total");

  ImageTensor img = blank(size, size);
  double cx = size / 2.0, cy = size / 2.0, radius = size * 0.42;

  std::vector<double> bounds;  // cumulative angle from 12 o'clock, clockwise
  bounds.push_back(0.0);
  for (double s : slices) bounds.push_back(bounds.back() + s / total * 2 * M_PI);

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy > radius * radius) continue;
      double ang = std::atan2(dx, -dy);  // 0 at 12 o'clock, clockwise positive
      if (ang < 0) ang += 2 * M_PI;
      for (size_t i = 0; i + 1 < bounds.size(); ++i) {
        if (ang >= bounds[i] && ang < bounds[i + 1]) {
          put(img, x, y, kPalette[i % kPaletteSize]);
          break;
        }
      }
    }
  }
  png::write_file(png_path, png::encode_image(img));
}

}  // namespace ifdl::plot
