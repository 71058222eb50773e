#pragma once

#include <string>
#include <vector>

#include "ifdl/image.hpp"

namespace ifdl::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Simple raster charts written straight to PNG; axes but no text labels
// (the paired .json sidecar carries the numbers).
void line_chart(const std::vector<Series>& series, const std::string& png_path,
                int width = 480, int height = 320);

// slices: fractions summing to ~1; drawn clockwise from 12 o'clock in the
// palette order used by line_chart.
void pie_chart(const std::vector<double>& slices, const std::string& png_path,
               int size = 320);

}  // namespace ifdl::plot
