#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rnl/tensor.hpp"

namespace rnl::cli {

// One frame of an attention map as 8-bit grayscale, row-major.
struct MapImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// Min-max normalizes the whole (T,H,W,1) map to [0,255] and splits it into T
// frames. A constant map renders as mid-gray 128.
std::vector<MapImage> render_map(const FeatureClip<double>& map);

// Binary PGM (P5), maxval 255.
std::string encode_pgm(const MapImage& image);
void write_pgm(const std::filesystem::path& path, const MapImage& image);

// "t,h,w,value" rows with CRLF line ends; values printed with %.17g so they
// round-trip exactly.
std::string map_csv(const FeatureClip<double>& map);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace rnl::cli
