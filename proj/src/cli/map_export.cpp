#include "rnl/cli/map_export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace rnl::cli {

std::vector<MapImage> render_map(const FeatureClip<double>& map) {
  if (map.c() != 1) throw DimensionError("attention map must have one channel, got " + std::to_string(map.c()));
  const auto values = map.tensor().data();
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<MapImage> frames;
  for (std::size_t t = 0; t < map.t(); ++t) {
    MapImage img{map.w(), map.h(), std::vector<std::uint8_t>(map.h() * map.w())};
    for (std::size_t h = 0; h < map.h(); ++h) {
      for (std::size_t w = 0; w < map.w(); ++w) {
        const double v = map.at(t, h, w, 0);
        const double level = hi > lo ? std::round(255.0 * (v - lo) / (hi - lo)) : 128.0;
        img.pixels[h * map.w() + w] = static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
      }
    }
    frames.push_back(std::move(img));
  }
  return frames;
}

std::string encode_pgm(const MapImage& image) {
  if (image.pixels.size() != image.width * image.height) throw ArgumentError("PGM pixel count does not match size");
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

void write_pgm(const std::filesystem::path& path, const MapImage& image) { write_text(path, encode_pgm(image)); }

std::string map_csv(const FeatureClip<double>& map) {
  std::string out = "t,h,w,value\r\n";
  char buf[64];
  for (std::size_t t = 0; t < map.t(); ++t) {
    for (std::size_t h = 0; h < map.h(); ++h) {
      for (std::size_t w = 0; w < map.w(); ++w) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g\r\n", t, h, w, map.at(t, h, w, 0));
        out += buf;
      }
    }
  }
  return out;
}

}  // namespace rnl::cli
