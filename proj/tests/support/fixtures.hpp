#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "harborscan/annotation.hpp"
#include "harborscan/image.hpp"
#include "harborscan/tracking.hpp"

namespace hs_test {

// Directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& p, const std::string& text);
std::string read_bytes(const std::filesystem::path& p);

// Four maritime categories used across fixtures.
harborscan::ClassList four_classes();
std::string four_classes_text();

harborscan::Image solid_image(int w, int h, int channels, std::uint8_t value);
// Every byte differs from its horizontal mirror.
harborscan::Image pattern_image(int w, int h, int channels);
// Writes a PNG via the codec layer.
void write_png(const std::filesystem::path& p, const harborscan::Image& img);

// Random valid box; sizes in [min_side, max_side], fully inside the unit square.
harborscan::BoxNorm random_box(std::mt19937_64& rng, double min_side = 0.02, double max_side = 0.6);
std::vector<harborscan::AnnotationRecord> random_records(std::mt19937_64& rng, int num_classes, int max_records);

// Smooth textured luminance: a sum of Gaussian blobs evaluated at (x - dx, y - dy).
harborscan::GrayFrame blob_frame(int w, int h, double dx, double dy, std::uint64_t seed, std::int64_t index = 0);

// A textured bright rectangle (the "ship") with subpixel edges on a dark,
// flat background.
harborscan::GrayFrame ship_frame(int w, int h, double x1, double y1, double x2, double y2, std::int64_t index);

}  // namespace hs_test
