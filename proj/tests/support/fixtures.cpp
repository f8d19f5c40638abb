#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hs_test {

namespace fs = std::filesystem;
using namespace harborscan;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          ("harborscan_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string four_classes_text() { return "cargo\nnaval\noil\ntug\n"; }

ClassList four_classes() { return ClassList({"cargo", "naval", "oil", "tug"}); }

Image solid_image(int w, int h, int channels, std::uint8_t value) {
  Image img;
  img.width = w;
  img.height = h;
  img.channels = channels;
  img.data.assign(static_cast<std::size_t>(w) * h * channels, value);
  return img;
}

Image pattern_image(int w, int h, int channels) {
  Image img = solid_image(w, h, channels, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) img.at(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 13 + c * 31) % 251);
  return img;
}

void write_png(const fs::path& p, const Image& img) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  save_image(p, img);
}

BoxNorm random_box(std::mt19937_64& rng, double min_side, double max_side) {
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(rng);
  const double h = side(rng);
  std::uniform_real_distribution<double> ux(w / 2, 1.0 - w / 2);
  std::uniform_real_distribution<double> uy(h / 2, 1.0 - h / 2);
  return BoxNorm{ux(rng), uy(rng), w, h};
}

std::vector<AnnotationRecord> random_records(std::mt19937_64& rng, int num_classes, int max_records) {
  std::uniform_int_distribution<int> count(0, max_records);
  std::uniform_int_distribution<int> cls(0, num_classes - 1);
  std::vector<AnnotationRecord> out;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) out.push_back(AnnotationRecord{cls(rng), random_box(rng, 0.01, 0.9)});
  return out;
}

GrayFrame blob_frame(int w, int h, double dx, double dy, std::uint64_t seed, std::int64_t index) {
  struct Blob {
    double x, y, s, a;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h), us(3.0, 7.0), ua(40.0, 110.0);
  std::vector<Blob> blobs;
  const int n = std::max(8, w * h / 150);
  for (int i = 0; i < n; ++i) blobs.push_back({ux(rng), uy(rng), us(rng), ua(rng)});
  GrayFrame f(w, h, index);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 30.0;
      for (const auto& b : blobs) {
        const double ex = x - dx - b.x;
        const double ey = y - dy - b.y;
        const double r2 = ex * ex + ey * ey;
        if (r2 < 36.0 * b.s * b.s) v += b.a * std::exp(-r2 / (2.0 * b.s * b.s));
      }
      f.at(x, y) = static_cast<float>(std::min(v, 255.0));
    }
  }
  return f;
}

GrayFrame ship_frame(int w, int h, double x1, double y1, double x2, double y2, std::int64_t index) {
  GrayFrame f(w, h, index);
  auto coverage = [](double lo, double hi, int p) {
    return std::clamp(std::min(hi, p + 0.5) - std::max(lo, p - 0.5), 0.0, 1.0);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double inside = coverage(x1, x2, x) * coverage(y1, y2, y);
      // Hull texture moves with the ship so interior points have gradients.
      const double tx = x - x1;
      const double ty = y - y1;
      const double hull = 170.0 + 40.0 * std::sin(tx * 0.45) * std::cos(ty * 0.6);
      f.at(x, y) = static_cast<float>(20.0 + inside * (hull - 20.0));
    }
  }
  return f;
}

}  // namespace hs_test
