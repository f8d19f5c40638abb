#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace harborscan {

// Interleaved 8-bit image, row-major, `channels` bytes per pixel
// (1 = gray, 3 = BGR as delivered by the codec).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Decodes PNG/JPEG. Keeps 1 or 3 channels (alpha is dropped).
// Throws std::runtime_error when the file cannot be decoded.
Image load_image(const std::filesystem::path& p);

// Encoding is chosen by extension.
void save_image(const std::filesystem::path& p, const Image& img);

}  // namespace harborscan
