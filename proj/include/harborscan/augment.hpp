#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "harborscan/annotation.hpp"
#include "harborscan/image.hpp"

namespace harborscan {

struct AugmentSpec {
  double scale_min = 0.8;
  double scale_max = 1.2;
  double flip_probability = 0.5;
  std::uint64_t seed = 0;
  std::uint8_t pad_value = 114;
  // Boxes keeping less than this fraction of their scaled area are dropped.
  double min_visibility = 0.25;

  void validate() const;
};

// Enough to replay an augmentation on the source sample.
struct Transform {
  double scale = 1.0;
  bool flipped = false;
  // Canvas position (pixels) of the scaled content's top-left corner.
  double offset_x = 0.0;
  double offset_y = 0.0;

  friend bool operator==(const Transform&, const Transform&) = default;
};

struct Sample {
  Image image;
  std::vector<AnnotationRecord> records;
};

struct AugmentedSample {
  Image image;
  std::vector<AnnotationRecord> records;
  Transform transform;
};

// Resamples the content by s on both axes (bilinear) and centers it on a
// canvas of the original size: padded when s < 1, center-cropped when s > 1.
Sample scale_preserve_ar(const Image& image, std::span<const AnnotationRecord> records, double s,
                         std::uint8_t pad_value = 114, double min_visibility = 0.25);

// Mirrors pixels about the vertical axis and maps each box through flip_h.
Sample horizontal_flip(const Image& image, std::span<const AnnotationRecord> records);

// The deterministic draw for (spec.seed, draw_index).
Transform draw_transform(const AugmentSpec& spec, std::uint64_t draw_index, int width = 0, int height = 0);

// Scale, then flip.
AugmentedSample apply_transform(const Sample& sample, const Transform& t, std::uint8_t pad_value = 114,
                                double min_visibility = 0.25);

AugmentedSample augment(const Sample& sample, const AugmentSpec& spec, std::uint64_t draw_index);

}  // namespace harborscan
