#include "harborscan/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace harborscan {

void AugmentSpec::validate() const {
  if (!(scale_min > 0.0) || !(scale_max >= scale_min)) {
    throw std::invalid_argument("augment scale range must satisfy 0 < scale_min <= scale_max");
  }
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw std::invalid_argument("flip_probability outside [0, 1]");
  }
  if (!(min_visibility >= 0.0 && min_visibility <= 1.0)) throw std::invalid_argument("min_visibility outside [0, 1]");
}

Sample scale_preserve_ar(const Image& image, std::span<const AnnotationRecord> records, double s,
                         std::uint8_t pad_value, double min_visibility) {
  if (!(s > 0.0)) throw std::invalid_argument("scale factor must be positive");
  Sample out;
  if (s == 1.0) {
    out.image = image;
    out.records.assign(records.begin(), records.end());
    return out;
  }

  const int W = image.width;
  const int H = image.height;
  const int C = image.channels;
  out.image = Image(W, H, C, pad_value);
  const double ox = (W - s * W) / 2.0;
  const double oy = (H - s * H) / 2.0;

  for (int y = 0; y < H; ++y) {
    const double v = (y + 0.5 - oy) / s;  // continuous source row coordinate
    if (v < 0.0 || v > H) continue;
    const double sy = std::clamp(v - 0.5, 0.0, static_cast<double>(H - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, H - 1);
    const double fy = sy - y0;
    for (int x = 0; x < W; ++x) {
      const double u = (x + 0.5 - ox) / s;
      if (u < 0.0 || u > W) continue;
      const double sx = std::clamp(u - 0.5, 0.0, static_cast<double>(W - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, W - 1);
      const double fx = sx - x0;
      for (int c = 0; c < C; ++c) {
        const double top = image.at(x0, y0, c) * (1.0 - fx) + image.at(x1, y0, c) * fx;
        const double bot = image.at(x0, y1, c) * (1.0 - fx) + image.at(x1, y1, c) * fx;
        const double val = top * (1.0 - fy) + bot * fy;
        out.image.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
      }
    }
  }

  for (const auto& r : records) {
    const BoxNorm scaled{0.5 + s * (r.box.cx - 0.5), 0.5 + s * (r.box.cy - 0.5), s * r.box.w, s * r.box.h};
    const auto clipped = clip_unit(scaled);
    if (!clipped) continue;
    const double visible = (clipped->w * clipped->h) / (scaled.w * scaled.h);
    if (visible < min_visibility) continue;
    out.records.push_back(AnnotationRecord{r.class_id, *clipped});
  }
  return out;
}

Sample horizontal_flip(const Image& image, std::span<const AnnotationRecord> records) {
  Sample out;
  out.image = image;
  const int W = image.width;
  const int C = image.channels;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < W / 2; ++x) {
      for (int c = 0; c < C; ++c) std::swap(out.image.at(x, y, c), out.image.at(W - 1 - x, y, c));
    }
  }
  out.records.reserve(records.size());
  for (const auto& r : records) out.records.push_back(AnnotationRecord{r.class_id, flip_h(r.box)});
  return out;
}

Transform draw_transform(const AugmentSpec& spec, std::uint64_t draw_index, int width, int height) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(draw_index), static_cast<std::uint32_t>(draw_index >> 32)};
  std::mt19937_64 rng(seq);
  Transform t;
  t.scale = spec.scale_min == spec.scale_max
                ? spec.scale_min
                : std::uniform_real_distribution<double>(spec.scale_min, spec.scale_max)(rng);
  t.flipped = std::bernoulli_distribution(spec.flip_probability)(rng);
  t.offset_x = (width - t.scale * width) / 2.0;
  t.offset_y = (height - t.scale * height) / 2.0;
  return t;
}

AugmentedSample apply_transform(const Sample& sample, const Transform& t, std::uint8_t pad_value,
                                double min_visibility) {
  Sample scaled = scale_preserve_ar(sample.image, sample.records, t.scale, pad_value, min_visibility);
  AugmentedSample out;
  out.transform = t;
  out.transform.offset_x = (sample.image.width - t.scale * sample.image.width) / 2.0;
  out.transform.offset_y = (sample.image.height - t.scale * sample.image.height) / 2.0;
  if (t.flipped) {
    Sample flipped = horizontal_flip(scaled.image, scaled.records);
    out.image = std::move(flipped.image);
    out.records = std::move(flipped.records);
  } else {
    out.image = std::move(scaled.image);
    out.records = std::move(scaled.records);
  }
  return out;
}

AugmentedSample augment(const Sample& sample, const AugmentSpec& spec, std::uint64_t draw_index) {
  const Transform t = draw_transform(spec, draw_index, sample.image.width, sample.image.height);
  return apply_transform(sample, t, spec.pad_value, spec.min_visibility);
}

}  // namespace harborscan
