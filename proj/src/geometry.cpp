#include "harborscan/geometry.hpp"

#include <algorithm>

namespace harborscan {

double BoxPixel::area() const {
  const double w = x2 - x1;
  const double h = y2 - y1;
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

bool is_valid(const BoxNorm& b) {
  return b.cx >= 0.0 && b.cx <= 1.0 && b.cy >= 0.0 && b.cy <= 1.0 &&
         b.w > 0.0 && b.w <= 1.0 && b.h > 0.0 && b.h <= 1.0;
}

bool is_valid(const BoxPixel& b) {
  return b.x1 >= 0.0 && b.y1 >= 0.0 && b.x2 > b.x1 && b.y2 > b.y1;
}

BoxPixel to_pixel(const BoxNorm& b, const ImageMeta& m) {
  const double W = m.width;
  const double H = m.height;
  BoxPixel p;
  p.x1 = std::clamp((b.cx - b.w / 2.0) * W, 0.0, W);
  p.y1 = std::clamp((b.cy - b.h / 2.0) * H, 0.0, H);
  p.x2 = std::clamp((b.cx + b.w / 2.0) * W, 0.0, W);
  p.y2 = std::clamp((b.cy + b.h / 2.0) * H, 0.0, H);
  return p;
}

BoxNorm to_norm(const BoxPixel& b, const ImageMeta& m) {
  const double W = m.width;
  const double H = m.height;
  return BoxNorm{(b.x1 + b.x2) / (2.0 * W), (b.y1 + b.y2) / (2.0 * H),
                 (b.x2 - b.x1) / W, (b.y2 - b.y1) / H};
}

BoxPixel corners(const BoxNorm& b) {
  return BoxPixel{b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0,
                  b.cy + b.h / 2.0};
}

std::optional<BoxNorm> clip_unit(const BoxNorm& b) {
  const BoxPixel c = corners(b);
  if (c.x1 >= 0.0 && c.y1 >= 0.0 && c.x2 <= 1.0 && c.y2 <= 1.0 && b.w > 0.0 &&
      b.h > 0.0) {
    return b;
  }
  const BoxPixel k{std::clamp(c.x1, 0.0, 1.0), std::clamp(c.y1, 0.0, 1.0),
                   std::clamp(c.x2, 0.0, 1.0), std::clamp(c.y2, 0.0, 1.0)};
  if (!(k.x2 > k.x1) || !(k.y2 > k.y1)) return std::nullopt;
  return BoxNorm{(k.x1 + k.x2) / 2.0, (k.y1 + k.y2) / 2.0, k.x2 - k.x1,
                 k.y2 - k.y1};
}

double intersection_area(const BoxPixel& a, const BoxPixel& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BoxPixel& a, const BoxPixel& b) {
  const double aa = a.area();
  const double ab = b.area();
  if (aa <= 0.0 || ab <= 0.0) return 0.0;
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  return inter / (aa + ab - inter);
}

double iou(const BoxNorm& a, const BoxNorm& b) {
  return iou(corners(a), corners(b));
}

BoxStats box_stats(const BoxNorm& b) { return BoxStats{b.w / b.h, b.w * b.h}; }

double pixel_aspect_ratio(const BoxNorm& b, const ImageMeta& m) {
  return (b.w * m.width) / (b.h * m.height);
}

BoxNorm flip_h(const BoxNorm& b) { return BoxNorm{1.0 - b.cx, b.cy, b.w, b.h}; }

}  // namespace harborscan
