#pragma once

#include <optional>

namespace harborscan {

// Normalized center-format box: every field is a fraction of the image
// width or height. This is the YOLO annotation layout (cx, cy, w, h).
struct BoxNorm {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const BoxNorm&, const BoxNorm&) = default;
};

// Corner-format box in pixel units. Also used with unit scale (W = H = 1)
// for IoU on normalized boxes.
struct BoxPixel {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const;

  friend bool operator==(const BoxPixel&, const BoxPixel&) = default;
};

struct ImageMeta {
  int width = 0;
  int height = 0;

  bool valid() const { return width >= 1 && height >= 1; }
  friend bool operator==(const ImageMeta&, const ImageMeta&) = default;
};

struct BoxStats {
  double ar = 0.0;         // w / h on normalized values
  double area_norm = 0.0;  // w * h, fraction of the image area
};

// 0 <= cx, cy <= 1 and 0 < w, h <= 1.
bool is_valid(const BoxNorm& b);
bool is_valid(const BoxPixel& b);

BoxPixel to_pixel(const BoxNorm& b, const ImageMeta& m);
BoxNorm to_norm(const BoxPixel& b, const ImageMeta& m);

// Corner form on the unit square, without clipping.
BoxPixel corners(const BoxNorm& b);

// Clips the box to the unit square. Returns nullopt when nothing of it
// remains. Boxes already inside the square are returned unchanged
// (bit-for-bit), so repeated clipping is stable.
std::optional<BoxNorm> clip_unit(const BoxNorm& b);

// Intersection over union. Degenerate (zero-area) inputs yield 0.
double iou(const BoxPixel& a, const BoxPixel& b);
double iou(const BoxNorm& a, const BoxNorm& b);

// Area of the intersection, 0 when disjoint.
double intersection_area(const BoxPixel& a, const BoxPixel& b);

BoxStats box_stats(const BoxNorm& b);

// Aspect ratio measured in pixels: (w * W) / (h * H).
double pixel_aspect_ratio(const BoxNorm& b, const ImageMeta& m);

// Mirror about the vertical axis: cx -> 1 - cx.
BoxNorm flip_h(const BoxNorm& b);

}  // namespace harborscan
