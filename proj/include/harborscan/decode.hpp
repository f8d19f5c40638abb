#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "harborscan/anchors.hpp"
#include "harborscan/geometry.hpp"

namespace harborscan {

struct Detection {
  int class_id = 0;
  double confidence = 0.0;
  BoxNorm box;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Input is resized to input_size x input_size and predicted on one grid
// per stride; each cell emits boxes_per_cell x (5 + num_classes) values.
struct HeadConfig {
  int input_size = 416;
  std::vector<int> strides = {32, 16, 8};
  int boxes_per_cell = 3;
  int num_classes = 4;

  int grid(std::size_t scale) const { return input_size / strides.at(scale); }
  int attrs() const { return 5 + num_classes; }
  void validate() const;
};

// One scale of raw head output, laid out [cy][cx][anchor][attr] with
// attr = t_x, t_y, t_w, t_h, t_o, class logits...
struct HeadTensor {
  int grid = 0;
  int boxes = 0;
  int attrs = 0;
  std::vector<float> values;

  HeadTensor() = default;
  HeadTensor(int s, int b, int a) : grid(s), boxes(b), attrs(a), values(static_cast<std::size_t>(s) * s * b * a, 0.0f) {}

  std::size_t offset(int cy, int cx, int b, int attr) const {
    return ((static_cast<std::size_t>(cy) * grid + cx) * boxes + b) * attrs + attr;
  }
  float& at(int cy, int cx, int b, int attr) { return values[offset(cy, cx, b, attr)]; }
  float at(int cy, int cx, int b, int attr) const { return values[offset(cy, cx, b, attr)]; }
};

// Tensors in HeadConfig::strides order.
struct RawHeadOutput {
  std::vector<HeadTensor> scales;
};

struct DecodeParams {
  double confidence_threshold = 0.25;
  double nms_iou_threshold = 0.45;

  void validate() const;
};

// A decoded, unclipped box. `order` is the deterministic enumeration index
// (scale, cell row, cell column, anchor) used to break ties.
struct Candidate {
  Detection det;
  double objectness = 0.0;
  std::uint64_t order = 0;
};

class ShapeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double sigmoid(double x);

// Decodes one scale:
//   b_x = (sigmoid(t_x) + c_x) / S,  b_y = (sigmoid(t_y) + c_y) / S,
//   b_w = p_w * exp(t_w),            b_h = p_h * exp(t_h),
//   confidence = sigmoid(t_o) * sigmoid(class logit),
// emitting one candidate per class with confidence >= threshold.
// Anchors are normalized (w, h) pairs, one per box slot.
std::vector<Candidate> decode_scale(const HeadTensor& raw, std::span<const Shape> anchors, const HeadConfig& cfg,
                                    double confidence_threshold, std::size_t scale_index = 0);

// Greedy per-class suppression. Within a class candidates are visited by
// descending confidence (ties: larger area, then lower order); a kept box
// removes every remaining box with IoU >= nms_iou_threshold. Output is sorted
// by descending confidence.
std::vector<Detection> nms(std::vector<Candidate> candidates, const DecodeParams& params);
std::vector<Detection> nms(std::span<const Detection> detections, const DecodeParams& params);

// Anchors for the scale with the given stride, from a 9-anchor set.
std::vector<Shape> anchors_for_stride(const AnchorSet& anchors, int stride);

inline constexpr double kMinDecodedSide = 1e-6;

// All scales, clip to the unit square, drop boxes with a side below
// kMinDecodedSide, then NMS.
std::vector<Detection> decode_head(const RawHeadOutput& raw, const AnchorSet& anchors, const HeadConfig& cfg,
                                   const DecodeParams& params);

}  // namespace harborscan
