#include "harborscan/decode.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace harborscan {

void HeadConfig::validate() const {
  if (input_size <= 0 || boxes_per_cell <= 0 || num_classes <= 0 || strides.empty()) {
    throw std::invalid_argument("head config needs positive input size, boxes and classes");
  }
  for (int s : strides) {
    if (s <= 0 || input_size % s != 0) {
      throw std::invalid_argument("input size " + std::to_string(input_size) + " not divisible by stride " +
                                  std::to_string(s));
    }
  }
}

void DecodeParams::validate() const {
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0) ||
      !(nms_iou_threshold >= 0.0 && nms_iou_threshold <= 1.0)) {
    throw std::invalid_argument("decode thresholds must lie in [0, 1]");
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<Candidate> decode_scale(const HeadTensor& raw, std::span<const Shape> anchors, const HeadConfig& cfg,
                                    double confidence_threshold, std::size_t scale_index) {
  const int S = raw.grid;
  if (scale_index < cfg.strides.size() && S != cfg.grid(scale_index)) {
    throw ShapeMismatch("grid " + std::to_string(S) + " does not match stride " +
                        std::to_string(cfg.strides[scale_index]));
  }
  if (raw.boxes != cfg.boxes_per_cell || raw.attrs != cfg.attrs()) {
    throw ShapeMismatch("tensor depth " + std::to_string(raw.boxes) + "x" + std::to_string(raw.attrs) +
                        " does not match B x (5+C) = " + std::to_string(cfg.boxes_per_cell) + "x" +
                        std::to_string(cfg.attrs()));
  }
  if (raw.values.size() != static_cast<std::size_t>(S) * S * raw.boxes * raw.attrs) {
    throw ShapeMismatch("tensor value count does not match its shape");
  }
  if (anchors.size() != static_cast<std::size_t>(raw.boxes)) {
    throw ShapeMismatch("expected " + std::to_string(raw.boxes) + " anchors, got " + std::to_string(anchors.size()));
  }

  std::vector<Candidate> out;
  const std::uint64_t scale_base = static_cast<std::uint64_t>(scale_index) << 40;
  for (int cy = 0; cy < S; ++cy) {
    for (int cx = 0; cx < S; ++cx) {
      for (int b = 0; b < raw.boxes; ++b) {
        const double objectness = sigmoid(raw.at(cy, cx, b, 4));
        if (objectness < confidence_threshold) continue;  // class scores are <= 1
        const BoxNorm box{(sigmoid(raw.at(cy, cx, b, 0)) + cx) / S, (sigmoid(raw.at(cy, cx, b, 1)) + cy) / S,
                          anchors[static_cast<std::size_t>(b)].w * std::exp(static_cast<double>(raw.at(cy, cx, b, 2))),
                          anchors[static_cast<std::size_t>(b)].h * std::exp(static_cast<double>(raw.at(cy, cx, b, 3)))};
        const std::uint64_t order =
            scale_base + (static_cast<std::uint64_t>(cy) * S + static_cast<std::uint64_t>(cx)) * raw.boxes + b;
        for (int c = 0; c < cfg.num_classes; ++c) {
          const double conf = objectness * sigmoid(raw.at(cy, cx, b, 5 + c));
          if (conf < confidence_threshold) continue;
          out.push_back(Candidate{Detection{c, conf, box}, objectness, order});
        }
      }
    }
  }
  return out;
}

namespace {

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.det.confidence != b.det.confidence) return a.det.confidence > b.det.confidence;
  const double aa = a.det.box.w * a.det.box.h;
  const double ab = b.det.box.w * b.det.box.h;
  if (aa != ab) return aa > ab;
  if (a.order != b.order) return a.order < b.order;
  return a.det.class_id < b.det.class_id;
}

}  // namespace

std::vector<Detection> nms(std::vector<Candidate> candidates, const DecodeParams& params) {
  params.validate();
  std::map<int, std::vector<Candidate>> by_class;
  for (auto& c : candidates) by_class[c.det.class_id].push_back(std::move(c));

  std::vector<Candidate> kept;
  for (auto& [cls, list] : by_class) {
    std::sort(list.begin(), list.end(), ranks_before);
    std::vector<bool> suppressed(list.size(), false);
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (suppressed[i]) continue;
      kept.push_back(list[i]);
      const BoxPixel ki = corners(list[i].det.box);
      for (std::size_t j = i + 1; j < list.size(); ++j) {
        if (!suppressed[j] && iou(ki, corners(list[j].det.box)) >= params.nms_iou_threshold) suppressed[j] = true;
      }
    }
  }
  std::sort(kept.begin(), kept.end(), ranks_before);
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (auto& k : kept) out.push_back(k.det);
  return out;
}

std::vector<Detection> nms(std::span<const Detection> detections, const DecodeParams& params) {
  std::vector<Candidate> c;
  c.reserve(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) c.push_back(Candidate{detections[i], 0.0, i});
  return nms(std::move(c), params);
}

std::vector<Shape> anchors_for_stride(const AnchorSet& anchors, int stride) {
  if (anchors.anchors.size() != 9) throw ShapeMismatch("decoding needs exactly 9 anchors");
  for (std::size_t s = 0; s < kScaleStrides.size(); ++s) {
    if (kScaleStrides[s] != stride) continue;
    std::vector<Shape> out;
    for (int i : anchors.scale_assignment[s]) out.push_back(anchors.anchors.at(static_cast<std::size_t>(i)));
    return out;
  }
  throw ShapeMismatch("no anchors for stride " + std::to_string(stride));
}

std::vector<Detection> decode_head(const RawHeadOutput& raw, const AnchorSet& anchors, const HeadConfig& cfg,
                                   const DecodeParams& params) {
  cfg.validate();
  params.validate();
  if (raw.scales.size() != cfg.strides.size()) {
    throw ShapeMismatch("expected " + std::to_string(cfg.strides.size()) + " scales, got " +
                        std::to_string(raw.scales.size()));
  }
  std::vector<Candidate> all;
  for (std::size_t s = 0; s < raw.scales.size(); ++s) {
    const auto a = anchors_for_stride(anchors, cfg.strides[s]);
    auto part = decode_scale(raw.scales[s], a, cfg, params.confidence_threshold, s);
    for (auto& c : part) {
      auto clipped = clip_unit(c.det.box);
      // Sides below 1e-6 vanish in the six-decimal detections format.
      if (clipped && clipped->w >= kMinDecodedSide && clipped->h >= kMinDecodedSide) {
        c.det.box = *clipped;
        all.push_back(std::move(c));
      }
    }
  }
  return nms(std::move(all), params);
}

}  // namespace harborscan
