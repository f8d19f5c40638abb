#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "harborscan/backend.hpp"
#include "harborscan/decode.hpp"
#include "harborscan/geometry.hpp"
#include "harborscan/image.hpp"

namespace harborscan {

struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // row-major luminance, 0..255
  std::int64_t index = 0;

  GrayFrame() = default;
  GrayFrame(int w, int h, std::int64_t idx = 0, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill), index(idx) {}

  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  // Bilinear sample; coordinates are clamped to the frame.
  float sample(double x, double y) const;
};

// 0.299 R + 0.587 G + 0.114 B, rounded to nearest. Expects BGR or gray input.
GrayFrame to_gray(const Image& img, std::int64_t index = 0);

class FrameTooSmall : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMinPyramidSide = 16;

// Level 0 is the input; each further level is the 2x2 box-filtered,
// 2-downsampled previous one. Levels stop early rather than shrink a side
// below kMinPyramidSide. Gradient images are kept alongside each level.
struct Pyramid {
  std::vector<GrayFrame> levels;
  std::vector<GrayFrame> grad_x;
  std::vector<GrayFrame> grad_y;
};

Pyramid build_pyramid(const GrayFrame& f, int levels);

struct TrackerConfig {
  int pyramid_levels = 3;
  int window = 15;  // odd side length of the LK integration window
  int max_iterations = 30;
  double epsilon = 0.01;  // px; stop when the update step is shorter
  int detect_every_n = 3;
  double reassoc_iou = 0.3;
  int min_alive_points = 6;
  int max_points = 25;
  // Minimum eigenvalue of the gradient matrix per window pixel below which
  // a point is considered untrackable.
  double min_eigen = 1e-2;

  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct PointFlow {
  double dx = 0.0;
  double dy = 0.0;
  bool tracked = false;
};

// Coarse-to-fine iterative Lucas-Kanade for each point (level-0 pixels).
// A point is lost when its gradient matrix is near-singular at full
// resolution or it leaves the frame.
std::vector<PointFlow> lk_flow(const Pyramid& prev, const Pyramid& next, std::span<const Point2> points,
                               const TrackerConfig& cfg);

// Shi-Tomasi corners (min-eigenvalue ranked, spaced >= window/2 apart)
// inside the box. With fewer than min_alive_points corners, a uniform 5x5
// interior grid fills the remaining slots.
std::vector<Point2> seed_points(const BoxNorm& box, const GrayFrame& frame, const TrackerConfig& cfg);

struct TrackPoint {
  Point2 pos;
  bool alive = true;
};

struct TrackState {
  int id = 0;
  int class_id = 0;
  BoxNorm box;
  std::vector<TrackPoint> points;
  int age = 0;  // frames since the last detector confirmation
  double confidence = 0.0;
  int missed_cycles = 0;  // consecutive detector frames without a match

  std::size_t alive_count() const;
};

struct PropagateResult {
  TrackState state;
  bool dropped = false;
  Point2 translation;  // pixels
  double scale = 1.0;
};

// Moves the box by the median point displacement and scales it by the
// median ratio of pairwise point distances (after / before).
PropagateResult propagate_box(const TrackState& t, std::span<const PointFlow> flows, const ImageMeta& meta,
                              const TrackerConfig& cfg);

double median(std::vector<double> v);

enum class TrackSource { Detected, Tracked };

const char* to_string(TrackSource s);

struct TrackedObject {
  std::int64_t frame = 0;
  int track_id = 0;
  int class_id = 0;
  TrackSource source = TrackSource::Detected;
  double confidence = 0.0;
  BoxNorm box;
};

// Track-by-detection: the backend runs on frames whose index is a multiple
// of detect_every_n; LK carries the boxes through the frames in between.
class TrackingPipeline {
 public:
  TrackingPipeline(TrackerConfig cfg, DetectorBackend& backend);

  // Frames must arrive with strictly increasing indices and equal size.
  std::vector<TrackedObject> process(const GrayFrame& frame, const std::string& image_id);

  const std::vector<TrackState>& tracks() const { return tracks_; }

 private:
  void propagate_all(const Pyramid& next, const ImageMeta& meta);
  TrackState open_track(const Detection& d, const GrayFrame& frame);

  TrackerConfig cfg_;
  DetectorBackend& backend_;
  std::vector<TrackState> tracks_;
  Pyramid prev_;
  bool has_prev_ = false;
  std::int64_t last_index_ = 0;
  int next_id_ = 1;
};

struct FrameInput {
  GrayFrame frame;
  std::string image_id;
};

std::vector<std::vector<TrackedObject>> run_pipeline(std::span<const FrameInput> frames, DetectorBackend& backend,
                                                     const TrackerConfig& cfg);

// JSON line: frame, track_id, class_id, source, confidence, cx, cy, w, h.
std::string format_tracked(const TrackedObject& o);

struct FrameRef {
  std::filesystem::path path;
  std::string image_id;  // path relative to the frame directory / manifest
  std::int64_t index = 0;
};

// A directory of %06d.png frames, or a JSON manifest
// {"frames":[{"path":..., "index":...}, ...]} with paths relative to it.
std::vector<FrameRef> list_frames(const std::filesystem::path& source);

}  // namespace harborscan
