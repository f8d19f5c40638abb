#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace harborscan {

struct Shape {
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

enum class AnchorMetric {
  Iou,        // d = 1 - IoU of origin-centered boxes
  Euclidean,  // d = |(w, h) - (w', h')|
};

struct ClusterConfig {
  int k = 9;
  int max_iter = 300;
  std::uint64_t seed = 0;
  // Converged when assignments are unchanged and no centroid moved more
  // than tol (component-wise).
  double tol = 1e-12;
  AnchorMetric metric = AnchorMetric::Iou;
};

// Three anchor indices per detection scale. scales[0] goes to the finest
// grid (stride 8), scales[2] to the coarsest (stride 32).
using ScaleAssignment = std::array<std::array<int, 3>, 3>;

inline constexpr std::array<int, 3> kScaleStrides = {8, 16, 32};

struct AnchorSet {
  std::vector<Shape> anchors;       // ascending by area (ties: width, then height)
  ScaleAssignment scale_assignment{};  // meaningful only when anchors.size() == 9
  double final_cost = 0.0;          // mean distance at termination
  std::vector<double> cost_trace;   // mean distance after each assignment step
  std::vector<int> assignment;      // cluster (sorted index) of every input shape
  int iterations = 0;
};

class AnchorError : public std::runtime_error {
 public:
  enum class Kind { TooFewShapes, DegenerateShape, WrongAnchorCount };
  AnchorError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// IoU of two boxes sharing a corner (origin-centered).
double shape_iou(const Shape& a, const Shape& b);
double shape_distance(const Shape& a, const Shape& b, AnchorMetric metric);

// Mean distance of every shape to its nearest centroid.
double mean_nearest_distance(std::span<const Shape> shapes, std::span<const Shape> centroids, AnchorMetric metric);

// k-means over box shapes with k-means++ seeding. The centroid update is
// the component-wise member mean, applied per cluster only when it does not
// raise that cluster's total distance, so cost_trace never increases.
AnchorSet kmeans_anchors(std::span<const Shape> shapes, const ClusterConfig& cfg);

// Sorts by area (ties: width, then height) and chunks into three triples.
ScaleAssignment assign_scales(std::span<const Shape> sorted_anchors);

// Sorts anchors in place by (area, w, h).
void sort_anchors(std::vector<Shape>& anchors);

// Nine "w,h" lines with six decimals.
std::string anchors_text(const AnchorSet& set);
// Scale assignment, strides, final cost, iteration count.
std::string anchors_json(const AnchorSet& set, const ClusterConfig& cfg);

// Parses the "w,h" text format back into shapes.
std::vector<Shape> parse_anchors_text(const std::string& text);

}  // namespace harborscan
