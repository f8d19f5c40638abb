#pragma once

// Reference implementations written independently of the library, used to
// cross-check it. They favour obviousness over speed.

#include <cstdint>
#include <random>
#include <vector>

#include "harborscan/anchors.hpp"
#include "harborscan/decode.hpp"

namespace hs_test {

struct Rect {
  double x1, y1, x2, y2;
};

// Point-inclusion estimate of IoU with n uniform samples over the joint
// bounding rectangle.
double iou_monte_carlo(const Rect& a, const Rect& b, int n, std::mt19937_64& rng);

// Sums one rectangle per rank cut-point k at which a true positive appears:
// width 1/P, height the best precision over all cut-points at or beyond k.
double ap_rectangle_oracle(const std::vector<bool>& ranked_tp, std::size_t positives);

// Enumerates every subset of each class's candidates and returns the one
// consistent with the greedy rule: a candidate survives iff no
// higher-priority survivor overlaps it at IoU >= thr. Returns survivor
// `order` values, sorted.
std::vector<std::uint64_t> nms_oracle(const std::vector<harborscan::Candidate>& cands, double thr);

// Cost (total 1 - IoU of origin-centred boxes) after moving any single
// shape to another cluster and recomputing both means. Returns the largest
// improvement found (positive = an improving move exists).
double best_single_move_gain(const std::vector<harborscan::Shape>& shapes, const std::vector<int>& assignment, int k);

}  // namespace hs_test
