#include "harborscan/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "harborscan/annotation.hpp"

namespace harborscan {

namespace {

bool shape_less(const Shape& a, const Shape& b) {
  if (a.area() != b.area()) return a.area() < b.area();
  if (a.w != b.w) return a.w < b.w;
  return a.h < b.h;
}

// Nearest centroid; ties go to the lowest index.
int nearest(const Shape& s, std::span<const Shape> centroids, AnchorMetric metric, double* dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = shape_distance(s, centroids[j], metric);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

double assign_all(std::span<const Shape> shapes, std::span<const Shape> centroids, AnchorMetric metric,
                  std::vector<int>& assignment) {
  double sum = 0.0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    double d = 0.0;
    assignment[i] = nearest(shapes[i], centroids, metric, &d);
    sum += d;
  }
  return sum / static_cast<double>(shapes.size());
}

std::vector<Shape> seed_plus_plus(std::span<const Shape> shapes, int k, AnchorMetric metric, std::mt19937_64& rng) {
  const std::size_t n = shapes.size();
  std::vector<Shape> centroids;
  std::vector<bool> taken(n, false);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t pick = first(rng);
  taken[pick] = true;
  centroids.push_back(shapes[pick]);

  std::vector<double> d2(n);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) {
        d2[i] = 0.0;
        continue;
      }
      double d = 0.0;
      nearest(shapes[i], centroids, metric, &d);
      d2[i] = d * d;
      total += d2[i];
    }
    if (total > 0.0) {
      std::discrete_distribution<std::size_t> dist(d2.begin(), d2.end());
      pick = dist(rng);
    } else {
      // Every remaining shape coincides with a centroid: take any untaken index.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) free.push_back(i);
      std::uniform_int_distribution<std::size_t> u(0, free.size() - 1);
      pick = free[u(rng)];
    }
    taken[pick] = true;
    centroids.push_back(shapes[pick]);
  }
  return centroids;
}

}  // namespace

double shape_iou(const Shape& a, const Shape& b) {
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  if (a == b) return 1.0;
  return inter / uni;
}

double shape_distance(const Shape& a, const Shape& b, AnchorMetric metric) {
  if (metric == AnchorMetric::Euclidean) return std::hypot(a.w - b.w, a.h - b.h);
  return 1.0 - shape_iou(a, b);
}

double mean_nearest_distance(std::span<const Shape> shapes, std::span<const Shape> centroids, AnchorMetric metric) {
  if (shapes.empty() || centroids.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : shapes) {
    double d = 0.0;
    nearest(s, centroids, metric, &d);
    sum += d;
  }
  return sum / static_cast<double>(shapes.size());
}

void sort_anchors(std::vector<Shape>& anchors) { std::sort(anchors.begin(), anchors.end(), shape_less); }

AnchorSet kmeans_anchors(std::span<const Shape> shapes, const ClusterConfig& cfg) {
  if (cfg.k < 1 || cfg.max_iter < 1) throw std::invalid_argument("k and max_iter must be >= 1");
  if (shapes.size() < static_cast<std::size_t>(cfg.k)) {
    throw AnchorError(AnchorError::Kind::TooFewShapes, "need at least " + std::to_string(cfg.k) + " shapes, got " +
                                                           std::to_string(shapes.size()));
  }
  for (const auto& s : shapes) {
    if (!(s.w > 0.0) || !(s.h > 0.0) || !std::isfinite(s.w) || !std::isfinite(s.h)) {
      throw AnchorError(AnchorError::Kind::DegenerateShape, "shape with non-positive width or height");
    }
  }

  const std::size_t n = shapes.size();
  const auto k = static_cast<std::size_t>(cfg.k);
  std::mt19937_64 rng(cfg.seed);
  std::vector<Shape> centroids = seed_plus_plus(shapes, cfg.k, cfg.metric, rng);

  AnchorSet out;
  std::vector<int> assignment(n, -1);
  std::vector<int> previous;
  double moved = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    double cost = assign_all(shapes, centroids, cfg.metric, assignment);

    // Empty-cluster repair: move the centroid onto the shape farthest from
    // its own centroid, then reassign. Repairs only touch member-less
    // clusters, so the cost cannot rise.
    for (std::size_t guard = 0; guard < k; ++guard) {
      std::vector<std::size_t> members(k, 0);
      for (int a : assignment) ++members[static_cast<std::size_t>(a)];
      std::vector<bool> used(n, false);
      bool repaired = false;
      for (std::size_t j = 0; j < k; ++j) {
        if (members[j] != 0) continue;
        std::size_t far = n;
        double far_d = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (used[i]) continue;
          const double d = shape_distance(shapes[i], centroids[static_cast<std::size_t>(assignment[i])], cfg.metric);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        if (far == n) continue;
        used[far] = true;
        centroids[j] = shapes[far];
        repaired = true;
      }
      if (!repaired) break;
      cost = assign_all(shapes, centroids, cfg.metric, assignment);
    }

    out.cost_trace.push_back(cost);
    out.iterations = iter + 1;
    if (assignment == previous && moved <= cfg.tol) break;
    previous = assignment;

    std::vector<double> sw(k, 0.0), sh(k, 0.0), old_cost(k, 0.0);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(assignment[i]);
      sw[j] += shapes[i].w;
      sh[j] += shapes[i].h;
      ++cnt[j];
      old_cost[j] += shape_distance(shapes[i], centroids[j], cfg.metric);
    }
    moved = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (cnt[j] == 0) continue;
      const Shape mean{sw[j] / static_cast<double>(cnt[j]), sh[j] / static_cast<double>(cnt[j])};
      double new_cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (static_cast<std::size_t>(assignment[i]) == j) new_cost += shape_distance(shapes[i], mean, cfg.metric);
      }
      if (new_cost <= old_cost[j]) {
        moved = std::max({moved, std::abs(mean.w - centroids[j].w), std::abs(mean.h - centroids[j].h)});
        centroids[j] = mean;
      }
    }
  }

  sort_anchors(centroids);
  out.anchors = centroids;
  out.assignment.assign(n, 0);
  out.final_cost = assign_all(shapes, centroids, cfg.metric, out.assignment);
  if (out.final_cost < out.cost_trace.back()) out.cost_trace.push_back(out.final_cost);
  if (out.anchors.size() == 9) out.scale_assignment = assign_scales(out.anchors);
  return out;
}

ScaleAssignment assign_scales(std::span<const Shape> anchors) {
  if (anchors.size() != 9) {
    throw AnchorError(AnchorError::Kind::WrongAnchorCount,
                      "expected 9 anchors, got " + std::to_string(anchors.size()));
  }
  std::array<int, 9> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return shape_less(anchors[a], anchors[b]); });
  ScaleAssignment sa{};
  for (int s = 0; s < 3; ++s)
    for (int i = 0; i < 3; ++i) sa[s][i] = order[s * 3 + i];
  return sa;
}

std::string anchors_text(const AnchorSet& set) {
  std::string out;
  for (const auto& a : set.anchors) out += format_fixed6(a.w) + "," + format_fixed6(a.h) + "\n";
  return out;
}

std::string anchors_json(const AnchorSet& set, const ClusterConfig& cfg) {
  nlohmann::ordered_json j;
  j["k"] = cfg.k;
  j["metric"] = cfg.metric == AnchorMetric::Iou ? "iou" : "euclidean";
  j["seed"] = cfg.seed;
  j["iterations"] = set.iterations;
  j["final_cost"] = set.final_cost;
  auto& anchors = j["anchors"] = nlohmann::ordered_json::array();
  for (const auto& a : set.anchors) anchors.push_back({a.w, a.h});
  if (set.anchors.size() == 9) {
    auto& scales = j["scales"] = nlohmann::ordered_json::array();
    for (int s = 0; s < 3; ++s) {
      nlohmann::ordered_json row;
      row["stride"] = kScaleStrides[static_cast<std::size_t>(s)];
      row["anchors"] = set.scale_assignment[static_cast<std::size_t>(s)];
      scales.push_back(std::move(row));
    }
  }
  return j.dump(2) + "\n";
}

std::vector<Shape> parse_anchors_text(const std::string& text) {
  std::vector<Shape> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("anchors line " + std::to_string(line_no) + ": expected w,h");
    try {
      std::size_t used = 0;
      Shape s{std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1), &used)};
      if (!(s.w > 0.0) || !(s.h > 0.0)) throw std::invalid_argument("non-positive");
      out.push_back(s);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("anchors line " + std::to_string(line_no) + ": invalid shape");
    }
  }
  return out;
}

}  // namespace harborscan
