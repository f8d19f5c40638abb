#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harborscan/annotation.hpp"
#include "harborscan/dataset.hpp"

namespace harborscan {

struct ClassHistogram {
  std::vector<std::size_t> counts;  // index = class id
  std::vector<double> fractions;    // counts / total; all zero when total == 0
  std::size_t total = 0;
  std::size_t images = 0;           // annotated images contributing
};

struct AxisSpec {
  double min = 0.0;
  double max = 1.0;
  int bins = 1;

  // Left-closed/right-open bins, except the last, which includes max.
  // Returns nullopt for values outside [min, max].
  std::optional<int> bin_of(double v) const;
  double bin_lower(int i) const { return min + (max - min) * i / bins; }
};

struct DensityGrid2D {
  AxisSpec x;
  AxisSpec y;
  std::vector<std::uint64_t> counts;  // row-major, counts[yi * x.bins + xi]
  std::uint64_t overflow = 0;
  std::uint64_t total = 0;

  DensityGrid2D(AxisSpec xs, AxisSpec ys);
  std::uint64_t at(int xi, int yi) const { return counts[static_cast<std::size_t>(yi) * x.bins + xi]; }
  void add(double xv, double yv);
  std::uint64_t binned() const;

  // "x_bin,y_bin,count" rows with a header; zero cells included.
  std::string to_csv() const;
};

ClassHistogram class_counts(std::span<const LabeledImage> images, std::size_t num_classes);

// (w, h) density over the unit square. class_filter restricts to one class.
DensityGrid2D density_wh(std::span<const LabeledImage> images, int bins_w = 50, int bins_h = 50,
                         std::optional<int> class_filter = std::nullopt);

// (AR, normalized area) density over [0, ar_max] x [0, 1].
DensityGrid2D density_ar_area(std::span<const LabeledImage> images, int bins_ar = 80, int bins_area = 50,
                              double ar_max = 8.0, std::optional<int> class_filter = std::nullopt);

struct SplitResult {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::vector<std::size_t> train_objects;  // per class
  std::vector<std::size_t> test_objects;   // per class

  friend bool operator==(const SplitResult&, const SplitResult&) = default;
};

class EmptyDatasetError : public std::runtime_error {
 public:
  EmptyDatasetError() : std::runtime_error("no annotated images to split") {}
};

// The class that occurs most often in the image; ties go to the lower id.
// nullopt for an image without records.
std::optional<int> dominant_class(const LabeledImage& img);

// Images are grouped by dominant class (record-less annotated images form
// their own group); each group is shuffled with the seeded RNG and
// round(test_fraction * n) of its images go to test. Unannotated images are
// skipped. Output lists are sorted.
SplitResult stratified_split(std::span<const LabeledImage> images, std::size_t num_classes,
                             double test_fraction = 0.25, std::uint64_t seed = 0);

// Object-level test share per class (test / (train + test)); nullopt when a
// class has no objects.
std::vector<std::optional<double>> test_shares(const SplitResult& split);

// JSON summary of a histogram with class names.
std::string histogram_json(const ClassHistogram& hist, const ClassList& classes);

}  // namespace harborscan
