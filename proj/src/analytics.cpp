#include "harborscan/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

namespace harborscan {

std::optional<int> AxisSpec::bin_of(double v) const {
  if (!(v >= min) || !(v <= max)) return std::nullopt;
  const double t = (v - min) / (max - min) * bins;
  const int i = static_cast<int>(std::floor(t));
  return std::clamp(i, 0, bins - 1);
}

DensityGrid2D::DensityGrid2D(AxisSpec xs, AxisSpec ys) : x(xs), y(ys) {
  if (x.bins < 1 || y.bins < 1) throw std::invalid_argument("density grid needs at least one bin per axis");
  if (!(x.max > x.min) || !(y.max > y.min)) throw std::invalid_argument("density grid axis range is empty");
  counts.assign(static_cast<std::size_t>(x.bins) * y.bins, 0);
}

void DensityGrid2D::add(double xv, double yv) {
  ++total;
  const auto xi = x.bin_of(xv);
  const auto yi = y.bin_of(yv);
  if (!xi || !yi) {
    ++overflow;
    return;
  }
  ++counts[static_cast<std::size_t>(*yi) * x.bins + *xi];
}

std::uint64_t DensityGrid2D::binned() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::string DensityGrid2D::to_csv() const {
  std::string out = "x_bin,y_bin,count\n";
  for (int yi = 0; yi < y.bins; ++yi) {
    for (int xi = 0; xi < x.bins; ++xi) {
      out += std::to_string(xi) + ',' + std::to_string(yi) + ',' + std::to_string(at(xi, yi)) + '\n';
    }
  }
  return out;
}

ClassHistogram class_counts(std::span<const LabeledImage> images, std::size_t num_classes) {
  ClassHistogram h;
  h.counts.assign(num_classes, 0);
  h.fractions.assign(num_classes, 0.0);
  for (const auto& img : images) {
    if (img.annotated) ++h.images;
    for (const auto& r : img.records) {
      if (static_cast<std::size_t>(r.class_id) >= num_classes) {
        throw std::out_of_range("class id " + std::to_string(r.class_id) + " outside histogram");
      }
      ++h.counts[static_cast<std::size_t>(r.class_id)];
      ++h.total;
    }
  }
  if (h.total > 0) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      h.fractions[c] = static_cast<double>(h.counts[c]) / static_cast<double>(h.total);
    }
  }
  return h;
}

DensityGrid2D density_wh(std::span<const LabeledImage> images, int bins_w, int bins_h,
                         std::optional<int> class_filter) {
  DensityGrid2D g(AxisSpec{0.0, 1.0, bins_w}, AxisSpec{0.0, 1.0, bins_h});
  for (const auto& img : images) {
    for (const auto& r : img.records) {
      if (class_filter && r.class_id != *class_filter) continue;
      g.add(r.box.w, r.box.h);
    }
  }
  return g;
}

DensityGrid2D density_ar_area(std::span<const LabeledImage> images, int bins_ar, int bins_area, double ar_max,
                              std::optional<int> class_filter) {
  DensityGrid2D g(AxisSpec{0.0, ar_max, bins_ar}, AxisSpec{0.0, 1.0, bins_area});
  for (const auto& img : images) {
    for (const auto& r : img.records) {
      if (class_filter && r.class_id != *class_filter) continue;
      const BoxStats s = box_stats(r.box);
      g.add(s.ar, s.area_norm);
    }
  }
  return g;
}

std::optional<int> dominant_class(const LabeledImage& img) {
  if (img.records.empty()) return std::nullopt;
  std::map<int, int> freq;
  for (const auto& r : img.records) ++freq[r.class_id];
  int best = freq.begin()->first;
  int best_n = freq.begin()->second;
  for (const auto& [c, n] : freq) {
    if (n > best_n) {
      best = c;
      best_n = n;
    }
  }
  return best;
}

SplitResult stratified_split(std::span<const LabeledImage> images, std::size_t num_classes, double test_fraction,
                             std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) throw std::invalid_argument("test fraction outside [0, 1]");

  // Key -1 holds annotated images without any record.
  std::map<int, std::vector<const LabeledImage*>> groups;
  for (const auto& img : images) {
    if (!img.annotated) continue;
    groups[dominant_class(img).value_or(-1)].push_back(&img);
  }
  if (groups.empty()) throw EmptyDatasetError();

  SplitResult out;
  out.train_objects.assign(num_classes, 0);
  out.test_objects.assign(num_classes, 0);

  std::mt19937_64 rng(seed);
  for (auto& [cls, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const LabeledImage* a, const LabeledImage* b) { return a->id < b->id; });
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i) {
      const bool to_test = i < n_test;
      (to_test ? out.test : out.train).push_back(members[i]->id);
      auto& objs = to_test ? out.test_objects : out.train_objects;
      for (const auto& r : members[i]->records) {
        if (static_cast<std::size_t>(r.class_id) < num_classes) ++objs[static_cast<std::size_t>(r.class_id)];
      }
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<std::optional<double>> test_shares(const SplitResult& split) {
  std::vector<std::optional<double>> out(split.test_objects.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const std::size_t total = split.test_objects[c] + split.train_objects[c];
    if (total > 0) out[c] = static_cast<double>(split.test_objects[c]) / static_cast<double>(total);
  }
  return out;
}

std::string histogram_json(const ClassHistogram& hist, const ClassList& classes) {
  nlohmann::ordered_json j;
  j["total_objects"] = hist.total;
  j["annotated_images"] = hist.images;
  auto& arr = j["classes"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < hist.counts.size(); ++c) {
    nlohmann::ordered_json row;
    row["class_id"] = c;
    row["name"] = c < classes.size() ? classes.names()[c] : std::string();
    row["count"] = hist.counts[c];
    row["fraction"] = hist.fractions[c];
    arr.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

}  // namespace harborscan
