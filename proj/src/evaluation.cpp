#include "harborscan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

namespace harborscan {

MatchResult match_predictions(std::span<const ImageEvalInput> images, double iou_threshold,
                              std::size_t num_classes) {
  MatchResult out;
  out.iou_threshold = iou_threshold;
  out.classes.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) out.classes[c].class_id = static_cast<int>(c);

  for (std::size_t img = 0; img < images.size(); ++img) {
    const auto& in = images[img];
    for (std::size_t c = 0; c < num_classes; ++c) {
      const int cls = static_cast<int>(c);
      std::vector<BoxPixel> gts;
      for (const auto& g : in.ground_truth)
        if (g.class_id == cls) gts.push_back(corners(g.box));

      struct Pending {
        std::size_t input_index;
        double confidence;
        double best_iou;
        BoxPixel box;
      };
      std::vector<Pending> preds;
      for (std::size_t i = 0; i < in.predictions.size(); ++i) {
        const auto& p = in.predictions[i];
        if (p.class_id != cls) continue;
        Pending pd{i, p.confidence, 0.0, corners(p.box)};
        for (const auto& g : gts) pd.best_iou = std::max(pd.best_iou, iou(pd.box, g));
        preds.push_back(pd);
      }
      std::stable_sort(preds.begin(), preds.end(), [](const Pending& a, const Pending& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.best_iou != b.best_iou) return a.best_iou > b.best_iou;
        return a.input_index < b.input_index;
      });

      ClassMatch& cm = out.classes[c];
      std::vector<bool> matched(gts.size(), false);
      for (std::size_t r = 0; r < preds.size(); ++r) {
        double best = -1.0;
        std::size_t best_g = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (matched[g]) continue;
          const double v = iou(preds[r].box, gts[g]);
          if (v > best) {
            best = v;
            best_g = g;
          }
        }
        RankedOutcome o{preds[r].confidence, false, std::max(best, 0.0), img, r};
        if (best_g < gts.size() && best >= iou_threshold) {
          matched[best_g] = true;
          o.tp = true;
          ++cm.tp;
        } else {
          ++cm.fp;
        }
        cm.outcomes.push_back(o);
      }
      cm.positives += gts.size();
      cm.fn += static_cast<std::size_t>(std::count(matched.begin(), matched.end(), false));
    }
  }

  for (auto& cm : out.classes) {
    std::stable_sort(cm.outcomes.begin(), cm.outcomes.end(), [](const RankedOutcome& a, const RankedOutcome& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      if (a.image != b.image) return a.image < b.image;
      return a.rank_in_image < b.rank_in_image;
    });
  }
  return out;
}

PRCurve pr_curve(const std::vector<bool>& ranked_tp, std::size_t positives) {
  PRCurve curve;
  curve.positives = positives;
  curve.points.reserve(ranked_tp.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
    if (ranked_tp[i]) ++tp;
    const double recall = positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(i + 1);
    curve.points.push_back({recall, precision});
  }
  curve.envelope.resize(curve.points.size());
  double running = 0.0;
  for (std::size_t i = curve.points.size(); i-- > 0;) {
    running = std::max(running, curve.points[i].precision);
    curve.envelope[i] = running;
  }
  return curve;
}

PRCurve pr_curve(const ClassMatch& m) {
  std::vector<bool> flags;
  flags.reserve(m.outcomes.size());
  for (const auto& o : m.outcomes) flags.push_back(o.tp);
  return pr_curve(flags, m.positives);
}

double average_precision(const PRCurve& curve) {
  if (curve.positives == 0) throw EmptyGroundTruth();
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const double dr = curve.points[i].recall - prev_recall;
    if (dr > 0.0) ap += dr * curve.envelope[i];
    prev_recall = curve.points[i].recall;
  }
  return ap;
}

double mean_ap(std::span<const std::optional<double>> aps) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& a : aps) {
    if (!a) continue;
    sum += *a;
    ++n;
  }
  if (n == 0) throw NoDefinedClasses();
  return sum / static_cast<double>(n);
}

double mean_ap(std::span<const double> aps) {
  if (aps.empty()) throw NoDefinedClasses();
  return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

ClassMetrics class_rates(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t p = tp + fn;
  if (p == 0) throw EmptyGroundTruth();
  ClassMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.positives = p;
  m.recall = static_cast<double>(tp) / static_cast<double>(p);
  m.fnr = 1.0 - m.recall;
  m.fp_over_p = static_cast<double>(fp) / static_cast<double>(p);
  m.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  return m;
}

ClassMetrics class_rates(const ClassMatch& m) {
  ClassMetrics out = class_rates(m.tp, m.fp, m.fn);
  out.ap = average_precision(pr_curve(m));
  return out;
}

std::vector<double> default_sweep_thresholds() {
  std::vector<double> t;
  for (int pct = 50; pct <= 95; pct += 5) t.push_back(pct / 100.0);
  return t;
}

EvalReport iou_sweep(std::span<const ImageEvalInput> images, std::span<const double> thresholds,
                     std::size_t num_classes, std::span<const int> classes) {
  EvalReport rep;
  if (classes.empty()) {
    for (std::size_t c = 0; c < num_classes; ++c) rep.evaluated_classes.push_back(static_cast<int>(c));
  } else {
    rep.evaluated_classes.assign(classes.begin(), classes.end());
    for (int c : classes) {
      if (c < 0 || static_cast<std::size_t>(c) >= num_classes) throw std::out_of_range("evaluated class out of range");
    }
  }

  for (double thr : thresholds) {
    const MatchResult m = match_predictions(images, thr, num_classes);
    ThresholdReport tr;
    tr.iou_threshold = thr;
    tr.metrics.resize(num_classes);
    for (const auto& cm : m.classes) {
      tr.counts.push_back(ClassCounts{cm.tp, cm.fp, cm.fn, cm.positives});
      if (cm.positives > 0) tr.metrics[static_cast<std::size_t>(cm.class_id)] = class_rates(cm);
    }
    std::vector<std::optional<double>> aps;
    for (int c : rep.evaluated_classes) {
      const auto& mt = tr.metrics[static_cast<std::size_t>(c)];
      aps.push_back(mt ? mt->ap : std::nullopt);
    }
    try {
      tr.map = mean_ap(aps);
    } catch (const NoDefinedClasses&) {
      tr.map.reset();
    }
    rep.thresholds.push_back(std::move(tr));
  }
  return rep;
}

std::string report_json(const EvalReport& report, const ClassList& classes) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["matching_rule"] = report.matching_rule;
  j["ap_interpolation"] = report.ap_interpolation;
  j["evaluated_classes"] = report.evaluated_classes;
  auto& arr = j["thresholds"] = ordered_json::array();
  for (const auto& tr : report.thresholds) {
    ordered_json t;
    t["iou_threshold"] = tr.iou_threshold;
    t["mAP"] = tr.map ? ordered_json(*tr.map) : ordered_json(nullptr);
    auto& per = t["classes"] = ordered_json::array();
    for (std::size_t c = 0; c < tr.counts.size(); ++c) {
      ordered_json row;
      row["class_id"] = c;
      row["name"] = c < classes.size() ? classes.names()[c] : std::string();
      row["TP"] = tr.counts[c].tp;
      row["FP"] = tr.counts[c].fp;
      row["FN"] = tr.counts[c].fn;
      row["P"] = tr.counts[c].positives;
      if (const auto& m = tr.metrics[c]) {
        row["AP"] = *m->ap;
        row["FNR"] = m->fnr;
        row["FP_over_P"] = m->fp_over_p;
        row["recall"] = m->recall;
        row["precision"] = m->precision;
      } else {
        row["AP"] = nullptr;
      }
      per.push_back(std::move(row));
    }
    arr.push_back(std::move(t));
  }
  return j.dump(2) + "\n";
}

std::string report_csv(const EvalReport& report, const ClassList& classes) {
  std::string out = "threshold,class,AP,FNR,FP_over_P,TP,FP,FN\n";
  for (const auto& tr : report.thresholds) {
    for (std::size_t c = 0; c < tr.counts.size(); ++c) {
      const auto& m = tr.metrics[c];
      char thr[16];
      std::snprintf(thr, sizeof(thr), "%.2f,", tr.iou_threshold);
      out += thr;
      out += (c < classes.size() ? classes.names()[c] : std::to_string(c)) + ',';
      out += m ? format_fixed6(*m->ap) + ',' + format_fixed6(m->fnr) + ',' + format_fixed6(m->fp_over_p) : ",,";
      out += ',' + std::to_string(tr.counts[c].tp) + ',' + std::to_string(tr.counts[c].fp) + ',' +
             std::to_string(tr.counts[c].fn) + '\n';
    }
  }
  return out;
}

}  // namespace harborscan
