#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "harborscan/evaluation.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace harborscan;

namespace {

// A box of the same size shifted horizontally so that its IoU with `b` is `t`.
BoxNorm at_iou(const BoxNorm& b, double t) {
  // Overlap width o over union 2w - o equals t  =>  o = 2wt / (1 + t).
  const double o = 2.0 * b.w * t / (1.0 + t);
  return BoxNorm{b.cx + (b.w - o), b.cy, b.w, b.h};
}

std::vector<ImageEvalInput> random_instance(std::mt19937_64& rng, int classes) {
  std::uniform_int_distribution<int> n_gt(0, 5), n_pred(0, 10), cls(0, classes - 1);
  std::uniform_real_distribution<double> conf(0.0, 1.0), t(0.0, 1.0);
  std::vector<ImageEvalInput> out(2);
  for (auto& img : out) {
    const int g = n_gt(rng);
    for (int i = 0; i < g; ++i) {
      img.ground_truth.push_back({cls(rng), {0.1 + 0.16 * i, 0.5, 0.1, 0.2}});
    }
    const int p = n_pred(rng);
    for (int i = 0; i < p; ++i) {
      const int c = cls(rng);
      BoxNorm b{0.5, 0.9, 0.05, 0.05};
      if (!img.ground_truth.empty()) b = at_iou(img.ground_truth[static_cast<std::size_t>(i) % img.ground_truth.size()].box, t(rng));
      img.predictions.push_back({c, std::round(conf(rng) * 20) / 20, b});
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("perfect predictions") {
    std::vector<ImageEvalInput> in(1);
    in[0].ground_truth = {{0, {0.3, 0.3, 0.2, 0.2}}, {1, {0.7, 0.7, 0.2, 0.2}}};
    for (const auto& g : in[0].ground_truth) in[0].predictions.push_back({g.class_id, 1.0, g.box});
    const MatchResult m = match_predictions(in, 0.5, 2);
    for (const auto& c : m.classes) {
      CHECK(c.tp == 1);
      CHECK(c.fp == 0);
      CHECK(c.fn == 0);
    }
    const auto thr = default_sweep_thresholds();
    const EvalReport r = iou_sweep(in, thr, 2);
    for (const auto& t : r.thresholds) CHECK(*t.map == 1.0);
  }

  TEST_CASE("no predictions") {
    std::vector<ImageEvalInput> in(1);
    in[0].ground_truth = {{0, {0.3, 0.3, 0.2, 0.2}}};
    const MatchResult m = match_predictions(in, 0.5, 1);
    CHECK(m.classes[0].fn == 1);
    CHECK(class_rates(m.classes[0]).recall == 0.0);
    CHECK(*class_rates(m.classes[0]).ap == 0.0);
  }

  TEST_CASE("greedy hand walk") {
    std::vector<ImageEvalInput> in(1);
    const BoxNorm g1{0.25, 0.5, 0.2, 0.2}, g2{0.75, 0.5, 0.2, 0.2};
    in[0].ground_truth = {{0, g1}, {0, g2}};
    in[0].predictions = {{0, 0.9, at_iou(g1, 0.9)}, {0, 0.8, at_iou(g2, 0.6)}, {0, 0.7, at_iou(g1, 0.2)}};
    const MatchResult m = match_predictions(in, 0.5, 1);
    CHECK(m.classes[0].tp == 2);
    CHECK(m.classes[0].fp == 1);
    CHECK(m.classes[0].fn == 0);
    CHECK(m.classes[0].positives == 2);
  }

  TEST_CASE("cross-class overlap is a false positive and a miss") {
    std::vector<ImageEvalInput> in(1);
    in[0].ground_truth = {{2, {0.5, 0.5, 0.2, 0.2}}};
    in[0].predictions = {{0, 0.9, {0.5, 0.5, 0.2, 0.2}}};
    const MatchResult m = match_predictions(in, 0.5, 4);
    CHECK(m.classes[0].fp == 1);
    CHECK(m.classes[2].fn == 1);
  }

  TEST_CASE("equal confidences prefer the higher iou") {
    std::vector<ImageEvalInput> in(1);
    const BoxNorm g{0.5, 0.5, 0.2, 0.2};
    in[0].ground_truth = {{0, g}};
    in[0].predictions = {{0, 0.8, at_iou(g, 0.55)}, {0, 0.8, at_iou(g, 0.95)}};
    const MatchResult m = match_predictions(in, 0.5, 1);
    REQUIRE(m.classes[0].outcomes.size() == 2);
    CHECK(m.classes[0].outcomes[0].tp);
    CHECK(m.classes[0].outcomes[0].iou == doctest::Approx(0.95));
    std::swap(in[0].predictions[0], in[0].predictions[1]);
    const MatchResult m2 = match_predictions(in, 0.5, 1);
    CHECK(m2.classes[0].tp == m.classes[0].tp);
    CHECK(m2.classes[0].fp == m.classes[0].fp);
  }

  TEST_CASE("average precision examples") {
    CHECK(average_precision(pr_curve(std::vector<bool>{true, true}, 2)) == 1.0);
    CHECK(average_precision(pr_curve(std::vector<bool>{false, false}, 2)) == 0.0);
    const PRCurve c = pr_curve(std::vector<bool>{true, false, true}, 2);
    CHECK(c.points[0].recall == 0.5);
    CHECK(c.points[1].precision == 0.5);
    CHECK(c.points[2].precision == doctest::Approx(2.0 / 3.0));
    CHECK(average_precision(c) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK_THROWS_AS(average_precision(pr_curve(std::vector<bool>{true}, 0)), EmptyGroundTruth);
  }

  TEST_CASE("envelope is non-increasing and recall non-decreasing") {
    std::mt19937_64 rng(4);
    std::bernoulli_distribution coin(0.4);
    for (int t = 0; t < 100; ++t) {
      std::vector<bool> flags(30);
      for (auto&& f : flags) f = coin(rng);
      const auto tp = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
      const PRCurve c = pr_curve(flags, tp + 3);
      for (std::size_t i = 1; i < c.points.size(); ++i) {
        CHECK(c.points[i].recall >= c.points[i - 1].recall);
        CHECK(c.envelope[i] <= c.envelope[i - 1]);
      }
    }
  }

  TEST_CASE("average precision matches the rectangle oracle") {
    std::mt19937_64 rng(555);
    std::uniform_int_distribution<int> n(0, 10), extra(0, 5);
    std::bernoulli_distribution coin(0.5);
    for (int t = 0; t < 500; ++t) {
      std::vector<bool> flags(static_cast<std::size_t>(n(rng)));
      for (auto&& f : flags) f = coin(rng);
      const auto tp = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
      const std::size_t positives = std::max<std::size_t>(1, std::min<std::size_t>(5, tp + extra(rng)));
      if (tp > positives) continue;
      CHECK(std::abs(average_precision(pr_curve(flags, positives)) - hs_test::ap_rectangle_oracle(flags, positives)) <=
            1e-9);
    }
  }

  TEST_CASE("mean ap") {
    CHECK(mean_ap(std::vector<double>{0.7}) == 0.7);
    CHECK(mean_ap(std::vector<double>{1.0, 0.0}) == 0.5);
    CHECK(std::abs(mean_ap(std::vector<double>{0.92, 0.96, 0.71, 0.85}) - 0.86) <= 1e-12);
    const std::vector<std::optional<double>> partial{0.5, std::nullopt, 1.0};
    CHECK(mean_ap(partial) == 0.75);
    CHECK_THROWS_AS(mean_ap(std::vector<double>{}), NoDefinedClasses);
    const std::vector<std::optional<double>> none{std::nullopt};
    CHECK_THROWS_AS(mean_ap(none), NoDefinedClasses);
  }

  TEST_CASE("class rates") {
    ClassMetrics m = class_rates(10, 0, 0);
    CHECK(m.fnr == 0.0);
    CHECK(m.fp_over_p == 0.0);
    m = class_rates(94, 10, 6);
    CHECK(std::abs(m.fnr - 0.06) <= 1e-12);
    CHECK(std::abs(m.fp_over_p - 0.10) <= 1e-12);
    m = class_rates(75, 36, 25);
    CHECK(std::abs(m.fnr - 0.25) <= 1e-12);
    CHECK(std::abs(m.fp_over_p - 0.36) <= 1e-12);
    CHECK_THROWS_AS(class_rates(0, 3, 0), EmptyGroundTruth);
  }

  TEST_CASE("fnr plus recall is exactly one") {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<std::size_t> d(0, 1000);
    for (int t = 0; t < 1000; ++t) {
      const std::size_t tp = d(rng), fn = d(rng) + 1, fp = d(rng);
      const ClassMetrics m = class_rates(tp, fp, fn);
      CHECK(m.fnr + m.recall == 1.0);
      CHECK(m.fnr == 1.0 - m.recall);
    }
  }

  TEST_CASE("sweep step behaviour") {
    std::vector<ImageEvalInput> in(1);
    const BoxNorm g{0.5, 0.5, 0.2, 0.2};
    in[0].ground_truth = {{0, g}};
    in[0].predictions = {{0, 0.9, at_iou(g, 0.6)}};
    const auto thr = default_sweep_thresholds();
    const EvalReport r = iou_sweep(in, thr, 1);
    for (const auto& t : r.thresholds) {
      if (t.iou_threshold <= 0.6 - 1e-9) {
        CHECK(*t.map > 0.0);
      } else {
        CHECK(*t.map == 0.0);
      }
    }
  }

  TEST_CASE("sweep thresholds") {
    const auto t = default_sweep_thresholds();
    REQUIRE(t.size() == 10);
    CHECK(t.front() == 0.5);
    CHECK(t.back() == 0.95);
  }

  TEST_CASE("AP never increases with the threshold") {
    std::mt19937_64 rng(2718);
    const auto thr = default_sweep_thresholds();
    for (int t = 0; t < 100; ++t) {
      const auto in = random_instance(rng, 3);
      const EvalReport r = iou_sweep(in, thr, 3);
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t k = 1; k < r.thresholds.size(); ++k) {
          const auto& a = r.thresholds[k - 1].metrics[c];
          const auto& b = r.thresholds[k].metrics[c];
          if (a && b) CHECK(*b->ap <= *a->ap + 1e-12);
        }
      }
    }
  }

  TEST_CASE("matching invariants on random instances") {
    std::mt19937_64 rng(161);
    for (int t = 0; t < 200; ++t) {
      const auto in = random_instance(rng, 3);
      const MatchResult m = match_predictions(in, 0.5, 3);
      for (const auto& c : m.classes) {
        std::size_t gts = 0, preds = 0;
        for (const auto& img : in) {
          for (const auto& g : img.ground_truth) gts += g.class_id == c.class_id;
          for (const auto& p : img.predictions) preds += p.class_id == c.class_id;
        }
        CHECK(c.positives == gts);
        CHECK(c.tp + c.fn == gts);
        CHECK(c.tp + c.fp == preds);
        CHECK(c.tp <= std::min(gts, preds));
        for (std::size_t i = 1; i < c.outcomes.size(); ++i) CHECK(c.outcomes[i].confidence <= c.outcomes[i - 1].confidence);
      }
    }
  }

  TEST_CASE("classes without ground truth are left out of the mean") {
    std::vector<ImageEvalInput> in(1);
    in[0].ground_truth = {{0, {0.5, 0.5, 0.2, 0.2}}};
    in[0].predictions = {{0, 0.9, {0.5, 0.5, 0.2, 0.2}}, {1, 0.9, {0.2, 0.2, 0.1, 0.1}}};
    const std::vector<double> thr{0.5};
    const EvalReport r = iou_sweep(in, thr, 2);
    CHECK_FALSE(r.thresholds[0].metrics[1].has_value());
    CHECK(r.thresholds[0].counts[1].fp == 1);
    CHECK(*r.thresholds[0].map == 1.0);
  }

  TEST_CASE("report exports") {
    std::vector<ImageEvalInput> in(1);
    in[0].ground_truth = {{0, {0.5, 0.5, 0.2, 0.2}}};
    in[0].predictions = {{0, 0.9, {0.5, 0.5, 0.2, 0.2}}};
    const std::vector<double> thr{0.5, 0.75};
    const EvalReport r = iou_sweep(in, thr, 4);
    const std::string csv = report_csv(r, hs_test::four_classes());
    CHECK(csv.rfind("threshold,class,AP,FNR,FP_over_P,TP,FP,FN\n0.50,cargo,1.000000,0.000000,0.000000,1,0,0\n", 0) == 0);
    CHECK(csv.find("0.75,naval,,,,0,0,0\n") != std::string::npos);
    const std::string json = report_json(r, hs_test::four_classes());
    CHECK(json.find("\"mAP\": 1.0") != std::string::npos);
  }

  TEST_CASE("evaluated class subset") {
    std::vector<ImageEvalInput> in(1);
    in[0].ground_truth = {{0, {0.5, 0.5, 0.2, 0.2}}, {1, {0.2, 0.2, 0.1, 0.1}}};
    in[0].predictions = {{0, 0.9, {0.5, 0.5, 0.2, 0.2}}};
    const std::vector<double> thr{0.5};
    const std::vector<int> only0{0};
    CHECK(*iou_sweep(in, thr, 2, only0).thresholds[0].map == 1.0);
    CHECK(*iou_sweep(in, thr, 2).thresholds[0].map == 0.5);
    const std::vector<int> bad{7};
    CHECK_THROWS(iou_sweep(in, thr, 2, bad));
  }
}
