#include <doctest.h>

#include <cmath>
#include <random>

#include "harborscan/augment.hpp"
#include "support/fixtures.hpp"

using namespace harborscan;

namespace {

double ar(const BoxNorm& b) { return b.w / b.h; }

}  // namespace

TEST_SUITE("augment") {
  TEST_CASE("scale of one is the identity") {
    const Image img = hs_test::pattern_image(31, 17, 3);
    const std::vector<AnnotationRecord> recs{{1, {0.3, 0.4, 0.2, 0.1}}, {0, {0.9, 0.9, 0.2, 0.2}}};
    const Sample s = scale_preserve_ar(img, recs, 1.0);
    CHECK(s.image == img);
    CHECK(s.records == recs);
  }

  TEST_CASE("half scale shrinks a centred box") {
    const Image img = hs_test::solid_image(64, 64, 1, 200);
    const std::vector<AnnotationRecord> recs{{0, {0.5, 0.5, 0.4, 0.2}}};
    const Sample s = scale_preserve_ar(img, recs, 0.5);
    REQUIRE(s.records.size() == 1);
    CHECK(s.records[0].box.cx == doctest::Approx(0.5));
    CHECK(s.records[0].box.w == doctest::Approx(0.2));
    CHECK(s.records[0].box.h == doctest::Approx(0.1));
    CHECK(std::abs(ar(s.records[0].box) - 2.0) <= 1e-9);
    // Exposed border is padded, the centre keeps the content.
    CHECK(s.image.at(0, 0, 0) == 114);
    CHECK(s.image.at(32, 32, 0) == 200);
  }

  TEST_CASE("upscaling drops boxes pushed out and clips partly visible ones") {
    const Image img = hs_test::solid_image(100, 100, 1, 50);
    const std::vector<AnnotationRecord> recs{{0, {0.05, 0.5, 0.08, 0.08}}, {1, {0.25, 0.5, 0.1, 0.1}}};
    const Sample s = scale_preserve_ar(img, recs, 2.0);
    // First box maps to cx = -0.4: gone. Second to [0.0, 0.2] wide 0.2 at cx 0.0:
    // left edge at -0.1, visible 0.1 of 0.2 -> 50% kept.
    REQUIRE(s.records.size() == 1);
    CHECK(s.records[0].class_id == 1);
    CHECK(s.records[0].box.cx == doctest::Approx(0.05));
    CHECK(s.records[0].box.w == doctest::Approx(0.1));
  }

  TEST_CASE("visibility threshold at 60 and below 25 percent") {
    const Image img = hs_test::solid_image(100, 100, 1, 50);
    // After s = 2 a box of width 0.1 at cx 0.29 becomes width 0.2 at cx 0.08:
    // [-0.02, 0.18], 90% visible. One at cx 0.21 becomes [-0.18, 0.02]: 10%.
    const std::vector<AnnotationRecord> recs{{0, {0.29, 0.5, 0.1, 0.1}}, {1, {0.21, 0.5, 0.1, 0.1}}};
    const Sample s = scale_preserve_ar(img, recs, 2.0);
    REQUIRE(s.records.size() == 1);
    CHECK(s.records[0].class_id == 0);
  }

  TEST_CASE("flip mirrors pixels and boxes") {
    const Image img = hs_test::pattern_image(13, 7, 3);
    const std::vector<AnnotationRecord> recs{{2, {0.2, 0.3, 0.1, 0.1}}};
    const Sample f = horizontal_flip(img, recs);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 13; ++x)
        for (int c = 0; c < 3; ++c) CHECK(f.image.at(12 - x, y, c) == img.at(x, y, c));
    CHECK(f.records[0].box.cx == doctest::Approx(0.8));
    const Sample ff = horizontal_flip(f.image, f.records);
    CHECK(ff.image == img);
    CHECK(write_annotation(ff.records) == write_annotation(recs));
  }

  TEST_CASE("identity settings") {
    AugmentSpec spec;
    spec.scale_min = spec.scale_max = 1.0;
    spec.flip_probability = 0.0;
    const Sample s{hs_test::pattern_image(20, 10, 1), {{0, {0.5, 0.5, 0.3, 0.3}}}};
    for (std::uint64_t i = 0; i < 20; ++i) {
      const AugmentedSample a = augment(s, spec, i);
      CHECK(a.image == s.image);
      CHECK(a.records == s.records);
    }
  }

  TEST_CASE("draws are deterministic and replayable") {
    AugmentSpec spec;
    spec.seed = 77;
    const Sample s{hs_test::pattern_image(40, 30, 3), {{0, {0.5, 0.5, 0.3, 0.2}}, {1, {0.2, 0.7, 0.1, 0.3}}}};
    for (std::uint64_t i = 0; i < 20; ++i) {
      const AugmentedSample a = augment(s, spec, i);
      const AugmentedSample b = augment(s, spec, i);
      CHECK(a.image == b.image);
      CHECK(a.records == b.records);
      const AugmentedSample r = apply_transform(s, a.transform, spec.pad_value, spec.min_visibility);
      CHECK(r.image == a.image);
      CHECK(r.records == a.records);
    }
  }

  TEST_CASE("flip rate follows the probability") {
    AugmentSpec spec;
    spec.seed = 5;
    int flips = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) flips += draw_transform(spec, static_cast<std::uint64_t>(i)).flipped;
    const double sigma = std::sqrt(n * 0.25);
    CHECK(std::abs(flips - n * 0.5) <= 5 * sigma);
  }

  TEST_CASE("scales stay in range") {
    AugmentSpec spec;
    spec.seed = 1;
    for (std::uint64_t i = 0; i < 1000; ++i) {
      const double s = draw_transform(spec, i).scale;
      CHECK(s >= spec.scale_min);
      CHECK(s <= spec.scale_max);
    }
  }

  TEST_CASE("aspect ratio preserved and boxes valid over random samples") {
    std::mt19937_64 rng(1234);
    AugmentSpec spec;
    spec.seed = 42;
    const Image img = hs_test::solid_image(48, 32, 1, 9);
    for (int i = 0; i < 1000; ++i) {
      const Sample s{img, hs_test::random_records(rng, 4, 6)};
      const AugmentedSample a = augment(s, spec, static_cast<std::uint64_t>(i));
      for (const auto& r : a.records) CHECK(is_valid(r.box));
      // Boxes untouched by clipping keep their AR.
      const double sc = a.transform.scale;
      for (const auto& src : s.records) {
        BoxNorm m{0.5 + sc * (src.box.cx - 0.5), 0.5 + sc * (src.box.cy - 0.5), sc * src.box.w, sc * src.box.h};
        if (a.transform.flipped) m.cx = 1.0 - m.cx;
        const bool inside = m.cx - m.w / 2 >= 0 && m.cx + m.w / 2 <= 1 && m.cy - m.h / 2 >= 0 && m.cy + m.h / 2 <= 1;
        if (!inside) continue;
        bool found = false;
        for (const auto& r : a.records) {
          if (r.class_id == src.class_id && std::abs(r.box.cx - m.cx) < 1e-12 && std::abs(r.box.cy - m.cy) < 1e-12) {
            found = true;
            CHECK(std::abs(ar(r.box) - ar(src.box)) <= 1e-9);
          }
        }
        CHECK(found);
      }
    }
  }

  TEST_CASE("output keeps the source dimensions") {
    AugmentSpec spec;
    spec.seed = 3;
    const Sample s{hs_test::pattern_image(37, 23, 3), {}};
    for (std::uint64_t i = 0; i < 10; ++i) {
      const AugmentedSample a = augment(s, spec, i);
      CHECK(a.image.width == 37);
      CHECK(a.image.height == 23);
      CHECK(a.image.channels == 3);
    }
  }

  TEST_CASE("augment settings validation") {
    AugmentSpec spec;
    spec.scale_min = 1.3;
    CHECK_THROWS(spec.validate());
    spec = AugmentSpec{};
    spec.flip_probability = 1.5;
    CHECK_THROWS(spec.validate());
    spec = AugmentSpec{};
    spec.scale_min = 0.0;
    CHECK_THROWS(spec.validate());
  }
}
