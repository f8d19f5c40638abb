#include <doctest.h>

#include <cmath>
#include <random>

#include "harborscan/backend.hpp"
#include "support/fixtures.hpp"

using namespace harborscan;
using hs_test::TempDir;

namespace {

AnchorSet nine_anchors() {
  AnchorSet a;
  for (int i = 1; i <= 9; ++i) a.anchors.push_back({0.03 * i, 0.02 * i});
  a.scale_assignment = assign_scales(a.anchors);
  return a;
}

RawHeadOutput zero_head(const HeadConfig& cfg) {
  RawHeadOutput raw;
  for (std::size_t s = 0; s < cfg.strides.size(); ++s) raw.scales.emplace_back(cfg.grid(s), cfg.boxes_per_cell, cfg.attrs());
  return raw;
}

}  // namespace

TEST_SUITE("backend") {
  TEST_CASE("detections file round trip") {
    DetectionsByImage d;
    d["b/img2.png"] = {{1, 0.75, {0.5, 0.5, 0.2, 0.1}}};
    d["a.png"] = {{0, 0.9, {0.1, 0.2, 0.1, 0.1}}, {3, 0.333333, {0.7, 0.7, 0.3, 0.3}}};
    const std::string text = format_detections(d);
    CHECK(text.substr(0, text.find('\n')) ==
          R"({"image":"a.png","class_id":0,"confidence":0.900000,"cx":0.100000,"cy":0.200000,"w":0.100000,"h":0.100000})");
    const DetectionsByImage parsed = parse_detections(text);
    CHECK(parsed == d);
    CHECK(format_detections(parsed) == text);
  }

  TEST_CASE("malformed detection lines are rejected") {
    CHECK_THROWS(parse_detections("{\"image\":\"a\"}\n"));
    CHECK_THROWS(parse_detections("not json\n"));
    CHECK_THROWS(parse_detections(R"({"image":"a","class_id":0,"confidence":1.5,"cx":0.5,"cy":0.5,"w":0.1,"h":0.1})"));
    CHECK(parse_detections("\n  \n").empty());
  }

  TEST_CASE("replay backend") {
    TempDir dir;
    hs_test::write_text(dir / "empty.jsonl", "");
    ReplayBackend empty = ReplayBackend::from_file(dir / "empty.jsonl");
    CHECK(empty.detect("anything.png").empty());
    CHECK_THROWS_AS(ReplayBackend::from_file(dir / "missing.jsonl"), BackendUnavailable);

    DetectionsByImage d;
    d["x.png"] = {{2, 0.5, {0.5, 0.5, 0.2, 0.2}}};
    hs_test::write_text(dir / "d.jsonl", format_detections(d));
    ReplayBackend r = ReplayBackend::from_file(dir / "d.jsonl");
    CHECK(r.detect("x.png") == d["x.png"]);
    CHECK(r.detect("y.png").empty());
  }

  TEST_CASE("head dump round trip") {
    HeadConfig cfg;
    RawHeadOutput raw = zero_head(cfg);
    std::mt19937_64 rng(1);
    std::normal_distribution<float> n(0.0f, 3.0f);
    for (auto& t : raw.scales)
      for (auto& v : t.values) v = n(rng);
    const std::string bytes = encode_head_dump(raw, cfg);
    CHECK(bytes.substr(0, 8) == "HSHEAD01");
    HeadConfig got;
    const RawHeadOutput back = decode_head_dump(bytes, &got);
    REQUIRE(back.scales.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) CHECK(back.scales[s].values == raw.scales[s].values);
    CHECK(got.strides == cfg.strides);
    CHECK(got.num_classes == cfg.num_classes);
  }

  TEST_CASE("corrupt head dumps are rejected") {
    const HeadConfig cfg;
    const std::string bytes = encode_head_dump(zero_head(cfg), cfg);
    CHECK_THROWS_AS(decode_head_dump("XXXXXXXX0000"), ShapeMismatch);
    CHECK_THROWS_AS(decode_head_dump(bytes.substr(0, bytes.size() - 4)), ShapeMismatch);
    CHECK_THROWS_AS(decode_head_dump(bytes + "junk"), ShapeMismatch);
    CHECK_THROWS_AS(decode_head_dump(bytes.substr(0, 20)), ShapeMismatch);
  }

  TEST_CASE("tensor backend decodes dumps") {
    TempDir dir;
    const HeadConfig cfg;
    hs_test::write_text(dir / "seq/f1.head", encode_head_dump(zero_head(cfg), cfg));
    DecodeParams p;
    p.nms_iou_threshold = 0.45;
    TensorBackend backend(dir.path(), nine_anchors(), cfg, p);
    CHECK(backend.dump_path("seq/f1.png") == dir / "seq/f1.head");
    const auto a = backend.detect("seq/f1.png");
    const auto b = backend.detect("seq/f1.png");
    CHECK_FALSE(a.empty());
    CHECK(a == b);
    for (const auto& d : a) {
      CHECK(d.confidence == 0.25);
      CHECK(is_valid(d.box));
    }
    CHECK_THROWS_AS(backend.detect("seq/none.png"), MissingEntry);
  }

  TEST_CASE("tensor backend rejects a mismatched dump") {
    TempDir dir;
    HeadConfig other;
    other.num_classes = 2;
    hs_test::write_text(dir / "f.head", encode_head_dump(zero_head(other), other));
    TensorBackend backend(dir.path(), nine_anchors(), HeadConfig{}, DecodeParams{});
    CHECK_THROWS_AS(backend.detect("f.png"), ShapeMismatch);
    CHECK_THROWS_AS(TensorBackend(dir / "nope", nine_anchors(), HeadConfig{}, DecodeParams{}), BackendUnavailable);
  }
}
