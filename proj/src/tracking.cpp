#include "harborscan/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

#include <nlohmann/json.hpp>

#include "harborscan/annotation.hpp"
#include "harborscan/dataset.hpp"

namespace harborscan {

namespace fs = std::filesystem;

float GrayFrame::sample(double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
  const double bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

GrayFrame to_gray(const Image& img, std::int64_t index) {
  GrayFrame g(img.width, img.height, index);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (img.channels >= 3) {
        const double v = 0.114 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.299 * img.at(x, y, 2);
        g.at(x, y) = static_cast<float>(std::lround(v));
      } else {
        g.at(x, y) = img.at(x, y, 0);
      }
    }
  }
  return g;
}

namespace {

// Scharr derivative, normalized so a unit ramp has gradient 1.
void scharr(const GrayFrame& f, GrayFrame& gx, GrayFrame& gy) {
  gx = GrayFrame(f.width, f.height, f.index);
  gy = GrayFrame(f.width, f.height, f.index);
  const int W = f.width;
  const int H = f.height;
  for (int y = 0; y < H; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, H - 1);
    for (int x = 0; x < W; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, W - 1);
      gx.at(x, y) = (3.0f * (f.at(xp, ym) - f.at(xm, ym)) + 10.0f * (f.at(xp, y) - f.at(xm, y)) +
                     3.0f * (f.at(xp, yp) - f.at(xm, yp))) /
                    32.0f;
      gy.at(x, y) = (3.0f * (f.at(xm, yp) - f.at(xm, ym)) + 10.0f * (f.at(x, yp) - f.at(x, ym)) +
                     3.0f * (f.at(xp, yp) - f.at(xp, ym))) /
                    32.0f;
    }
  }
}

double min_eigenvalue(double a, double b, double c) {
  const double half_trace = 0.5 * (a + c);
  const double d = 0.5 * (a - c);
  return half_trace - std::sqrt(d * d + b * b);
}

bool inside(const Point2& p, int W, int H) { return p.x >= 0.0 && p.y >= 0.0 && p.x <= W - 1 && p.y <= H - 1; }

}  // namespace

void TrackerConfig::validate() const {
  if (window < 5 || window % 2 == 0) throw std::invalid_argument("LK window must be odd and >= 5");
  if (detect_every_n < 1) throw std::invalid_argument("detect_every_n must be >= 1");
  if (pyramid_levels < 1 || max_iterations < 1) throw std::invalid_argument("pyramid levels and iterations must be >= 1");
  if (min_alive_points < 1 || max_points < 1) throw std::invalid_argument("point counts must be >= 1");
  if (!(reassoc_iou >= 0.0 && reassoc_iou <= 1.0)) throw std::invalid_argument("reassoc_iou outside [0, 1]");
}

Pyramid build_pyramid(const GrayFrame& f, int levels) {
  if (f.width < kMinPyramidSide || f.height < kMinPyramidSide) {
    throw FrameTooSmall("frame " + std::to_string(f.width) + "x" + std::to_string(f.height) + " is below " +
                        std::to_string(kMinPyramidSide) + "x" + std::to_string(kMinPyramidSide));
  }
  if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  Pyramid p;
  p.levels.push_back(f);
  while (static_cast<int>(p.levels.size()) < levels) {
    const GrayFrame& src = p.levels.back();
    const int w = src.width / 2;
    const int h = src.height / 2;
    if (w < kMinPyramidSide || h < kMinPyramidSide) break;
    GrayFrame dst(w, h, f.index);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        dst.at(x, y) = 0.25f * (src.at(2 * x, 2 * y) + src.at(2 * x + 1, 2 * y) + src.at(2 * x, 2 * y + 1) +
                                src.at(2 * x + 1, 2 * y + 1));
      }
    }
    p.levels.push_back(std::move(dst));
  }
  p.grad_x.resize(p.levels.size());
  p.grad_y.resize(p.levels.size());
  for (std::size_t i = 0; i < p.levels.size(); ++i) scharr(p.levels[i], p.grad_x[i], p.grad_y[i]);
  return p;
}

std::vector<PointFlow> lk_flow(const Pyramid& prev, const Pyramid& next, std::span<const Point2> points,
                               const TrackerConfig& cfg) {
  cfg.validate();
  if (prev.levels.empty() || next.levels.empty() || prev.levels[0].width != next.levels[0].width ||
      prev.levels[0].height != next.levels[0].height) {
    throw std::invalid_argument("lk_flow needs pyramids of equal size");
  }
  const int levels = static_cast<int>(std::min(prev.levels.size(), next.levels.size()));
  const int r = cfg.window / 2;
  const std::size_t n = static_cast<std::size_t>(cfg.window) * cfg.window;
  std::vector<float> iv(n), ix(n), iy(n);
  const int W0 = prev.levels[0].width;
  const int H0 = prev.levels[0].height;

  std::vector<PointFlow> out(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Point2 pt = points[p];
    if (!inside(pt, W0, H0)) continue;
    double gx = 0.0, gy = 0.0;  // guess at the current level
    bool lost = false;
    for (int L = levels - 1; L >= 0; --L) {
      const double s = static_cast<double>(1 << L);
      const double ux = (pt.x + 0.5) / s - 0.5;
      const double uy = (pt.y + 0.5) / s - 0.5;
      const GrayFrame& I = prev.levels[static_cast<std::size_t>(L)];
      const GrayFrame& Ix = prev.grad_x[static_cast<std::size_t>(L)];
      const GrayFrame& Iy = prev.grad_y[static_cast<std::size_t>(L)];
      const GrayFrame& J = next.levels[static_cast<std::size_t>(L)];

      double a = 0.0, b = 0.0, c = 0.0;
      std::size_t k = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++k) {
          iv[k] = I.sample(ux + dx, uy + dy);
          ix[k] = Ix.sample(ux + dx, uy + dy);
          iy[k] = Iy.sample(ux + dx, uy + dy);
          a += static_cast<double>(ix[k]) * ix[k];
          b += static_cast<double>(ix[k]) * iy[k];
          c += static_cast<double>(iy[k]) * iy[k];
        }
      }
      const double det = a * c - b * b;
      const bool singular = min_eigenvalue(a, b, c) / static_cast<double>(n) < cfg.min_eigen || !(det > 0.0);
      double vx = 0.0, vy = 0.0;
      if (singular) {
        if (L == 0) {
          lost = true;
          break;
        }
      } else {
        for (int it = 0; it < cfg.max_iterations; ++it) {
          const double px = ux + gx + vx;
          const double py = uy + gy + vy;
          if (px < 0.0 || py < 0.0 || px > J.width - 1 || py > J.height - 1) {
            if (L == 0) lost = true;
            break;
          }
          double bx = 0.0, by = 0.0;
          k = 0;
          for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx, ++k) {
              const double diff = static_cast<double>(iv[k]) - J.sample(px + dx, py + dy);
              bx += diff * ix[k];
              by += diff * iy[k];
            }
          }
          const double ex = (c * bx - b * by) / det;
          const double ey = (a * by - b * bx) / det;
          vx += ex;
          vy += ey;
          if (std::hypot(ex, ey) < cfg.epsilon) break;
        }
        if (lost) break;
      }
      if (L > 0) {
        gx = 2.0 * (gx + vx);
        gy = 2.0 * (gy + vy);
      } else {
        gx += vx;
        gy += vy;
      }
    }
    if (lost) continue;
    if (!inside(Point2{pt.x + gx, pt.y + gy}, W0, H0)) continue;
    out[p] = PointFlow{gx, gy, true};
  }
  return out;
}

std::vector<Point2> seed_points(const BoxNorm& box, const GrayFrame& frame, const TrackerConfig& cfg) {
  const int W = frame.width;
  const int H = frame.height;
  const BoxPixel px = to_pixel(box, ImageMeta{W, H});
  constexpr int kBlock = 2;  // structure-tensor radius (5x5 block)
  const double min_dist = cfg.window / 2.0;

  const int xa = std::max(static_cast<int>(std::ceil(px.x1)), 1 + kBlock);
  const int xb = std::min(static_cast<int>(std::floor(px.x2)), W - 2 - kBlock);
  const int ya = std::max(static_cast<int>(std::ceil(px.y1)), 1 + kBlock);
  const int yb = std::min(static_cast<int>(std::floor(px.y2)), H - 2 - kBlock);

  struct Corner {
    double score;
    int x;
    int y;
  };
  std::vector<Corner> corners_found;
  if (xa <= xb && ya <= yb) {
    // Gradients on the region grown by the block radius.
    const int gw = xb - xa + 1 + 2 * kBlock;
    const int gh = yb - ya + 1 + 2 * kBlock;
    std::vector<double> gxx(static_cast<std::size_t>(gw) * gh), gxy(gxx.size()), gyy(gxx.size());
    for (int j = 0; j < gh; ++j) {
      const int y = ya - kBlock + j;
      for (int i = 0; i < gw; ++i) {
        const int x = xa - kBlock + i;
        const double dx = (3.0 * (frame.at(x + 1, y - 1) - frame.at(x - 1, y - 1)) +
                           10.0 * (frame.at(x + 1, y) - frame.at(x - 1, y)) +
                           3.0 * (frame.at(x + 1, y + 1) - frame.at(x - 1, y + 1))) /
                          32.0;
        const double dy = (3.0 * (frame.at(x - 1, y + 1) - frame.at(x - 1, y - 1)) +
                           10.0 * (frame.at(x, y + 1) - frame.at(x, y - 1)) +
                           3.0 * (frame.at(x + 1, y + 1) - frame.at(x + 1, y - 1))) /
                          32.0;
        const std::size_t k = static_cast<std::size_t>(j) * gw + i;
        gxx[k] = dx * dx;
        gxy[k] = dx * dy;
        gyy[k] = dy * dy;
      }
    }
    const int rw = xb - xa + 1;
    const int rh = yb - ya + 1;
    std::vector<double> score(static_cast<std::size_t>(rw) * rh, 0.0);
    double best = 0.0;
    constexpr double kBlockArea = (2 * kBlock + 1) * (2 * kBlock + 1);
    for (int j = 0; j < rh; ++j) {
      for (int i = 0; i < rw; ++i) {
        double a = 0.0, b = 0.0, c = 0.0;
        for (int v = 0; v <= 2 * kBlock; ++v) {
          for (int u = 0; u <= 2 * kBlock; ++u) {
            const std::size_t k = static_cast<std::size_t>(j + v) * gw + (i + u);
            a += gxx[k];
            b += gxy[k];
            c += gyy[k];
          }
        }
        const double lam = min_eigenvalue(a, b, c) / kBlockArea;
        score[static_cast<std::size_t>(j) * rw + i] = lam;
        best = std::max(best, lam);
      }
    }
    constexpr double kQuality = 0.05;
    for (int j = 0; j < rh; ++j) {
      for (int i = 0; i < rw; ++i) {
        const double s = score[static_cast<std::size_t>(j) * rw + i];
        if (s < cfg.min_eigen || s < kQuality * best) continue;
        bool is_max = true;
        for (int v = -1; v <= 1 && is_max; ++v) {
          for (int u = -1; u <= 1; ++u) {
            const int ii = i + u, jj = j + v;
            if ((u || v) && ii >= 0 && jj >= 0 && ii < rw && jj < rh &&
                score[static_cast<std::size_t>(jj) * rw + ii] > s) {
              is_max = false;
              break;
            }
          }
        }
        if (is_max) corners_found.push_back({s, xa + i, ya + j});
      }
    }
    std::sort(corners_found.begin(), corners_found.end(), [](const Corner& p, const Corner& q) {
      if (p.score != q.score) return p.score > q.score;
      if (p.y != q.y) return p.y < q.y;
      return p.x < q.x;
    });
  }

  std::vector<Point2> out;
  auto far_enough = [&out, min_dist](const Point2& q) {
    return std::all_of(out.begin(), out.end(),
                       [&](const Point2& p) { return std::hypot(p.x - q.x, p.y - q.y) >= min_dist; });
  };
  for (const auto& c : corners_found) {
    if (static_cast<int>(out.size()) >= cfg.max_points) break;
    const Point2 q{static_cast<double>(c.x), static_cast<double>(c.y)};
    if (far_enough(q)) out.push_back(q);
  }
  if (static_cast<int>(out.size()) < cfg.min_alive_points) {
    const std::size_t n_corners = out.size();
    for (int j = 1; j <= 5; ++j) {
      for (int i = 1; i <= 5; ++i) {
        if (static_cast<int>(out.size()) >= cfg.max_points) break;
        const Point2 q{std::clamp(px.x1 + i * (px.x2 - px.x1) / 6.0, 0.5, W - 1.5),
                       std::clamp(px.y1 + j * (px.y2 - px.y1) / 6.0, 0.5, H - 1.5)};
        const bool clear = std::all_of(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n_corners),
                                       [&](const Point2& p) { return std::hypot(p.x - q.x, p.y - q.y) >= min_dist; });
        if (clear) out.push_back(q);
      }
    }
  }
  return out;
}

std::size_t TrackState::alive_count() const {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const TrackPoint& p) { return p.alive; }));
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower + (upper - lower) / 2.0;
}

PropagateResult propagate_box(const TrackState& t, std::span<const PointFlow> flows, const ImageMeta& meta,
                              const TrackerConfig& cfg) {
  if (flows.size() != t.points.size()) throw std::invalid_argument("one flow per track point expected");
  PropagateResult res;
  res.state = t;
  res.state.age = t.age + 1;

  std::vector<Point2> before, after;
  std::vector<double> dxs, dys;
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    TrackPoint& tp = res.state.points[i];
    if (!tp.alive) continue;
    if (!flows[i].tracked) {
      tp.alive = false;
      continue;
    }
    const Point2 moved{tp.pos.x + flows[i].dx, tp.pos.y + flows[i].dy};
    if (!inside(moved, meta.width, meta.height)) {
      tp.alive = false;
      continue;
    }
    before.push_back(tp.pos);
    after.push_back(moved);
    dxs.push_back(flows[i].dx);
    dys.push_back(flows[i].dy);
    tp.pos = moved;
  }
  if (static_cast<int>(before.size()) < cfg.min_alive_points) {
    res.dropped = true;
    return res;
  }

  res.translation = Point2{median(dxs), median(dys)};
  std::vector<double> ratios;
  for (std::size_t i = 0; i < before.size(); ++i) {
    for (std::size_t j = i + 1; j < before.size(); ++j) {
      const double d0 = std::hypot(before[i].x - before[j].x, before[i].y - before[j].y);
      if (d0 < 1e-6) continue;
      ratios.push_back(std::hypot(after[i].x - after[j].x, after[i].y - after[j].y) / d0);
    }
  }
  res.scale = ratios.empty() ? 1.0 : median(std::move(ratios));

  const BoxNorm moved{t.box.cx + res.translation.x / meta.width, t.box.cy + res.translation.y / meta.height,
                      t.box.w * res.scale, t.box.h * res.scale};
  const auto clipped = clip_unit(moved);
  if (!clipped || !(clipped->cx >= 0.0 && clipped->cx <= 1.0 && clipped->cy >= 0.0 && clipped->cy <= 1.0)) {
    res.dropped = true;
    return res;
  }
  res.state.box = *clipped;
  return res;
}

const char* to_string(TrackSource s) { return s == TrackSource::Detected ? "detected" : "tracked"; }

TrackingPipeline::TrackingPipeline(TrackerConfig cfg, DetectorBackend& backend)
    : cfg_(std::move(cfg)), backend_(backend) {
  cfg_.validate();
}

TrackState TrackingPipeline::open_track(const Detection& d, const GrayFrame& frame) {
  TrackState t;
  t.id = next_id_++;
  t.class_id = d.class_id;
  t.box = d.box;
  t.confidence = d.confidence;
  for (const auto& p : seed_points(d.box, frame, cfg_)) t.points.push_back(TrackPoint{p, true});
  return t;
}

void TrackingPipeline::propagate_all(const Pyramid& next, const ImageMeta& meta) {
  std::vector<TrackState> kept;
  for (const auto& t : tracks_) {
    std::vector<Point2> pts;
    for (const auto& p : t.points) pts.push_back(p.pos);
    std::vector<PointFlow> flows = lk_flow(prev_, next, pts, cfg_);
    for (std::size_t i = 0; i < t.points.size(); ++i)
      if (!t.points[i].alive) flows[i].tracked = false;
    PropagateResult r = propagate_box(t, flows, meta, cfg_);
    if (!r.dropped) kept.push_back(std::move(r.state));
  }
  tracks_ = std::move(kept);
}

std::vector<TrackedObject> TrackingPipeline::process(const GrayFrame& frame, const std::string& image_id) {
  if (has_prev_) {
    if (frame.index <= last_index_) throw std::invalid_argument("frame indices must strictly increase");
    if (frame.width != prev_.levels[0].width || frame.height != prev_.levels[0].height) {
      throw std::invalid_argument("frame size changed mid-sequence");
    }
  }
  const ImageMeta meta{frame.width, frame.height};
  Pyramid pyr = build_pyramid(frame, cfg_.pyramid_levels);
  if (has_prev_ && !tracks_.empty()) propagate_all(pyr, meta);

  std::vector<TrackedObject> out;
  std::vector<bool> detected_now(tracks_.size(), false);
  if (frame.index % cfg_.detect_every_n == 0) {
    const std::vector<Detection> dets = backend_.detect(image_id);

    struct Pair {
      double iou;
      std::size_t track;
      std::size_t det;
    };
    std::vector<Pair> pairs;
    for (std::size_t t = 0; t < tracks_.size(); ++t) {
      for (std::size_t d = 0; d < dets.size(); ++d) {
        const double v = iou(tracks_[t].box, dets[d].box);
        if (v >= cfg_.reassoc_iou && v > 0.0) pairs.push_back({v, t, d});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [this](const Pair& a, const Pair& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (tracks_[a.track].id != tracks_[b.track].id) return tracks_[a.track].id < tracks_[b.track].id;
      return a.det < b.det;
    });
    std::vector<bool> det_used(dets.size(), false);
    for (const auto& p : pairs) {
      if (detected_now[p.track] || det_used[p.det]) continue;
      detected_now[p.track] = true;
      det_used[p.det] = true;
      TrackState& t = tracks_[p.track];
      const Detection& d = dets[p.det];
      t.box = d.box;
      t.class_id = d.class_id;
      t.confidence = d.confidence;
      t.age = 0;
      t.missed_cycles = 0;
      t.points.clear();
      for (const auto& q : seed_points(d.box, frame, cfg_)) t.points.push_back(TrackPoint{q, true});
    }

    std::vector<TrackState> kept;
    std::vector<bool> kept_detected;
    for (std::size_t t = 0; t < tracks_.size(); ++t) {
      if (!detected_now[t] && ++tracks_[t].missed_cycles >= 2) continue;
      kept.push_back(std::move(tracks_[t]));
      kept_detected.push_back(detected_now[t]);
    }
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (det_used[d]) continue;
      kept.push_back(open_track(dets[d], frame));
      kept_detected.push_back(true);
    }
    tracks_ = std::move(kept);
    detected_now = std::move(kept_detected);
  }

  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    const TrackState& s = tracks_[t];
    out.push_back(TrackedObject{frame.index, s.id, s.class_id,
                                detected_now[t] ? TrackSource::Detected : TrackSource::Tracked, s.confidence, s.box});
  }
  std::sort(out.begin(), out.end(), [](const TrackedObject& a, const TrackedObject& b) { return a.track_id < b.track_id; });

  prev_ = std::move(pyr);
  has_prev_ = true;
  last_index_ = frame.index;
  return out;
}

std::vector<std::vector<TrackedObject>> run_pipeline(std::span<const FrameInput> frames, DetectorBackend& backend,
                                                     const TrackerConfig& cfg) {
  TrackingPipeline pipeline(cfg, backend);
  std::vector<std::vector<TrackedObject>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(pipeline.process(f.frame, f.image_id));
  return out;
}

std::string format_tracked(const TrackedObject& o) {
  return "{\"frame\":" + std::to_string(o.frame) + ",\"track_id\":" + std::to_string(o.track_id) +
         ",\"class_id\":" + std::to_string(o.class_id) + ",\"source\":\"" + to_string(o.source) +
         "\",\"confidence\":" + format_fixed6(o.confidence) + ",\"cx\":" + format_fixed6(o.box.cx) +
         ",\"cy\":" + format_fixed6(o.box.cy) + ",\"w\":" + format_fixed6(o.box.w) + ",\"h\":" +
         format_fixed6(o.box.h) + "}";
}

std::vector<FrameRef> list_frames(const fs::path& source) {
  std::vector<FrameRef> out;
  if (fs::is_directory(source)) {
    static const std::regex kNumbered(R"(^(\d+)\.(png|jpg|jpeg)$)", std::regex::icase);
    for (const auto& e : fs::directory_iterator(source)) {
      if (!e.is_regular_file()) continue;
      const std::string name = e.path().filename().string();
      std::smatch m;
      if (!std::regex_match(name, m, kNumbered)) continue;
      out.push_back(FrameRef{e.path(), name, std::stoll(m[1].str())});
    }
  } else {
    const auto j = nlohmann::json::parse(read_text_file(source));
    const fs::path base = source.parent_path();
    for (const auto& f : j.at("frames")) {
      const std::string rel = f.at("path").get<std::string>();
      out.push_back(FrameRef{base / rel, rel, f.at("index").get<std::int64_t>()});
    }
  }
  std::sort(out.begin(), out.end(), [](const FrameRef& a, const FrameRef& b) { return a.index < b.index; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].index == out[i - 1].index) throw std::runtime_error("duplicate frame index " + std::to_string(out[i].index));
  }
  return out;
}

}  // namespace harborscan
