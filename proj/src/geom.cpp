#include "plsim/geom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "plsim/common.hpp"

namespace plsim::geom {

OrientedBox::OrientedBox(double cx_, double cy_, double cz_, double l_, double w_, double h_,
                         double yaw_)
    : cx(cx_), cy(cy_), cz(cz_), l(l_), w(w_), h(h_), yaw(wrap_angle(yaw_)) {
  if (!(l > 0.0) || !(w > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("OrientedBox: extents must be positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(cz) || !std::isfinite(yaw)) {
    throw std::invalid_argument("OrientedBox: non-finite parameter");
  }
}

Point3 world_to_object(const Point3& p, const OrientedBox& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double dx = p.x - box.cx, dy = p.y - box.cy;
  return {dx * c + dy * s, -dx * s + dy * c, p.z - box.cz};
}

Point3 object_to_world(const Point3& p, const OrientedBox& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  return {box.cx + p.x * c - p.y * s, box.cy + p.x * s + p.y * c, box.cz + p.z};
}

bool contains(const OrientedBox& box, const Point3& p) {
  const Point3 q = world_to_object(p, box);
  return std::abs(q.x) <= 0.5 * box.l && std::abs(q.y) <= 0.5 * box.w &&
         std::abs(q.z) <= 0.5 * box.h;
}

namespace {

struct Vec2 {
  double x, y;
};

std::array<Vec2, 4> bev_corners(const OrientedBox& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hl = 0.5 * b.l, hw = 0.5 * b.w;
  const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};  // CCW
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {b.cx + local[i].x * c - local[i].y * s, b.cy + local[i].x * s + local[i].y * c};
  }
  return out;
}

double shoelace(const std::vector<Vec2>& poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

Vec2 cross_point(const Vec2& s, const Vec2& e, double ds, double de) {
  const double t = ds / (ds - de);
  return {s.x + t * (e.x - s.x), s.y + t * (e.y - s.y)};
}

// Keep the part of `subject` on the inclusive left of edge a->b.
void clip_half_plane(const std::vector<Vec2>& subject, const Vec2& a, const Vec2& b,
                     std::vector<Vec2>& out) {
  out.clear();
  const std::size_t n = subject.size();
  const double ex = b.x - a.x, ey = b.y - a.y;
  auto side = [&](const Vec2& p) { return ex * (p.y - a.y) - ey * (p.x - a.x); };
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& s = subject[i];
    const Vec2& e = subject[(i + 1) % n];
    const double ds = side(s), de = side(e);
    if (ds >= 0.0) {
      out.push_back(s);
      if (de < 0.0) out.push_back(cross_point(s, e, ds, de));
    } else if (de >= 0.0) {
      out.push_back(cross_point(s, e, ds, de));
    }
  }
}

void drop_duplicate_vertices(std::vector<Vec2>& poly) {
  std::vector<Vec2> out;
  out.reserve(poly.size());
  for (const Vec2& v : poly) {
    if (out.empty() || std::abs(v.x - out.back().x) > 1e-9 || std::abs(v.y - out.back().y) > 1e-9) {
      out.push_back(v);
    }
  }
  while (out.size() > 1 && std::abs(out.front().x - out.back().x) <= 1e-9 &&
         std::abs(out.front().y - out.back().y) <= 1e-9) {
    out.pop_back();
  }
  poly = std::move(out);
}

double bev_intersection_area(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  std::vector<Vec2> poly(ca.begin(), ca.end());
  std::vector<Vec2> next;
  for (int i = 0; i < 4 && !poly.empty(); ++i) {
    clip_half_plane(poly, cb[i], cb[(i + 1) % 4], next);
    poly.swap(next);
  }
  drop_duplicate_vertices(poly);
  if (poly.size() < 3) return 0.0;
  const double area = std::abs(shoelace(poly));
  return area < 1e-12 ? 0.0 : area;
}

}  // namespace

double iou_bev(const OrientedBox& a, const OrientedBox& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return clamp01(inter / (a.bev_area() + b.bev_area() - inter));
}

double iou_3d(const OrientedBox& a, const OrientedBox& b) {
  const double inter_bev = bev_intersection_area(a, b);
  if (inter_bev <= 0.0) return 0.0;
  const double z_lo = std::max(a.cz - 0.5 * a.h, b.cz - 0.5 * b.h);
  const double z_hi = std::min(a.cz + 0.5 * a.h, b.cz + 0.5 * b.h);
  const double hz = z_hi - z_lo;
  if (hz <= 0.0) return 0.0;
  const double inter = inter_bev * hz;
  return clamp01(inter / (a.volume() + b.volume() - inter));
}

std::vector<std::size_t> nms_indices(const std::vector<OrientedBox>& boxes,
                                     const std::vector<double>& scores, double iou_threshold) {
  if (boxes.size() != scores.size()) {
    throw std::invalid_argument("nms_indices: boxes/scores size mismatch");
  }
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return scores[i] > scores[j]; });
  std::vector<char> suppressed(boxes.size(), 0);
  std::vector<std::size_t> keep;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && iou_3d(boxes[i], boxes[j]) > iou_threshold) suppressed[j] = 1;
    }
  }
  return keep;
}

std::vector<ScoredBox> nms(const std::vector<ScoredBox>& boxes, double iou_threshold) {
  std::vector<OrientedBox> bs;
  std::vector<double> ss;
  bs.reserve(boxes.size());
  ss.reserve(boxes.size());
  for (const ScoredBox& sb : boxes) {
    bs.push_back(sb.box);
    ss.push_back(sb.score);
  }
  std::vector<ScoredBox> out;
  for (std::size_t i : nms_indices(bs, ss, iou_threshold)) out.push_back(boxes[i]);
  return out;
}

}  // namespace plsim::geom
