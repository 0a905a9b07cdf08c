#include "ccp/geometry.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <stdexcept>

namespace ccp {

double Polyline::length() const {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) len += (pts[i + 1] - pts[i]).norm();
  return len;
}

TipFrame TipFrame::from_crack(const Polyline& crack) {
  if (crack.pts.size() < 2) throw std::invalid_argument("crack needs at least one segment");
  const Point& a = crack.pts[crack.pts.size() - 2];
  const Point& b = crack.pts.back();
  Vec2 d = b - a;
  double n = d.norm();
  if (n <= kCoincidenceTol) throw std::invalid_argument("degenerate tip segment");
  return TipFrame{b, {d.x / n, d.y / n}};
}

PolarCoords tip_polar(const Point& p, const TipFrame& frame) {
  Vec2 rel = p - frame.tip;
  double lx = frame.dir.dot(rel);
  double ly = frame.dir.cross(rel);
  double r = std::hypot(lx, ly);
  if (r == 0.0) return {0.0, 0.0};
  return {r, std::atan2(ly, lx)};
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  Vec2 ab = b - a;
  double len2 = ab.squared_norm();
  if (len2 == 0.0) return (p - a).norm();
  double t = (p - a).dot(ab) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

double point_polyline_distance(const Point& p, const Polyline& poly) {
  if (poly.pts.empty()) throw std::invalid_argument("empty polyline");
  if (poly.pts.size() == 1) return (p - poly.pts[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < poly.pts.size(); ++i)
    best = std::min(best, point_segment_distance(p, poly.pts[i], poly.pts[i + 1]));
  return best;
}

int crack_side(const Point& p, const Polyline& crack) {
  if (crack.pts.size() < 2) throw std::invalid_argument("crack needs at least one segment");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i + 1 < crack.pts.size(); ++i) {
    double d = point_segment_distance(p, crack.pts[i], crack.pts[i + 1]);
    if (d < best - kOnCrackTol) {  // strict improvement keeps the lowest index on ties
      best = d;
      best_i = i;
    }
  }
  if (best <= kOnCrackTol) return 0;
  Vec2 ab = crack.pts[best_i + 1] - crack.pts[best_i];
  double c = ab.cross(p - crack.pts[best_i]);
  return c >= 0.0 ? 1 : -1;
}

std::optional<double> segment_circle_hit(const Point& a, const Point& b,
                                         const Circle& c) {
  if (c.contains(a)) return 0.0;
  Vec2 d = b - a;
  Vec2 f = a - c.center;
  double A = d.squared_norm();
  if (A == 0.0) return std::nullopt;
  double B = 2.0 * f.dot(d);
  double C = f.squared_norm() - c.r * c.r;
  double disc = B * B - 4.0 * A * C;
  if (disc < 0.0) return std::nullopt;
  double sq = std::sqrt(disc);
  double t0 = (-B - sq) / (2.0 * A);
  double t1 = (-B + sq) / (2.0 * A);
  if (t0 >= 0.0 && t0 <= 1.0) return t0;
  if (t1 >= 0.0 && t1 <= 1.0) return t1;
  return std::nullopt;
}

double Polygon::area() const {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point& p = v[i];
    const Point& q = v[(i + 1) % v.size()];
    s += p.cross(q);
  }
  return 0.5 * s;
}

Point Polygon::centroid() const {
  double a2 = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point& p = v[i];
    const Point& q = v[(i + 1) % v.size()];
    double w = p.cross(q);
    a2 += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  if (std::abs(a2) < 1e-300) {  // degenerate: fall back to vertex mean
    Point m;
    for (const Point& p : v) m = m + p;
    return m * (1.0 / static_cast<double>(v.size()));
  }
  return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

void split_convex_polygon(const Polygon& poly, const Point& a, const Vec2& d,
                          double tol, Polygon& neg, Polygon& pos) {
  neg.v.clear();
  pos.v.clear();
  const std::size_t n = poly.v.size();
  if (n == 0) return;
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = d.cross(poly.v[i] - a);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = poly.v[i];
    const Point& q = poly.v[(i + 1) % n];
    double sp = s[i], sq = s[(i + 1) % n];
    bool p_neg = sp < -tol, p_pos = sp > tol;
    if (!p_neg) pos.v.push_back(p);
    if (!p_pos) neg.v.push_back(p);
    if ((sp > tol && sq < -tol) || (sp < -tol && sq > tol)) {
      double t = sp / (sp - sq);
      Point c = p + (q - p) * t;
      pos.v.push_back(c);
      neg.v.push_back(c);
    }
  }
  auto degenerate = [tol](const Polygon& g) {
    return g.v.size() < 3 || std::abs(g.area()) <= tol * tol;
  };
  if (degenerate(neg)) neg.v.clear();
  if (degenerate(pos)) pos.v.clear();
}

bool clip_segment_to_rect(const Point& p, const Point& q, const Rect& rect,
                          Point& c0, Point& c1) {
  // Liang-Barsky
  double t0 = 0.0, t1 = 1.0;
  double dx = q.x - p.x, dy = q.y - p.y;
  auto clip = [&](double denom, double num) {
    if (denom == 0.0) return num >= 0.0;
    double t = num / denom;
    if (denom < 0.0) {
      if (t > t1) return false;
      if (t > t0) t0 = t;
    } else {
      if (t < t0) return false;
      if (t < t1) t1 = t;
    }
    return true;
  };
  if (!clip(-dx, p.x - rect.x_min)) return false;
  if (!clip(dx, rect.x_max - p.x)) return false;
  if (!clip(-dy, p.y - rect.y_min)) return false;
  if (!clip(dy, rect.y_max - p.y)) return false;
  if (t1 - t0 <= 1e-14) return false;
  c0 = {p.x + t0 * dx, p.y + t0 * dy};
  c1 = {p.x + t1 * dx, p.y + t1 * dy};
  return true;
}

}  // namespace ccp
