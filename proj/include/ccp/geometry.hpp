#pragma once

#include <cmath>
#include <optional>
#include <vector>

namespace ccp {

// Global geometric coincidence tolerance (mm).
inline constexpr double kCoincidenceTol = 1e-9;
// Tolerance under which a point counts as lying on the crack (mm).
inline constexpr double kOnCrackTol = 1e-12;

struct Point {
  double x = 0.0;
  double y = 0.0;

  Point() = default;
  Point(double x_, double y_) : x(x_), y(y_) {}

  Point operator+(const Point& o) const { return {x + o.x, y + o.y}; }
  Point operator-(const Point& o) const { return {x - o.x, y - o.y}; }
  Point operator*(double s) const { return {x * s, y * s}; }
  double dot(const Point& o) const { return x * o.x + y * o.y; }
  // z-component of the 2D cross product this x o.
  double cross(const Point& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

using Vec2 = Point;

struct Circle {
  Point center;
  double r = 0.0;

  bool contains(const Point& p) const {
    return (p - center).squared_norm() <= r * r;
  }
};

struct Rect {
  double x_min = 0.0, y_min = 0.0;
  double x_max = 0.0, y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(const Point& p, double tol = 0.0) const {
    return p.x >= x_min - tol && p.x <= x_max + tol &&
           p.y >= y_min - tol && p.y <= y_max + tol;
  }
};

// Open polyline; for cracks vertex 0 is the mouth and the last vertex the tip.
struct Polyline {
  std::vector<Point> pts;

  Polyline() = default;
  explicit Polyline(std::vector<Point> p) : pts(std::move(p)) {}

  std::size_t segment_count() const { return pts.empty() ? 0 : pts.size() - 1; }
  const Point& tip() const { return pts.back(); }
  double length() const;
};

// Local frame at a crack tip: origin plus unit tangent of the last segment.
// The positive (left-of-travel) side has theta > 0.
struct TipFrame {
  Point tip;
  Vec2 dir;  // unit

  static TipFrame from_crack(const Polyline& crack);
};

// Polar coordinates of p in a tip frame. r = 0 maps to theta = 0; points on
// the back-ray get theta = +/-pi depending on the side they approach from.
struct PolarCoords {
  double r = 0.0;
  double theta = 0.0;
};

PolarCoords tip_polar(const Point& p, const TipFrame& frame);

// Distance from p to segment [a,b]; a zero-length segment degenerates to the
// point distance.
double point_segment_distance(const Point& p, const Point& a, const Point& b);

// Minimum distance from p to any segment of the polyline.
double point_polyline_distance(const Point& p, const Polyline& poly);

// Side of the crack: +1 on the left of travel of the nearest segment, -1 on
// the right, 0 within kOnCrackTol of the polyline. Ties between segments are
// broken toward the lower segment index.
int crack_side(const Point& p, const Polyline& crack);

// First parameter t in [0,1] at which segment a + t(b-a) meets the closed
// disk, or nullopt if it stays outside. t = 0 when a starts inside.
std::optional<double> segment_circle_hit(const Point& a, const Point& b,
                                         const Circle& c);

// --- convex polygon helpers (quadrature subdivision support) ---

struct Polygon {
  std::vector<Point> v;  // counter-clockwise

  double area() const;
  Point centroid() const;
};

// Splits a convex polygon by the line through a with direction d into the
// negative-side and positive-side parts (side by cross product sign).
// Vertices within tol of the line are shared by both parts.
void split_convex_polygon(const Polygon& poly, const Point& a, const Vec2& d,
                          double tol, Polygon& neg, Polygon& pos);

// Clips segment [p,q] to an axis-aligned rect; returns false if the
// intersection is empty or a single point.
bool clip_segment_to_rect(const Point& p, const Point& q, const Rect& rect,
                          Point& c0, Point& c1);

}  // namespace ccp
