#include <doctest.h>

#include <cmath>
#include <optional>
#include <random>

#include "ccp/geometry.hpp"

using namespace ccp;

namespace {

double brute_segment_distance(const Point& p, const Point& a, const Point& b, int n) {
  double best = 1e300;
  for (int i = 0; i <= n; ++i) {
    double t = static_cast<double>(i) / n;
    Point q{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    best = std::min(best, (p - q).norm());
  }
  return best;
}

}  // namespace

TEST_CASE("point-segment distance matches dense sampling") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int it = 0; it < 200; ++it) {
    Point a{u(rng), u(rng)}, b{u(rng), u(rng)}, p{u(rng), u(rng)};
    if ((b - a).norm() < 1e-6) continue;
    double exact = point_segment_distance(p, a, b);
    double brute = brute_segment_distance(p, a, b, 100000);
    CHECK(exact <= brute + 1e-12);
    CHECK(brute - exact <= 1e-6 + 1e-7 * brute);
  }
}

TEST_CASE("point-segment distance endpoints and degenerate segment") {
  Point a{0, 0}, b{2, 0};
  CHECK(point_segment_distance({-1, 0}, a, b) == doctest::Approx(1.0));
  CHECK(point_segment_distance({3, 0}, a, b) == doctest::Approx(1.0));
  CHECK(point_segment_distance({1, 0.5}, a, b) == doctest::Approx(0.5));
  CHECK(point_segment_distance({1, 1}, a, a) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("polyline distance is min over segments") {
  Polyline pl;
  pl.pts = {{0, 0}, {1, 0}, {1, 1}};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  for (int it = 0; it < 100; ++it) {
    Point p{u(rng), u(rng)};
    double d0 = point_segment_distance(p, pl.pts[0], pl.pts[1]);
    double d1 = point_segment_distance(p, pl.pts[1], pl.pts[2]);
    CHECK(point_polyline_distance(p, pl) == doctest::Approx(std::min(d0, d1)));
  }
}

TEST_CASE("crack side signs for a horizontal polyline") {
  Polyline pl;
  pl.pts = {{0, 0}, {2, 0}};
  CHECK(crack_side({1.0, 0.5}, pl) == 1);
  CHECK(crack_side({1.0, -0.5}, pl) == -1);
  CHECK(crack_side({1.0, 0.0}, pl) == 0);
  CHECK(crack_side({0.5, 1e-15}, pl) == 0);
}

TEST_CASE("crack side flips under reflection across a straight polyline") {
  Polyline pl;
  pl.pts = {{-1, -1}, {0.5, 0.5}, {2, 2}};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 2.5);
  for (int it = 0; it < 200; ++it) {
    Point p{u(rng), u(rng)};
    if (std::abs(p.y - p.x) < 1e-6) continue;
    Point mirrored{p.y, p.x};
    int s1 = crack_side(p, pl);
    int s2 = crack_side(mirrored, pl);
    CHECK(s1 == -s2);
    CHECK(s1 != 0);
  }
}

TEST_CASE("crack side near a kink stays consistent") {
  Polyline pl;
  pl.pts = {{0, 0}, {1, 0}, {2, 1}};
  // Above both legs.
  CHECK(crack_side({0.5, 0.3}, pl) == 1);
  CHECK(crack_side({1.2, 0.9}, pl) == 1);
  // Below both legs.
  CHECK(crack_side({0.5, -0.3}, pl) == -1);
  CHECK(crack_side({1.8, 0.1}, pl) == -1);
}

TEST_CASE("tip polar round-trips radius and angle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ua(-M_PI, M_PI);
  std::uniform_real_distribution<double> ur(1e-3, 2.0);
  std::uniform_real_distribution<double> ut(-0.99 * M_PI, 0.99 * M_PI);
  for (int it = 0; it < 300; ++it) {
    double phi = ua(rng);
    TipFrame f;
    f.tip = {ua(rng), ua(rng)};
    f.dir = {std::cos(phi), std::sin(phi)};
    double r = ur(rng), th = ut(rng);
    Vec2 n{-f.dir.y, f.dir.x};
    Point p{f.tip.x + r * (f.dir.x * std::cos(th) + n.x * std::sin(th)),
            f.tip.y + r * (f.dir.y * std::cos(th) + n.y * std::sin(th))};
    PolarCoords pc = tip_polar(p, f);
    CHECK(pc.r == doctest::Approx(r).epsilon(1e-10));
    CHECK(pc.theta == doctest::Approx(th).epsilon(1e-10));
  }
  TipFrame f;
  f.tip = {1.0, 2.0};
  f.dir = {1.0, 0.0};
  PolarCoords at_tip = tip_polar(f.tip, f);
  CHECK(at_tip.r == 0.0);
  CHECK(at_tip.theta == 0.0);
}

TEST_CASE("tip frame follows the last crack segment") {
  Polyline pl;
  pl.pts = {{0, 0}, {1, 0}, {1, 1}};
  TipFrame f = TipFrame::from_crack(pl);
  CHECK(f.tip.x == doctest::Approx(1.0));
  CHECK(f.tip.y == doctest::Approx(1.0));
  CHECK(f.dir.x == doctest::Approx(0.0));
  CHECK(f.dir.y == doctest::Approx(1.0));
}

TEST_CASE("segment-circle hit matches marching oracle") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> ur(0.2, 1.0);
  int hits = 0;
  for (int it = 0; it < 300; ++it) {
    Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
    Circle c{{u(rng), u(rng)}, ur(rng)};
    std::optional<double> t_hit = segment_circle_hit(a, b, c);

    const int n = 200000;
    double t_march = -1.0;
    for (int i = 0; i <= n; ++i) {
      double t = static_cast<double>(i) / n;
      Point q{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
      if ((q - c.center).norm() <= c.r) {
        t_march = t;
        break;
      }
    }
    if (t_march < 0.0) {
      CHECK(!t_hit.has_value());
      continue;
    }
    // Grazing contact can be missed by marching but not vice versa.
    REQUIRE(t_hit.has_value());
    ++hits;
    CHECK(*t_hit <= t_march + 1e-12);
    CHECK(t_march - *t_hit <= 2.0 / n + 1e-9);
  }
  CHECK(hits > 50);
}

TEST_CASE("segment starting inside a circle hits at t=0") {
  Circle c{{0, 0}, 1.0};
  auto t = segment_circle_hit({0.2, 0.1}, {5, 5}, c);
  REQUIRE(t.has_value());
  CHECK(*t == 0.0);
}

TEST_CASE("polygon area and centroid") {
  Polygon sq;
  sq.v = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK(sq.area() == doctest::Approx(1.0));
  CHECK(sq.centroid().x == doctest::Approx(0.5));
  CHECK(sq.centroid().y == doctest::Approx(0.5));

  Polygon tri;
  tri.v = {{0, 0}, {3, 0}, {0, 3}};
  CHECK(tri.area() == doctest::Approx(4.5));
  CHECK(tri.centroid().x == doctest::Approx(1.0));
  CHECK(tri.centroid().y == doctest::Approx(1.0));
}

TEST_CASE("splitting a convex polygon preserves area and separates sides") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int it = 0; it < 200; ++it) {
    Polygon sq;
    sq.v = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
    Point a{u(rng), u(rng)};
    double phi = u(rng) * M_PI;
    Vec2 d{std::cos(phi), std::sin(phi)};
    Polygon neg, pos;
    split_convex_polygon(sq, a, d, 1e-12, neg, pos);
    double total = 0.0;
    if (neg.v.size() >= 3) total += std::abs(neg.area());
    if (pos.v.size() >= 3) total += std::abs(pos.area());
    CHECK(total == doctest::Approx(4.0).epsilon(1e-9));
    for (const Point& p : pos.v)
      CHECK(d.cross(p - a) >= -1e-9);
    for (const Point& p : neg.v)
      CHECK(d.cross(p - a) <= 1e-9);
  }
}

TEST_CASE("clip segment to rect") {
  Rect r{0, 0, 2, 1};
  Point c0, c1;
  REQUIRE(clip_segment_to_rect({-1, 0.5}, {3, 0.5}, r, c0, c1));
  CHECK(c0.x == doctest::Approx(0.0));
  CHECK(c1.x == doctest::Approx(2.0));
  CHECK(c0.y == doctest::Approx(0.5));
  CHECK(!clip_segment_to_rect({-1, 2}, {3, 2}, r, c0, c1));
  REQUIRE(clip_segment_to_rect({0.5, 0.5}, {1.5, 0.8}, r, c0, c1));
  CHECK(c0.x == doctest::Approx(0.5));
  CHECK(c1.x == doctest::Approx(1.5));
  CHECK(c1.y == doctest::Approx(0.8));
}
