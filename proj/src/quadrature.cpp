#include "ccp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ccp {

int crack_side_or_positive(const Point& p, const Polyline& crack) {
  int s = crack_side(p, crack);
  return s == 0 ? 1 : s;
}

namespace {

struct ParentMap {
  Point center;
  double sx, sy;  // physical -> parent scale
  Point to_parent(const Point& p) const {
    return {(p.x - center.x) * sx, (p.y - center.y) * sy};
  }
  Point to_physical(const Point& xi) const {
    return {center.x + xi.x / sx, center.y + xi.y / sy};
  }
};

ParentMap parent_map(const Mesh& mesh, int e) {
  Point c = mesh.elem_center(e);
  return {c, 2.0 / mesh.hx, 2.0 / mesh.hy};
}

void split_cells_by_line(std::vector<QuadCell>& cells, const Point& a,
                         const Vec2& d, double tol) {
  std::vector<QuadCell> out;
  out.reserve(cells.size() + 2);
  Polygon neg, pos;
  for (QuadCell& c : cells) {
    split_convex_polygon(c.poly, a, d, tol, neg, pos);
    if (neg.v.empty() || pos.v.empty()) {
      out.push_back(std::move(c));
      continue;
    }
    QuadCell cn = c, cp = c;
    cn.poly = neg;
    cp.poly = pos;
    out.push_back(std::move(cn));
    out.push_back(std::move(cp));
  }
  cells = std::move(out);
}

}  // namespace

ElementCells subdivide_element(const Mesh& mesh, int e,
                               const std::vector<CrackPiece>& pieces,
                               const Polyline* crack, bool is_tip,
                               const std::vector<Circle>& holes,
                               const std::vector<int>& elem_hole_idx) {
  const ParentMap pm = parent_map(mesh, e);
  const double tol = 1e-12;

  ElementCells ec;
  ec.cells.push_back({Polygon{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}}, 0, true});

  for (const CrackPiece& cp : pieces) {
    Point a = pm.to_parent(cp.a), b = pm.to_parent(cp.b);
    Vec2 d = b - a;
    if (d.norm() < 1e-12) continue;
    split_cells_by_line(ec.cells, a, d, tol);
  }
  if (is_tip && crack) {
    TipFrame frame = TipFrame::from_crack(*crack);
    Point t = pm.to_parent(frame.tip);
    // Perpendicular through the tip puts the tip on cell corners so fans can
    // anchor there.
    Vec2 perp{-frame.dir.y * pm.sy / pm.sx, frame.dir.x * pm.sx / pm.sy};
    if (perp.norm() > 1e-12) split_cells_by_line(ec.cells, t, perp, tol);
  }

  // Hole trimming: chords with sagitta <= min(h)/100, then flag cells whose
  // centroid falls inside the true circle.
  const double sag = std::min(mesh.hx, mesh.hy) / 100.0;
  Rect er = mesh.elem_rect(e);
  Rect padded{er.x_min - 1e-9, er.y_min - 1e-9, er.x_max + 1e-9, er.y_max + 1e-9};
  for (int hi : elem_hole_idx) {
    const Circle& c = holes[hi];
    double ratio = std::clamp(1.0 - sag / c.r, -1.0, 1.0);
    double alpha = 2.0 * std::acos(ratio);
    int n_chords = std::max(8, static_cast<int>(std::ceil(2.0 * M_PI / alpha)));
    double step = 2.0 * M_PI / n_chords;
    for (int k = 0; k < n_chords; ++k) {
      Point p0{c.center.x + c.r * std::cos(k * step), c.center.y + c.r * std::sin(k * step)};
      Point p1{c.center.x + c.r * std::cos((k + 1) * step), c.center.y + c.r * std::sin((k + 1) * step)};
      Point c0, c1;
      if (!clip_segment_to_rect(p0, p1, padded, c0, c1)) continue;
      Point a = pm.to_parent(p0), b = pm.to_parent(p1);
      Vec2 d = b - a;
      if (d.norm() < 1e-12) continue;
      split_cells_by_line(ec.cells, a, d, tol);
    }
  }

  double material_area = 0.0;
  for (QuadCell& cell : ec.cells) {
    Point cen_phys = pm.to_physical(cell.poly.centroid());
    cell.material = true;
    for (int hi : elem_hole_idx)
      if (holes[hi].contains(cen_phys)) { cell.material = false; break; }
    if (cell.material) material_area += cell.poly.area();
    if (crack && !pieces.empty()) cell.side = crack_side_or_positive(cen_phys, *crack);
  }
  ec.material_fraction = material_area / 4.0;
  return ec;
}

std::unordered_map<int, ElementCells> subdivide_all(
    const Mesh& mesh, const Classification& cls, const Polyline& crack,
    const std::vector<Circle>& holes) {
  std::unordered_map<int, ElementCells> out;
  static const std::vector<CrackPiece> no_pieces;
  for (const auto& [e, pieces] : cls.cuts) {
    if (cls.tag[e] == ElemTag::Void) continue;
    auto it = cls.elem_holes.find(e);
    out.emplace(e, subdivide_element(mesh, e, pieces, &crack,
                                     e == cls.tip_elem, holes,
                                     it == cls.elem_holes.end() ? std::vector<int>{} : it->second));
  }
  for (const auto& [e, hole_idx] : cls.elem_holes) {
    if (cls.tag[e] == ElemTag::Void || out.count(e)) continue;
    bool is_tip = (e == cls.tip_elem);
    const Polyline* ck = crack.pts.size() >= 2 ? &crack : nullptr;
    out.emplace(e, subdivide_element(mesh, e, no_pieces, ck, is_tip, holes, hole_idx));
  }
  // A tip element can lack both cuts and holes when the last segment runs
  // along its boundary; it still needs the perpendicular split.
  if (cls.tip_elem >= 0 && !out.count(cls.tip_elem) && crack.pts.size() >= 2) {
    out.emplace(cls.tip_elem,
                subdivide_element(mesh, cls.tip_elem, no_pieces, &crack, true,
                                  holes, {}));
  }
  return out;
}

std::vector<NodeSideAreas> compute_side_areas(
    const Mesh& mesh, const Classification& cls,
    const std::unordered_map<int, ElementCells>& cells, const Polyline& crack) {
  std::vector<NodeSideAreas> out(mesh.node_count());
  if (crack.pts.size() < 2) return out;

  std::vector<std::uint8_t> candidate(mesh.node_count(), 0);
  for (int e = 0; e < mesh.elem_count(); ++e)
    if (cls.tag[e] == ElemTag::Split)
      for (int n : mesh.elem_nodes(e)) candidate[n] = 1;

  auto accumulate = [&](int node, int e) {
    if (cls.tag[e] == ElemTag::Void) return;
    auto it = cells.find(e);
    if (it == cells.end()) {
      int s = crack_side_or_positive(mesh.elem_center(e), crack);
      (s > 0 ? out[node].pos : out[node].neg) += 4.0;
      return;
    }
    bool cut = false;
    for (const QuadCell& c : it->second.cells) cut = cut || c.side != 0;
    int elem_side = cut ? 0 : crack_side_or_positive(mesh.elem_center(e), crack);
    for (const QuadCell& c : it->second.cells) {
      if (!c.material) continue;
      int s = c.side != 0 ? c.side : elem_side;
      (s > 0 ? out[node].pos : out[node].neg) += c.poly.area();
    }
  };

  for (int n = 0; n < mesh.node_count(); ++n) {
    if (!candidate[n]) continue;
    int i = n % (mesh.nx + 1), j = n / (mesh.nx + 1);
    for (int dj = -1; dj <= 0; ++dj) {
      for (int di = -1; di <= 0; ++di) {
        int ei = i + di, ej = j + dj;
        if (ei < 0 || ei >= mesh.nx || ej < 0 || ej >= mesh.ny) continue;
        accumulate(n, mesh.elem_id(ei, ej));
      }
    }
  }
  return out;
}

const std::vector<GaussPt>& tensor_gauss_2x2() {
  static const double g = 1.0 / std::sqrt(3.0);
  static const std::vector<GaussPt> pts = {
      {{-g, -g}, 1.0}, {{g, -g}, 1.0}, {{g, g}, 1.0}, {{-g, g}, 1.0}};
  return pts;
}

namespace {

struct TriRulePt {
  double l1, l2, l3, w;
};

// Degree-2 rule.
const TriRulePt kTri3[] = {
    {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0},
    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0},
    {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0},
};

// Degree-4 rule.
const TriRulePt kTri6[] = {
    {0.108103018168070, 0.445948490915965, 0.445948490915965, 0.223381589678011},
    {0.445948490915965, 0.108103018168070, 0.445948490915965, 0.223381589678011},
    {0.445948490915965, 0.445948490915965, 0.108103018168070, 0.223381589678011},
    {0.816847572980459, 0.091576213509771, 0.091576213509771, 0.109951743655322},
    {0.091576213509771, 0.816847572980459, 0.091576213509771, 0.109951743655322},
    {0.091576213509771, 0.091576213509771, 0.816847572980459, 0.109951743655322},
};

}  // namespace

void cell_gauss(const QuadCell& cell, int points_per_triangle,
                const Point* apex, std::vector<GaussPt>& out) {
  const std::vector<Point>& v = cell.poly.v;
  if (v.size() < 3) return;
  std::size_t a0 = 0;
  if (apex) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < v.size(); ++i) {
      double d = (v[i] - *apex).squared_norm();
      if (d < best) { best = d; a0 = i; }
    }
  }
  const TriRulePt* rule = points_per_triangle == 6 ? kTri6 : kTri3;
  int npts = points_per_triangle == 6 ? 6 : 3;
  for (std::size_t k = 1; k + 1 < v.size(); ++k) {
    const Point& p0 = v[a0];
    const Point& p1 = v[(a0 + k) % v.size()];
    const Point& p2 = v[(a0 + k + 1) % v.size()];
    double area = 0.5 * ((p1 - p0).cross(p2 - p0));
    if (std::abs(area) < 1e-14) continue;
    for (int q = 0; q < npts; ++q) {
      const TriRulePt& r = rule[q];
      out.push_back({{r.l1 * p0.x + r.l2 * p1.x + r.l3 * p2.x,
                      r.l1 * p0.y + r.l2 * p1.y + r.l3 * p2.y},
                     r.w * area});
    }
  }
}

}  // namespace ccp
