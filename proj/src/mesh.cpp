#include "ccp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ccp {

int Mesh::locate(const Point& p) const {
  int i = static_cast<int>(std::floor((p.x - domain.x_min) / hx));
  int j = static_cast<int>(std::floor((p.y - domain.y_min) / hy));
  i = std::clamp(i, 0, nx - 1);
  j = std::clamp(j, 0, ny - 1);
  return elem_id(i, j);
}

Mesh build_mesh(const Rect& domain, int nx, int ny) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("mesh needs nx, ny >= 1");
  if (domain.width() <= 0.0 || domain.height() <= 0.0)
    throw std::invalid_argument("domain must have positive extent");
  Mesh m;
  m.domain = domain;
  m.nx = nx;
  m.ny = ny;
  m.hx = domain.width() / nx;
  m.hy = domain.height() / ny;
  return m;
}

namespace {

// Elements whose closed rect a segment's bounding box can touch.
void segment_elem_range(const Mesh& m, const Point& a, const Point& b,
                        int& i0, int& i1, int& j0, int& j1) {
  double pad = 1e-12 * m.diag();
  double xmin = std::min(a.x, b.x) - pad, xmax = std::max(a.x, b.x) + pad;
  double ymin = std::min(a.y, b.y) - pad, ymax = std::max(a.y, b.y) + pad;
  i0 = std::clamp(static_cast<int>(std::floor((xmin - m.domain.x_min) / m.hx)), 0, m.nx - 1);
  i1 = std::clamp(static_cast<int>(std::floor((xmax - m.domain.x_min) / m.hx)), 0, m.nx - 1);
  j0 = std::clamp(static_cast<int>(std::floor((ymin - m.domain.y_min) / m.hy)), 0, m.ny - 1);
  j1 = std::clamp(static_cast<int>(std::floor((ymax - m.domain.y_min) / m.hy)), 0, m.ny - 1);
}

}  // namespace

Classification classify_elements(const Mesh& mesh, const Polyline& crack,
                                 const std::vector<Circle>& holes) {
  Classification cls;
  cls.tag.assign(mesh.elem_count(), ElemTag::Standard);

  // Holes first: Void when all four corners sit in one hole, HoleCut when the
  // circle reaches the element at all.
  for (std::size_t h = 0; h < holes.size(); ++h) {
    const Circle& c = holes[h];
    int i0 = std::clamp(static_cast<int>(std::floor((c.center.x - c.r - mesh.domain.x_min) / mesh.hx)) - 1, 0, mesh.nx - 1);
    int i1 = std::clamp(static_cast<int>(std::floor((c.center.x + c.r - mesh.domain.x_min) / mesh.hx)) + 1, 0, mesh.nx - 1);
    int j0 = std::clamp(static_cast<int>(std::floor((c.center.y - c.r - mesh.domain.y_min) / mesh.hy)) - 1, 0, mesh.ny - 1);
    int j1 = std::clamp(static_cast<int>(std::floor((c.center.y + c.r - mesh.domain.y_min) / mesh.hy)) + 1, 0, mesh.ny - 1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        int e = mesh.elem_id(i, j);
        Rect r = mesh.elem_rect(e);
        // distance from circle center to the closed rect
        double dx = std::max({r.x_min - c.center.x, 0.0, c.center.x - r.x_max});
        double dy = std::max({r.y_min - c.center.y, 0.0, c.center.y - r.y_max});
        if (dx * dx + dy * dy > c.r * c.r) continue;
        bool all_in = true;
        for (const Point& q : {Point{r.x_min, r.y_min}, Point{r.x_max, r.y_min},
                               Point{r.x_max, r.y_max}, Point{r.x_min, r.y_max}})
          all_in = all_in && c.contains(q);
        if (all_in) {
          cls.tag[e] = ElemTag::Void;
        } else {
          if (cls.tag[e] == ElemTag::Standard) cls.tag[e] = ElemTag::HoleCut;
          cls.elem_holes[e].push_back(static_cast<int>(h));
        }
      }
    }
  }

  if (crack.pts.size() >= 2) {
    double len_tol = 1e-9 * mesh.diag();
    for (std::size_t s = 0; s + 1 < crack.pts.size(); ++s) {
      const Point& a = crack.pts[s];
      const Point& b = crack.pts[s + 1];
      int i0, i1, j0, j1;
      segment_elem_range(mesh, a, b, i0, i1, j0, j1);
      for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
          int e = mesh.elem_id(i, j);
          if (cls.tag[e] == ElemTag::Void) continue;
          Point c0, c1;
          if (!clip_segment_to_rect(a, b, mesh.elem_rect(e), c0, c1)) continue;
          if ((c1 - c0).norm() < len_tol) continue;
          cls.cuts[e].push_back({c0, c1, static_cast<int>(s)});
        }
      }
    }

    // Tip element: nudge the tip backwards along the final segment so a tip
    // sitting on a grid line or node resolves deterministically. A tip
    // outside the domain means the crack runs out of it: no tip element.
    TipFrame frame = TipFrame::from_crack(crack);
    Point probe = frame.tip - frame.dir * (1e-9 * mesh.diag());
    cls.tip_elem = mesh.domain.contains(probe, 0.0) ? mesh.locate(probe) : -1;

    for (auto& [e, pieces] : cls.cuts) {
      if (cls.tag[e] == ElemTag::Void) continue;
      cls.tag[e] = (e == cls.tip_elem) ? ElemTag::Tip : ElemTag::Split;
    }
    if (cls.tip_elem >= 0 && cls.tag[cls.tip_elem] != ElemTag::Tip) {
      // Tip element without a recorded cut (possible when the whole last
      // segment collapses onto the element boundary): still tag it.
      cls.tag[cls.tip_elem] = ElemTag::Tip;
    }
  }

  return cls;
}

DofMap build_dof_map(const Mesh& mesh, const Classification& cls,
                     const std::vector<NodeSideAreas>& side_areas) {
  const int n_nodes = mesh.node_count();
  DofMap dm;
  dm.std_dof.assign(n_nodes, -1);
  dm.h_dof.assign(n_nodes, -1);
  dm.branch_dof.assign(n_nodes, -1);

  std::vector<std::uint8_t> active(n_nodes, 0), h_candidate(n_nodes, 0), branch(n_nodes, 0);
  for (int e = 0; e < mesh.elem_count(); ++e) {
    if (cls.tag[e] == ElemTag::Void) continue;
    for (int n : mesh.elem_nodes(e)) {
      active[n] = 1;
      if (cls.tag[e] == ElemTag::Split) h_candidate[n] = 1;
    }
  }
  if (cls.tip_elem >= 0 && cls.tag[cls.tip_elem] == ElemTag::Tip)
    for (int n : mesh.elem_nodes(cls.tip_elem)) branch[n] = 1;

  dm.total = 0;
  auto push = [&dm](int node, DofKind kind, int alpha) {
    for (int comp = 0; comp < 2; ++comp)
      dm.desc.push_back({node, kind, static_cast<std::uint8_t>(comp),
                         static_cast<std::uint8_t>(alpha)});
    dm.total += 2;
  };
  for (int n = 0; n < n_nodes; ++n) {
    if (!active[n]) continue;
    dm.std_dof[n] = dm.total;
    push(n, DofKind::Std, 0);
    if (h_candidate[n]) {
      const NodeSideAreas& sa = side_areas[n];
      double tot = sa.pos + sa.neg;
      if (tot > 0.0 && std::min(sa.pos, sa.neg) >= kEnrichAreaTol * tot) {
        dm.h_dof[n] = dm.total;
        push(n, DofKind::Heaviside, 0);
      }
    }
    if (branch[n]) {
      dm.branch_dof[n] = dm.total;
      for (int a = 0; a < 4; ++a) push(n, DofKind::Branch, a);
    }
  }
  return dm;
}

}  // namespace ccp
