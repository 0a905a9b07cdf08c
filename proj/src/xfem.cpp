#include "ccp/xfem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ccp {

Eigen::Matrix3d Material::D() const {
  Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
  if (state == PlaneState::PlaneStrain) {
    double c = E / ((1.0 + nu) * (1.0 - 2.0 * nu));
    d(0, 0) = d(1, 1) = c * (1.0 - nu);
    d(0, 1) = d(1, 0) = c * nu;
    d(2, 2) = c * (1.0 - 2.0 * nu) / 2.0;
  } else {
    double c = E / (1.0 - nu * nu);
    d(0, 0) = d(1, 1) = c;
    d(0, 1) = d(1, 0) = c * nu;
    d(2, 2) = c * (1.0 - nu) / 2.0;
  }
  return d;
}

std::array<double, 4> tip_enrichment(const PolarCoords& pc) {
  double sr = std::sqrt(pc.r);
  double st = std::sin(pc.theta), s2 = std::sin(0.5 * pc.theta), c2 = std::cos(0.5 * pc.theta);
  return {sr * s2, sr * c2, sr * st * s2, sr * st * c2};
}

TipEnrichmentGrad tip_enrichment_grad(const Point& p, const TipFrame& frame) {
  PolarCoords pc = tip_polar(p, frame);
  TipEnrichmentGrad out;
  out.value = tip_enrichment(pc);
  if (pc.r <= 0.0) {
    out.grad.fill({0.0, 0.0});
    return out;
  }
  double inv = 1.0 / (2.0 * std::sqrt(pc.r));
  double st = std::sin(pc.theta), ct = std::cos(pc.theta);
  double s2 = std::sin(0.5 * pc.theta), c2 = std::cos(0.5 * pc.theta);
  double s32 = std::sin(1.5 * pc.theta), c32 = std::cos(1.5 * pc.theta);
  // gradients in the tip-local frame (x1 along the crack, x2 normal)
  Vec2 local[4] = {
      {-inv * s2, inv * c2},
      {inv * c2, inv * s2},
      {-inv * s32 * st, inv * (s2 + s32 * ct)},
      {-inv * c32 * st, inv * (c2 + c32 * ct)},
  };
  double c = frame.dir.x, s = frame.dir.y;
  for (int a = 0; a < 4; ++a)
    out.grad[a] = {c * local[a].x - s * local[a].y,
                   s * local[a].x + c * local[a].y};
  return out;
}

XfemModel XfemModel::build(const Mesh& mesh, const Material& mat,
                           const Polyline& crack,
                           const std::vector<Circle>& holes) {
  XfemModel m;
  m.mesh = &mesh;
  m.mat = mat;
  m.crack = crack;
  m.holes = holes;
  m.has_crack = crack.pts.size() >= 2;
  m.cls = classify_elements(mesh, crack, holes);
  m.cells = subdivide_all(mesh, m.cls, crack, holes);
  // A circle can cover an element except for a sliver thinner than the chord
  // approximation, leaving a hole-cut element with (near) zero material. Its
  // nodes would stay active with no stiffness behind them, so such elements
  // become void outright. The tip element keeps its tag: the growth loop
  // handles a tip swallowed by a hole on its own.
  for (auto it = m.cells.begin(); it != m.cells.end();) {
    const int e = it->first;
    const bool holed = m.cls.elem_holes.count(e) > 0;
    if (holed && e != m.cls.tip_elem &&
        it->second.material_fraction < kEnrichAreaTol) {
      m.cls.tag[e] = ElemTag::Void;
      it = m.cells.erase(it);
    } else {
      ++it;
    }
  }
  auto side_areas = compute_side_areas(mesh, m.cls, m.cells, crack);
  m.dm = build_dof_map(mesh, m.cls, side_areas);
  if (m.has_crack) m.frame = TipFrame::from_crack(crack);
  return m;
}

namespace {

// Bilinear shape functions on the parent square, node order CCW from (-1,-1).
void shape_q4(const Point& xi, double N[4], Vec2 dN_dxi[4]) {
  const double sx[4] = {-1, 1, 1, -1}, sy[4] = {-1, -1, 1, 1};
  for (int k = 0; k < 4; ++k) {
    N[k] = 0.25 * (1.0 + sx[k] * xi.x) * (1.0 + sy[k] * xi.y);
    dN_dxi[k] = {0.25 * sx[k] * (1.0 + sy[k] * xi.y),
                 0.25 * sy[k] * (1.0 + sx[k] * xi.x)};
  }
}

// Per-element basis context: nodal enrichment values and dof layout.
struct BasisCtx {
  const XfemModel* model;
  int e;
  std::array<int, 4> nodes;
  std::array<Point, 4> pos;
  Point center;
  double ax, ay;  // d(xi)/dx, d(eta)/dy
  std::array<int, 4> h_node;          // crack side at the node, 0 if no H dof
  std::array<std::array<double, 4>, 4> phi_node;
  bool any_h = false, any_branch = false;
  int elem_side = 0;  // fallback H side for uncut cells
  std::vector<int> dofs;  // global dof list in fixed per-node order

  Point to_phys(const Point& xi) const {
    return {center.x + xi.x / ax, center.y + xi.y / ay};
  }
};

BasisCtx make_ctx(const XfemModel& model, int e) {
  BasisCtx c;
  c.model = &model;
  c.e = e;
  const Mesh& mesh = *model.mesh;
  c.nodes = mesh.elem_nodes(e);
  c.center = mesh.elem_center(e);
  c.ax = 2.0 / mesh.hx;
  c.ay = 2.0 / mesh.hy;
  c.h_node = {0, 0, 0, 0};
  for (int k = 0; k < 4; ++k) {
    int n = c.nodes[k];
    c.pos[k] = mesh.node_pos(n);
    if (model.dm.h_dof[n] >= 0) {
      c.any_h = true;
      c.h_node[k] = crack_side_or_positive(c.pos[k], model.crack);
    }
    if (model.dm.branch_dof[n] >= 0) {
      c.any_branch = true;
      c.phi_node[k] = tip_enrichment(tip_polar(c.pos[k], model.frame));
    }
  }
  if (model.has_crack && (c.any_h || c.any_branch))
    c.elem_side = crack_side_or_positive(c.center, model.crack);
  for (int k = 0; k < 4; ++k) {
    int n = c.nodes[k];
    const DofMap& dm = model.dm;
    if (dm.std_dof[n] >= 0) { c.dofs.push_back(dm.std_dof[n]); c.dofs.push_back(dm.std_dof[n] + 1); }
    if (dm.h_dof[n] >= 0) { c.dofs.push_back(dm.h_dof[n]); c.dofs.push_back(dm.h_dof[n] + 1); }
    if (dm.branch_dof[n] >= 0)
      for (int a = 0; a < 4; ++a) {
        c.dofs.push_back(dm.branch_index(n, a, 0));
        c.dofs.push_back(dm.branch_index(n, a, 1));
      }
  }
  return c;
}

// Scalar basis value and physical gradient per x-dof (the y-dof shares them).
struct BasisEval {
  int count = 0;
  double val[40];
  Vec2 grad[40];
};

void eval_basis(const BasisCtx& c, const Point& xi, int side, BasisEval& out) {
  double N[4];
  Vec2 dN_dxi[4];
  shape_q4(xi, N, dN_dxi);
  Vec2 dN[4];
  for (int k = 0; k < 4; ++k) dN[k] = {dN_dxi[k].x * c.ax, dN_dxi[k].y * c.ay};

  Point phys = c.to_phys(xi);
  TipEnrichmentGrad te;
  if (c.any_branch) te = tip_enrichment_grad(phys, c.model->frame);

  out.count = 0;
  const DofMap& dm = c.model->dm;
  for (int k = 0; k < 4; ++k) {
    int n = c.nodes[k];
    if (dm.std_dof[n] >= 0) {
      out.val[out.count] = N[k];
      out.grad[out.count++] = dN[k];
    }
    if (dm.h_dof[n] >= 0) {
      double h = static_cast<double>(side != 0 ? side : c.elem_side) - c.h_node[k];
      out.val[out.count] = h * N[k];
      out.grad[out.count++] = {h * dN[k].x, h * dN[k].y};
    }
    if (dm.branch_dof[n] >= 0) {
      for (int a = 0; a < 4; ++a) {
        double ps = te.value[a] - c.phi_node[k][a];
        out.val[out.count] = ps * N[k];
        out.grad[out.count++] = {te.grad[a].x * N[k] + ps * dN[k].x,
                                 te.grad[a].y * N[k] + ps * dN[k].y};
      }
    }
  }
}

// Gauss points for one element, honouring subdivision and enrichment.
void element_gauss(const XfemModel& model, const BasisCtx& c,
                   std::vector<GaussPt>& pts, std::vector<int>& sides) {
  pts.clear();
  sides.clear();
  auto it = model.cells.find(c.e);
  Point tip_parent;
  const Point* apex = nullptr;
  if (c.any_branch && model.has_crack) {
    tip_parent = {(model.frame.tip.x - c.center.x) * c.ax,
                  (model.frame.tip.y - c.center.y) * c.ay};
    apex = &tip_parent;
  }
  if (it == model.cells.end()) {
    if (c.any_branch) {
      QuadCell full{Polygon{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}}, 0, true};
      cell_gauss(full, 6, apex, pts);
      sides.assign(pts.size(), 0);
    } else {
      pts = tensor_gauss_2x2();
      sides.assign(pts.size(), 0);
    }
    return;
  }
  int per_tri = c.any_branch ? 6 : 3;
  for (const QuadCell& cell : it->second.cells) {
    if (!cell.material) continue;
    std::size_t before = pts.size();
    cell_gauss(cell, per_tri, apex, pts);
    sides.resize(pts.size(), cell.side);
  }
}

}  // namespace

ElementBlock element_stiffness(const XfemModel& model, int e) {
  if (model.cls.tag[e] == ElemTag::Void) return {};
  BasisCtx c = make_ctx(model, e);
  const int nd = static_cast<int>(c.dofs.size());
  ElementBlock blk;
  blk.dofs = c.dofs;
  blk.K = Eigen::MatrixXd::Zero(nd, nd);

  std::vector<GaussPt> pts;
  std::vector<int> sides;
  element_gauss(model, c, pts, sides);

  const Eigen::Matrix3d D = model.mat.D();
  const double detj = (model.mesh->hx * model.mesh->hy) / 4.0;
  BasisEval be;
  Eigen::MatrixXd B(3, nd);
  for (std::size_t g = 0; g < pts.size(); ++g) {
    eval_basis(c, pts[g].xi, sides[g], be);
    B.setZero();
    for (int k = 0; k < be.count; ++k) {
      B(0, 2 * k) = be.grad[k].x;
      B(1, 2 * k + 1) = be.grad[k].y;
      B(2, 2 * k) = be.grad[k].y;
      B(2, 2 * k + 1) = be.grad[k].x;
    }
    blk.K.noalias() += B.transpose() * D * B * (pts[g].w * detj);
  }
  blk.K = ((blk.K + blk.K.transpose()) / 2.0).eval();
  return blk;
}

std::vector<IntegrationPoint> element_integration_points(const XfemModel& model, int e) {
  std::vector<IntegrationPoint> out;
  if (model.cls.tag[e] == ElemTag::Void) return out;
  BasisCtx c = make_ctx(model, e);
  std::vector<GaussPt> pts;
  std::vector<int> sides;
  element_gauss(model, c, pts, sides);
  const double detj = (model.mesh->hx * model.mesh->hy) / 4.0;
  out.resize(pts.size());
  for (std::size_t g = 0; g < pts.size(); ++g) {
    out[g].xi = pts[g].xi;
    out[g].x = c.to_phys(pts[g].xi);
    out[g].w = pts[g].w * detj;
    out[g].side = sides[g];
  }
  return out;
}

namespace {

bool same_pieces(const Classification& a, const Classification& b, int e) {
  auto ia = a.cuts.find(e);
  auto ib = b.cuts.find(e);
  bool ha = ia != a.cuts.end(), hb = ib != b.cuts.end();
  if (ha != hb) return false;
  if (!ha) return true;
  const auto& pa = ia->second;
  const auto& pb = ib->second;
  if (pa.size() != pb.size()) return false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (pa[k].a.x != pb[k].a.x || pa[k].a.y != pb[k].a.y ||
        pa[k].b.x != pb[k].b.x || pa[k].b.y != pb[k].b.y)
      return false;
  }
  return true;
}

bool element_dirty(const XfemModel& model, const XfemModel& prev, int e) {
  if (model.cls.tag[e] != prev.cls.tag[e]) return true;
  if (!same_pieces(model.cls, prev.cls, e)) return true;
  const auto nodes = model.mesh->elem_nodes(e);
  bool any_h = false, any_branch = false;
  for (int n : nodes) {
    bool h_now = model.dm.h_dof[n] >= 0, h_before = prev.dm.h_dof[n] >= 0;
    bool b_now = model.dm.branch_dof[n] >= 0, b_before = prev.dm.branch_dof[n] >= 0;
    if (h_now != h_before || b_now != b_before) return true;
    any_h = any_h || h_now;
    any_branch = any_branch || b_now || b_before;
  }
  if (any_branch) {
    // Branch functions move with the tip.
    if (model.frame.tip.x != prev.frame.tip.x ||
        model.frame.tip.y != prev.frame.tip.y ||
        model.frame.dir.x != prev.frame.dir.x ||
        model.frame.dir.y != prev.frame.dir.y)
      return true;
  }
  if (any_h) {
    for (int n : nodes)
      if (model.dm.h_dof[n] >= 0 &&
          crack_side_or_positive(model.mesh->node_pos(n), model.crack) !=
              crack_side_or_positive(prev.mesh->node_pos(n), prev.crack))
        return true;
    if (crack_side_or_positive(model.mesh->elem_center(e), model.crack) !=
        crack_side_or_positive(prev.mesh->elem_center(e), prev.crack))
      return true;
  }
  return false;
}

}  // namespace

void Assembler::update(const XfemModel& model, const XfemModel* prev) {
  const int ne = model.mesh->elem_count();
  if (static_cast<int>(values_.size()) != ne) {
    values_.assign(ne, Eigen::MatrixXd());
    blocks_.assign(ne, ElementBlock());
    prev = nullptr;
  }
  dirty_.clear();
  for (int e = 0; e < ne; ++e) {
    if (model.cls.tag[e] == ElemTag::Void) {
      values_[e].resize(0, 0);
      blocks_[e].dofs.clear();
      blocks_[e].K.resize(0, 0);
      continue;
    }
    bool dirty = (prev == nullptr) || element_dirty(model, *prev, e) ||
                 values_[e].size() == 0;
    if (dirty) {
      ElementBlock blk = element_stiffness(model, e);
      values_[e] = std::move(blk.K);
      dirty_.push_back(e);
    }
    // dof indices shift between steps even for clean blocks
    BasisCtx c = make_ctx(model, e);
    blocks_[e].dofs = std::move(c.dofs);
    blocks_[e].K = values_[e];
  }
}

SpMat Assembler::build_matrix(const XfemModel& model) const {
  struct Entry {
    int row, col;
    double v;
  };
  std::vector<Entry> entries;
  std::size_t total = 0;
  for (const ElementBlock& b : blocks_) total += b.dofs.size() * b.dofs.size();
  entries.reserve(total);
  for (const ElementBlock& b : blocks_) {
    const int nd = static_cast<int>(b.dofs.size());
    for (int j = 0; j < nd; ++j)
      for (int i = 0; i < nd; ++i)
        entries.push_back({b.dofs[i], b.dofs[j], b.K(i, j)});
  }
  // Stable order keeps per-entry accumulation deterministic, so rows away
  // from any change reassemble bit-identically.
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  SpMat K(model.dm.total, model.dm.total);
  std::vector<int> col_nnz(model.dm.total, 0);
  for (std::size_t k = 0; k < entries.size();) {
    std::size_t j = k + 1;
    while (j < entries.size() && entries[j].row == entries[k].row &&
           entries[j].col == entries[k].col)
      ++j;
    ++col_nnz[entries[k].col];
    k = j;
  }
  K.reserve(col_nnz);
  for (std::size_t k = 0; k < entries.size();) {
    double sum = entries[k].v;
    std::size_t j = k + 1;
    while (j < entries.size() && entries[j].row == entries[k].row &&
           entries[j].col == entries[k].col) {
      sum += entries[j].v;
      ++j;
    }
    K.insert(entries[k].row, entries[k].col) = sum;
    k = j;
  }
  K.makeCompressed();
  return K;
}

namespace {

void edge_nodes_range(const Mesh& mesh, Edge edge, int idx, int& n0, int& n1, int& e_id) {
  switch (edge) {
    case Edge::Bottom:
      n0 = mesh.node_id(idx, 0);
      n1 = mesh.node_id(idx + 1, 0);
      e_id = mesh.elem_id(idx, 0);
      break;
    case Edge::Top:
      n0 = mesh.node_id(idx, mesh.ny);
      n1 = mesh.node_id(idx + 1, mesh.ny);
      e_id = mesh.elem_id(idx, mesh.ny - 1);
      break;
    case Edge::Left:
      n0 = mesh.node_id(0, idx);
      n1 = mesh.node_id(0, idx + 1);
      e_id = mesh.elem_id(0, idx);
      break;
    case Edge::Right:
      n0 = mesh.node_id(mesh.nx, idx);
      n1 = mesh.node_id(mesh.nx, idx + 1);
      e_id = mesh.elem_id(mesh.nx - 1, idx);
      break;
  }
}

}  // namespace

BcResult apply_loads_bcs(const XfemModel& model, const LoadSpec& loads) {
  const Mesh& mesh = *model.mesh;
  const DofMap& dm = model.dm;
  BcResult bc;
  bc.F = Eigen::VectorXd::Zero(dm.total);
  bc.fixed.assign(dm.total, 0);

  // Consistent tractions via 2-point Gauss on each boundary element edge,
  // using the full (possibly enriched) basis.
  const double g = 1.0 / std::sqrt(3.0);
  for (const EdgeTraction& tr : loads.tractions) {
    bool horizontal = tr.edge == Edge::Bottom || tr.edge == Edge::Top;
    int count = horizontal ? mesh.nx : mesh.ny;
    double len = horizontal ? mesh.hx : mesh.hy;
    for (int idx = 0; idx < count; ++idx) {
      int n0, n1, e_id;
      edge_nodes_range(mesh, tr.edge, idx, n0, n1, e_id);
      if (model.cls.tag[e_id] == ElemTag::Void) continue;
      BasisCtx c = make_ctx(model, e_id);
      BasisEval be;
      for (double xg : {-g, g}) {
        Point xi;
        switch (tr.edge) {
          case Edge::Bottom: xi = {xg, -1.0}; break;
          case Edge::Top: xi = {xg, 1.0}; break;
          case Edge::Left: xi = {-1.0, xg}; break;
          case Edge::Right: xi = {1.0, xg}; break;
        }
        int side = 0;
        if (model.has_crack && (c.any_h || c.any_branch))
          side = crack_side_or_positive(c.to_phys(xi), model.crack);
        eval_basis(c, xi, side, be);
        double w = len / 2.0;
        for (int k = 0; k < be.count; ++k) {
          bc.F[c.dofs[2 * k]] += tr.qx * be.val[k] * w;
          bc.F[c.dofs[2 * k + 1]] += tr.qy * be.val[k] * w;
        }
      }
    }
  }

  for (const PointForce& pf : loads.point_forces) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int n = 0; n < mesh.node_count(); ++n) {
      if (dm.std_dof[n] < 0) continue;
      double d = (mesh.node_pos(n) - pf.at).squared_norm();
      if (d < bd) { bd = d; best = n; }
    }
    if (best < 0) throw std::runtime_error("point force with no active node");
    bc.F[dm.std_dof[best]] += pf.fx;
    bc.F[dm.std_dof[best] + 1] += pf.fy;
  }

  // Zero-valued constraints on the standard pairs; shifted enrichment keeps
  // nodal displacements exact, so enriched dofs stay free.
  auto fix_node = [&](int n, bool fx, bool fy) {
    if (dm.std_dof[n] < 0) return;
    if (fx) bc.fixed[dm.std_dof[n]] = 1;
    if (fy) bc.fixed[dm.std_dof[n] + 1] = 1;
  };
  for (const EdgeFix& ef : loads.fixed_edges) {
    bool horizontal = ef.edge == Edge::Bottom || ef.edge == Edge::Top;
    int count = horizontal ? mesh.nx + 1 : mesh.ny + 1;
    for (int idx = 0; idx < count; ++idx) {
      int n;
      switch (ef.edge) {
        case Edge::Bottom: n = mesh.node_id(idx, 0); break;
        case Edge::Top: n = mesh.node_id(idx, mesh.ny); break;
        case Edge::Left: n = mesh.node_id(0, idx); break;
        case Edge::Right: n = mesh.node_id(mesh.nx, idx); break;
      }
      fix_node(n, ef.fix_x, ef.fix_y);
    }
  }
  for (const NodeFix& nf : loads.fixed_nodes) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int n = 0; n < mesh.node_count(); ++n) {
      if (dm.std_dof[n] < 0) continue;
      double d = (mesh.node_pos(n) - nf.at).squared_norm();
      if (d < bd) { bd = d; best = n; }
    }
    if (best >= 0) fix_node(best, nf.fix_x, nf.fix_y);
  }

  bc.full_to_free.assign(dm.total, -1);
  for (int i = 0; i < dm.total; ++i) {
    if (!bc.fixed[i]) {
      bc.full_to_free[i] = static_cast<int>(bc.free_to_full.size());
      bc.free_to_full.push_back(i);
    }
  }
  return bc;
}

SpMat reduce_matrix(const SpMat& K, const BcResult& bc) {
  const int nf = static_cast<int>(bc.free_to_full.size());
  SpMat R(nf, nf);
  std::vector<int> col_nnz(nf, 0);
  for (int j = 0; j < nf; ++j) {
    int col = bc.free_to_full[j];
    for (SpMat::InnerIterator it(K, col); it; ++it)
      if (bc.full_to_free[it.row()] >= 0) ++col_nnz[j];
  }
  R.reserve(col_nnz);
  for (int j = 0; j < nf; ++j) {
    int col = bc.free_to_full[j];
    for (SpMat::InnerIterator it(K, col); it; ++it) {
      int r = bc.full_to_free[it.row()];
      if (r >= 0) R.insert(r, j) = it.value();
    }
  }
  R.makeCompressed();
  return R;
}

Eigen::VectorXd reduce_vector(const Eigen::VectorXd& F, const BcResult& bc) {
  Eigen::VectorXd r(bc.free_to_full.size());
  for (std::size_t i = 0; i < bc.free_to_full.size(); ++i) r[i] = F[bc.free_to_full[i]];
  return r;
}

Eigen::VectorXd expand_vector(const Eigen::VectorXd& u_free, const BcResult& bc) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(bc.full_to_free.size());
  for (std::size_t i = 0; i < bc.free_to_full.size(); ++i) u[bc.free_to_full[i]] = u_free[i];
  return u;
}

Vec2 evaluate_displacement(const XfemModel& model, const Eigen::VectorXd& U,
                           const Point& p) {
  int e = model.mesh->locate(p);
  if (model.cls.tag[e] == ElemTag::Void) return {0.0, 0.0};
  BasisCtx c = make_ctx(model, e);
  Point xi{(p.x - c.center.x) * c.ax, (p.y - c.center.y) * c.ay};
  int side = 0;
  if (model.has_crack && (c.any_h || c.any_branch))
    side = crack_side_or_positive(p, model.crack);
  BasisEval be;
  eval_basis(c, xi, side, be);
  Vec2 u{0.0, 0.0};
  for (int k = 0; k < be.count; ++k) {
    u.x += be.val[k] * U[c.dofs[2 * k]];
    u.y += be.val[k] * U[c.dofs[2 * k + 1]];
  }
  return u;
}

Eigen::Matrix2d displacement_gradient(const XfemModel& model,
                                      const Eigen::VectorXd& U, int e,
                                      const Point& xi) {
  BasisCtx c = make_ctx(model, e);
  int side = 0;
  if (model.has_crack && (c.any_h || c.any_branch))
    side = crack_side_or_positive(c.to_phys(xi), model.crack);
  BasisEval be;
  eval_basis(c, xi, side, be);
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
  for (int k = 0; k < be.count; ++k) {
    double ux = U[c.dofs[2 * k]], uy = U[c.dofs[2 * k + 1]];
    g(0, 0) += be.grad[k].x * ux;
    g(0, 1) += be.grad[k].y * ux;
    g(1, 0) += be.grad[k].x * uy;
    g(1, 1) += be.grad[k].y * uy;
  }
  return g;
}

Eigen::Vector3d stress_at(const XfemModel& model, const Eigen::VectorXd& U,
                          int e, const Point& xi) {
  Eigen::Matrix2d g = displacement_gradient(model, U, e, xi);
  Eigen::Vector3d eps{g(0, 0), g(1, 1), g(0, 1) + g(1, 0)};
  return model.mat.D() * eps;
}

double von_mises(const Eigen::Vector3d& s, const Material& mat) {
  double szz = mat.state == PlaneState::PlaneStrain ? mat.nu * (s[0] + s[1]) : 0.0;
  double sxx = s[0], syy = s[1], sxy = s[2];
  double v = sxx * sxx + syy * syy + szz * szz - sxx * syy - syy * szz -
             szz * sxx + 3.0 * sxy * sxy;
  return std::sqrt(std::max(v, 0.0));
}

Eigen::VectorXd von_mises_nodal(const XfemModel& model, const Eigen::VectorXd& U) {
  const Mesh& mesh = *model.mesh;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.node_count());
  Eigen::VectorXd weight = Eigen::VectorXd::Zero(mesh.node_count());
  const double shrink = 1.0 - 1e-9;  // keep corner probes off the crack
  const Point corners[4] = {{-shrink, -shrink}, {shrink, -shrink},
                            {shrink, shrink}, {-shrink, shrink}};
  for (int e = 0; e < mesh.elem_count(); ++e) {
    if (model.cls.tag[e] == ElemTag::Void) continue;
    auto nodes = mesh.elem_nodes(e);
    for (int k = 0; k < 4; ++k) {
      Eigen::Vector3d s = stress_at(model, U, e, corners[k]);
      out[nodes[k]] += von_mises(s, model.mat);
      weight[nodes[k]] += 1.0;
    }
  }
  for (int n = 0; n < mesh.node_count(); ++n)
    if (weight[n] > 0.0) out[n] /= weight[n];
  return out;
}

}  // namespace ccp
