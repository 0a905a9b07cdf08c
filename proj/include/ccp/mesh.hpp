#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "ccp/geometry.hpp"

namespace ccp {

// Uniform structured quad mesh over an axis-aligned rectangle.
// Node (i,j) has id j*(nx+1)+i; element (i,j) has id j*nx+i with corner
// nodes ordered counter-clockwise from the lower-left.
struct Mesh {
  Rect domain;
  int nx = 0, ny = 0;
  double hx = 0.0, hy = 0.0;

  int node_count() const { return (nx + 1) * (ny + 1); }
  int elem_count() const { return nx * ny; }
  int node_id(int i, int j) const { return j * (nx + 1) + i; }
  int elem_id(int i, int j) const { return j * nx + i; }

  Point node_pos(int n) const {
    int i = n % (nx + 1), j = n / (nx + 1);
    return {domain.x_min + i * hx, domain.y_min + j * hy};
  }
  std::array<int, 4> elem_nodes(int e) const {
    int i = e % nx, j = e / nx;
    return {node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1), node_id(i, j + 1)};
  }
  Rect elem_rect(int e) const {
    int i = e % nx, j = e / nx;
    double x0 = domain.x_min + i * hx, y0 = domain.y_min + j * hy;
    return {x0, y0, x0 + hx, y0 + hy};
  }
  Point elem_center(int e) const {
    Rect r = elem_rect(e);
    return {0.5 * (r.x_min + r.x_max), 0.5 * (r.y_min + r.y_max)};
  }
  double diag() const { return std::hypot(hx, hy); }

  // Element owning p; points on grid lines belong to the upper/right cell,
  // clamped to the mesh.
  int locate(const Point& p) const;
};

Mesh build_mesh(const Rect& domain, int nx, int ny);

enum class ElemTag : std::uint8_t { Standard, Split, Tip, Void, HoleCut };

// Crack piece clipped to one element.
struct CrackPiece {
  Point a, b;      // physical coordinates
  int segment;     // index into the crack polyline
};

struct Classification {
  std::vector<ElemTag> tag;
  // Crack pieces per crossed element (includes the tip element).
  std::unordered_map<int, std::vector<CrackPiece>> cuts;
  // Hole indices intersecting each element; only affected elements appear.
  std::unordered_map<int, std::vector<int>> elem_holes;
  int tip_elem = -1;
};

// Tags every element against the crack and the holes. VOID wins over crack
// tags; an element both crack-cut and hole-cut keeps its crack tag and is
// additionally listed in elem_holes. Exactly one element carries Tip. A crack
// running along a shared element edge marks both neighbours Split; the nodal
// enrichment guard in build_dof_map keeps that case well-posed.
Classification classify_elements(const Mesh& mesh, const Polyline& crack,
                                 const std::vector<Circle>& holes);

enum class DofKind : std::uint8_t { Std, Heaviside, Branch };

struct DofDesc {
  int node = -1;
  DofKind kind = DofKind::Std;
  std::uint8_t comp = 0;   // 0 = x, 1 = y
  std::uint8_t alpha = 0;  // branch function index 0..3

  bool operator==(const DofDesc& o) const {
    return node == o.node && kind == o.kind && comp == o.comp && alpha == o.alpha;
  }
};

// Node-major dof numbering; per node the order is the standard pair, then the
// Heaviside pair, then four branch pairs. Nodes whose support lies entirely in
// void elements carry no dofs.
struct DofMap {
  std::vector<int> std_dof;     // per node, x-component index or -1
  std::vector<int> h_dof;       // per node, x-component index or -1
  std::vector<int> branch_dof;  // per node, alpha-0 x-component index or -1
  int total = 0;
  std::vector<DofDesc> desc;    // size total

  int branch_index(int node, int alpha, int comp) const {
    return branch_dof[node] + 2 * alpha + comp;
  }
};

// Per-node crack-side material areas used by the enrichment guard.
struct NodeSideAreas {
  double pos = 0.0, neg = 0.0;
};

// Heaviside enrichment goes to nodes supporting a Split element, guarded so
// that both crack sides carry at least kEnrichAreaTol of the node's support
// material (a degenerate one-sided cut would otherwise produce a zero basis
// function and a singular system). Branch enrichment goes to the tip
// element's nodes.
inline constexpr double kEnrichAreaTol = 1e-4;

DofMap build_dof_map(const Mesh& mesh, const Classification& cls,
                     const std::vector<NodeSideAreas>& side_areas);

}  // namespace ccp
