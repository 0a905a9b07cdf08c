#pragma once

#include <unordered_map>
#include <vector>

#include "ccp/geometry.hpp"
#include "ccp/mesh.hpp"

namespace ccp {

// Integration cell in parent coordinates ([-1,1]^2). Cells never straddle the
// crack; side records the crack side of the whole cell.
struct QuadCell {
  Polygon poly;      // convex, counter-clockwise, parent coordinates
  int side = 0;      // +1 / -1 crack side; 0 when no crack crosses the element
  bool material = true;  // false inside a hole
};

struct ElementCells {
  std::vector<QuadCell> cells;
  double material_fraction = 1.0;  // material area / element area
};

// Crack side with the on-crack convention: points within kOnCrackTol of the
// crack count as the positive (left-of-travel) side.
int crack_side_or_positive(const Point& p, const Polyline& crack);

// Subdivides one element into conforming cells: splits by the clipped crack
// pieces (and, for the tip element, by the perpendicular through the tip so
// the tip lands on cell corners), then trims holes by chord polygons with
// sagitta <= min(hx,hy)/100. Cells inside holes are kept with material=false.
ElementCells subdivide_element(const Mesh& mesh, int e,
                               const std::vector<CrackPiece>& pieces,
                               const Polyline* crack, bool is_tip,
                               const std::vector<Circle>& holes,
                               const std::vector<int>& elem_hole_idx);

// Cells for every element that needs a nontrivial subdivision (crack-cut or
// hole-affected). Uncut, hole-free elements are not listed; callers treat
// them as a single full-square material cell.
std::unordered_map<int, ElementCells> subdivide_all(
    const Mesh& mesh, const Classification& cls, const Polyline& crack,
    const std::vector<Circle>& holes);

// Per-node crack-side material areas over the node's support, for the
// Heaviside enrichment guard. Only nodes of Split elements are filled in.
std::vector<NodeSideAreas> compute_side_areas(
    const Mesh& mesh, const Classification& cls,
    const std::unordered_map<int, ElementCells>& cells, const Polyline& crack);

struct GaussPt {
  Point xi;       // parent coordinates
  double w = 0.0;  // weight in parent measure (sums to cell area)
};

// 2x2 tensor rule over the full parent square.
const std::vector<GaussPt>& tensor_gauss_2x2();

// Triangulates the cell (fan from the vertex nearest `apex` when given) and
// lays a 3-point (degree 2) or 6-point (degree 4) rule on each triangle.
void cell_gauss(const QuadCell& cell, int points_per_triangle,
                const Point* apex, std::vector<GaussPt>& out);

}  // namespace ccp
