#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <unordered_map>
#include <vector>

#include "ccp/geometry.hpp"
#include "ccp/mesh.hpp"
#include "ccp/quadrature.hpp"

namespace ccp {

using SpMat = Eigen::SparseMatrix<double>;

enum class PlaneState { PlaneStrain, PlaneStress };

struct Material {
  double E = 1.0;   // MPa
  double nu = 0.0;
  PlaneState state = PlaneState::PlaneStrain;

  Eigen::Matrix3d D() const;
  double mu() const { return E / (2.0 * (1.0 + nu)); }
  double kappa() const {
    return state == PlaneState::PlaneStrain ? 3.0 - 4.0 * nu
                                            : (3.0 - nu) / (1.0 + nu);
  }
  // Effective modulus in the energy-release relation.
  double e_star() const {
    return state == PlaneState::PlaneStrain ? E / (1.0 - nu * nu) : E;
  }
};

// Four branch functions sqrt(r) * {sin(t/2), cos(t/2), sin(t)sin(t/2),
// sin(t)cos(t/2)} spanning the near-tip displacement field.
std::array<double, 4> tip_enrichment(const PolarCoords& pc);

// Values plus global-frame gradients of the branch functions at p.
struct TipEnrichmentGrad {
  std::array<double, 4> value;
  std::array<Vec2, 4> grad;  // d/dx, d/dy in global coordinates
};
TipEnrichmentGrad tip_enrichment_grad(const Point& p, const TipFrame& frame);

// --- loads and constraints ---

enum class Edge { Bottom, Top, Left, Right };

struct EdgeTraction {
  Edge edge;
  double qx = 0.0, qy = 0.0;  // N/mm, uniform along the edge
};

struct PointForce {
  Point at;  // applied to the nearest active node
  double fx = 0.0, fy = 0.0;
};

struct EdgeFix {
  Edge edge;
  bool fix_x = true, fix_y = true;
};

struct NodeFix {
  Point at;  // nearest node
  bool fix_x = true, fix_y = true;
};

struct LoadSpec {
  std::vector<EdgeTraction> tractions;
  std::vector<PointForce> point_forces;
  std::vector<EdgeFix> fixed_edges;
  std::vector<NodeFix> fixed_nodes;
};

// --- assembled state for one crack/hole configuration ---

struct XfemModel {
  const Mesh* mesh = nullptr;
  Material mat;
  Polyline crack;
  std::vector<Circle> holes;
  Classification cls;
  std::unordered_map<int, ElementCells> cells;
  DofMap dm;
  TipFrame frame;
  bool has_crack = false;

  static XfemModel build(const Mesh& mesh, const Material& mat,
                         const Polyline& crack, const std::vector<Circle>& holes);
};

// Dense stiffness block of one element over the union of its nodes' dofs.
struct ElementBlock {
  std::vector<int> dofs;    // global dof indices (current numbering)
  Eigen::MatrixXd K;        // dofs.size() square
};

ElementBlock element_stiffness(const XfemModel& model, int e);

// Subdivision-aware integration points of one element: parent and physical
// coordinates, weight scaled by the parent Jacobian (weights sum to the
// element's material area), and the crack side each point integrates on
// (0 when no crack crosses the element). Void elements yield none.
struct IntegrationPoint {
  Point xi;
  Point x;
  double w = 0.0;
  int side = 0;
};
std::vector<IntegrationPoint> element_integration_points(const XfemModel& model, int e);

// Rebuilds only elements whose integration inputs changed and accumulates the
// global matrix in a fixed element order, so rows untouched by a crack step
// are reproduced bit-identically.
class Assembler {
 public:
  // Recomputes dirty element blocks against `model`; pass prev=nullptr on the
  // first call (everything dirty).
  void update(const XfemModel& model, const XfemModel* prev);
  SpMat build_matrix(const XfemModel& model) const;
  const std::vector<ElementBlock>& blocks() const { return blocks_; }
  int last_dirty_count() const { return static_cast<int>(dirty_.size()); }
  const std::vector<int>& dirty_elements() const { return dirty_; }

 private:
  std::vector<ElementBlock> blocks_;
  std::vector<Eigen::MatrixXd> values_;  // cached element matrices
  std::vector<int> dirty_;
};

// Consistent nodal force vector plus the fixed-dof mask (all dofs of fixed
// nodes are constrained; constraints are zero-valued).
struct BcResult {
  Eigen::VectorXd F;               // full dof space
  std::vector<std::uint8_t> fixed;  // per dof
  std::vector<int> full_to_free;    // -1 for fixed
  std::vector<int> free_to_full;
};

BcResult apply_loads_bcs(const XfemModel& model, const LoadSpec& loads);

// Row/column reduction of K and F to the free dofs.
SpMat reduce_matrix(const SpMat& K, const BcResult& bc);
Eigen::VectorXd reduce_vector(const Eigen::VectorXd& F, const BcResult& bc);
Eigen::VectorXd expand_vector(const Eigen::VectorXd& u_free, const BcResult& bc);

// --- field evaluation ---

// Displacement at p from the full-space solution vector.
Vec2 evaluate_displacement(const XfemModel& model, const Eigen::VectorXd& U,
                           const Point& p);

// In-plane stress (sxx, syy, sxy) at a parent-coordinate point of element e.
Eigen::Vector3d stress_at(const XfemModel& model, const Eigen::VectorXd& U,
                          int e, const Point& xi);

// 2x2 displacement gradient at a parent point of element e (rows: component,
// cols: d/dx d/dy).
Eigen::Matrix2d displacement_gradient(const XfemModel& model,
                                      const Eigen::VectorXd& U, int e,
                                      const Point& xi);

// Nodal von Mises by averaging corner stresses of adjacent non-void elements;
// deactivated nodes get zero.
Eigen::VectorXd von_mises_nodal(const XfemModel& model, const Eigen::VectorXd& U);

double von_mises(const Eigen::Vector3d& s, const Material& mat);

}  // namespace ccp
