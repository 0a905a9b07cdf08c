#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "ccp/fracture.hpp"
#include "ccp/geometry.hpp"
#include "ccp/xfem.hpp"

namespace ccp {

// A candidate arrangement of deflection holes.
struct Design {
  std::vector<Circle> holes;
};

enum class SolverMode { FullEveryStep, Dur };

// Initial edge crack: mouth point on the boundary, global angle, length.
struct CrackInit {
  Point mouth{0.0, 0.0};
  double angle = 0.0;
  double a0 = 0.0;
};

struct SimConfig {
  Rect domain{};
  int nx = 0;
  int ny = 0;
  Material mat{};
  LoadSpec loads{};
  CrackInit crack{};
  double da = 1.0;
  int max_steps = 1;
  std::vector<Circle> fixed_holes{};
  SolverMode solver = SolverMode::Dur;
};

// Ordered key points the crack is asked to pass through.
struct SpecifiedPath {
  std::vector<Point> key_points;
};

struct StepRecord {
  SifPair sifs{};
  double theta_c = 0.0;
  double solve_ms = 0.0;
};

struct SimResult {
  Polyline crack;
  GrowthStatus status = GrowthStatus::MaxSteps;
  std::vector<StepRecord> steps;
  // State of the last solved configuration. Empty when the run terminated
  // before the first solve (tip born inside a hole or outside the domain).
  Eigen::VectorXd u;
  Eigen::VectorXd von_mises;
  std::vector<double> node_ux, node_uy;
};

// Quasi-static growth loop: solve, extract tip factors, kink, advance by da,
// until a terminal status or max_steps. Full factorization at step 1; with
// SolverMode::Dur later steps reuse it through the reanalysis engine.
SimResult propagate(const Design& design, const SimConfig& cfg);

// Mean distance from the key points to the crack polyline.
double path_fitness(const Polyline& crack, const SpecifiedPath& spec);

struct ConstraintReport {
  bool ok = true;
  std::vector<std::string> violations;
};

// Strict feasibility: pairwise clearance, clearance to fixed holes, and the
// whole circle strictly inside the design-space rectangle.
ConstraintReport constraints_ok(const Design& design, const Rect& space,
                                const std::vector<Circle>& fixed_holes);

// One growth step measured with both solvers on identical assembled systems.
struct VerifyRow {
  double disp_rel_err = 0.0;
  double stress_rel_err = 0.0;
  double t_full_ms = 0.0;
  double t_dur_ms = 0.0;
};

struct VerifyResult {
  SimResult sim;  // driven by the reanalysis solution
  std::vector<VerifyRow> rows;
};

// Step-locked comparison run: every step is assembled once, solved fresh and
// by reanalysis, and both errors and timings are recorded.
VerifyResult verify_reanalysis(const Design& design, const SimConfig& cfg);

// CSV emission (headers fixed; consumed by the command-line tool and tests).
void write_path_csv(std::ostream& os, const SimResult& res);
void write_steps_csv(std::ostream& os, const SimResult& res);
void write_fields_csv(std::ostream& os, const Mesh& mesh, const SimResult& res);
void write_verify_csv(std::ostream& os, const VerifyResult& res);

}  // namespace ccp
