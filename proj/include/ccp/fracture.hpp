#pragma once

#include "ccp/xfem.hpp"

namespace ccp {

struct SifPair {
  double k1 = 0.0;  // MPa*sqrt(mm)
  double k2 = 0.0;
};

enum class GrowthStatus { Growing, HitBoundary, HitHole, MaxSteps };

// Near-tip auxiliary field with unit stress intensity, expressed in the
// tip-local frame (x1 along the crack direction). mode is 1 (opening) or
// 2 (sliding). Exposed for direct testing of the field formulas.
struct AuxField {
  Vec2 u;
  Eigen::Matrix2d grad;    // du_i/dx_j, local
  Eigen::Vector3d stress;  // s11, s22, s12, local
};
AuxField aux_mode_field(int mode, double r, double theta, const Material& mat);

// Mixed-mode stress intensity factors by the domain interaction integral:
// the solved field is paired with each auxiliary mode over a disc of radius
// r_d around the tip, weighted by a cubic that falls smoothly from 1 at the
// tip to 0 at r_d. r_d shrinks automatically when the tip sits too close to
// the domain boundary; a radius below one element diagonal is rejected.
SifPair compute_sifs(const XfemModel& model, const Eigen::VectorXd& U, double r_d);

// Kink angle (radians, relative to the current crack direction) of maximum
// hoop stress, in the division-safe two-argument form with an explicit
// pure-opening branch. Lies in (-70.6, 70.6) degrees; opposite sign to k2.
double propagation_angle(const SifPair& sifs);

struct GrowthResult {
  Polyline crack;
  GrowthStatus status = GrowthStatus::Growing;
};

// Appends one growth segment of length da at the kink angle measured from
// the current tip direction. The segment is truncated at the domain boundary
// (HitBoundary) or at the first hole it enters (HitHole), whichever comes
// first; otherwise the crack keeps Growing.
GrowthResult grow_crack(const Polyline& crack, const TipFrame& frame, double theta_c,
                        double da, const Rect& domain, const std::vector<Circle>& holes);

}  // namespace ccp
