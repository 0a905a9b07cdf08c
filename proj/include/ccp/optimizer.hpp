#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include "ccp/geometry.hpp"
#include "ccp/simulate.hpp"

namespace ccp {

// Fitness assigned to designs that violate the placement constraints; such
// designs are never simulated.
inline constexpr double kPenaltyFitness = 1e6;

struct PsoConfig {
  int particles = 40;
  int max_generations = 200;
  double phi1 = 1.49445;  // cognitive acceleration
  double phi2 = 1.49445;  // social acceleration
  double inertia = 0.729;
  // Stop early after this many generations without an absolute gbest
  // improvement of at least 1e-6.
  int stall_generations = 50;
  std::uint64_t seed = 1;
  // Fitness evaluations within a generation run on up to this many threads;
  // the pbest/gbest reduction is always serialized in particle order, so the
  // result does not depend on jobs.
  int jobs = 1;
};

struct Bounds {
  std::vector<double> lo, hi;
  std::size_t dim() const { return lo.size(); }
};

using FitnessFn = std::function<double(const std::vector<double>&)>;

struct Particle {
  std::vector<double> x, v;
  std::vector<double> pbest;
  double pbest_fit = 0.0;
};

struct Swarm {
  std::vector<Particle> particles;
  std::vector<double> gbest;
  double gbest_fit = 0.0;
};

// Draws initial positions uniformly inside the bounds (zero velocity) and
// evaluates everyone. The first warm_seeds.size() particles start from the
// given positions instead, clamped to the bounds.
Swarm init_swarm(const FitnessFn& fit, const Bounds& b, const PsoConfig& cfg,
                 std::mt19937_64& rng,
                 const std::vector<std::vector<double>>& warm_seeds = {});

// One synchronous generation: every particle moves against the same gbest
// snapshot, coordinates are clamped to the bounds with the velocity component
// zeroed on contact, then pbest/gbest are reduced in particle order.
void pso_step(Swarm& s, const FitnessFn& fit, const Bounds& b,
              const PsoConfig& cfg, std::mt19937_64& rng);

struct GenRecord {
  int generation = 0;
  double gbest = 0.0;
  long true_evals = 0;       // cumulative at the end of this generation
  long surrogate_evals = 0;  // cumulative; zero unless a surrogate is in play
};

struct EvalCounters {
  long true_evals = 0;
  long surrogate_evals = 0;
};

struct PsoResult {
  std::vector<double> best;
  double best_fit = 0.0;
  int generations_run = 0;
  std::vector<GenRecord> history;  // entry 0 is the initial swarm
};

// Deterministic given cfg.seed. Stops at max_generations or when gbest has
// stalled for cfg.stall_generations generations. counters, when given, is
// sampled after every generation to fill the history columns.
PsoResult pso_run(const FitnessFn& fit, const Bounds& b, const PsoConfig& cfg,
                  const std::vector<std::vector<double>>& warm_seeds = {},
                  EvalCounters* counters = nullptr);

// Seam between the adaptive loop and the inner optimizer, so a plain swarm
// and a surrogate-assisted one are interchangeable.
using InnerRunner = std::function<PsoResult(
    const FitnessFn& fit, const Bounds& b,
    const std::vector<std::vector<double>>& warm_seeds, EvalCounters& counters)>;

InnerRunner make_pso_runner(const PsoConfig& cfg);

struct PartitionPlan {
  int n = 1;
  std::vector<Rect> subdomains;  // equal-width vertical strips, left to right
};

// Splits the design space into n equal-width vertical strips. Adjacent strips
// share their edge coordinate exactly. Throws when a strip is too narrow to
// host a hole of radius r_min with room to spare for the radius range.
PartitionPlan partition_design_space(const Rect& space, int n, double r_min);

// Largest hole radius allowed in a strip: half the tighter of strip width and
// space height, minus an r_min margin.
double strip_r_max(const Rect& strip, const Rect& space, double r_min);

// Box bounds for one (x, y, r) triple per strip. Centers stay an r_min margin
// inside the strip in x and inside the space in y; the residual coupled
// constraints (a wide hole near a border) are left to the penalty.
Bounds bounds_for(const PartitionPlan& plan, const Rect& space, double r_min);

Design design_from_vector(const std::vector<double>& x);
std::vector<double> vector_from_design(const Design& d);

// Re-expresses a previous best design in a finer partition: each hole is
// assigned to the strip containing its center (nearest free strip on
// collision) and clamped to that strip's bounds; empty strips receive a
// minimal-radius hole tucked into a strip corner away from existing holes.
std::vector<double> pad_design(const Design& prev, const PartitionPlan& plan,
                               const Rect& space, double r_min,
                               const std::vector<Circle>& fixed_holes);

struct CcpProblem {
  SimConfig sim;  // base run; design holes are supplied by the optimizer
  SpecifiedPath path;
  Rect design_space;
  double r_min = 1.0;
};

// Total fitness over design vectors: infeasible placements return
// kPenaltyFitness without touching the solver; feasible ones run the
// propagation and score the mean key-point distance. Thread-safe; bumps
// counters.true_evals once per simulated design. prob and counters must
// outlive the returned function.
FitnessFn make_ccp_fitness(const CcpProblem& prob, EvalCounters& counters);

struct CcpConfig {
  double eps = 0.5;  // mm; target fitness
  int n_max = 4;
  PsoConfig pso;
};

struct CcpResult {
  Design best;
  double c_min = 0.0;
  int n = 0;  // subdomain count that produced best
  bool converged = false;
  // Best fitness seen anywhere up to each generation, concatenated across the
  // partition sweep; non-increasing by construction.
  std::vector<GenRecord> history;
  std::vector<double> c_min_per_n;  // best fitness of each n tried, in order
  long true_evals = 0;
  long surrogate_evals = 0;
};

// Tries n = 1, 2, ... subdomains, warm-starting each run with the previous
// best padded to the new layout, and stops at the first n whose best fitness
// beats eps. Returns the best design found overall with converged = false
// when no n up to n_max passes.
CcpResult adaptive_ccp(const CcpProblem& prob, const CcpConfig& cfg,
                       const InnerRunner& inner);

void write_convergence_csv(std::ostream& os,
                           const std::vector<GenRecord>& history);

}  // namespace ccp
