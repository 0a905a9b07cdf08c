#include "ccp/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

namespace ccp {
namespace {

void check_pso(const PsoConfig& cfg) {
  if (cfg.particles < 2)
    throw std::invalid_argument("pso: needs at least two particles");
  if (!(cfg.phi1 > 0.0) || !(cfg.phi2 > 0.0))
    throw std::invalid_argument("pso: acceleration coefficients must be positive");
  if (cfg.max_generations < 0)
    throw std::invalid_argument("pso: negative generation limit");
  if (cfg.stall_generations < 1)
    throw std::invalid_argument("pso: stall window must be at least 1");
}

void check_bounds(const Bounds& b) {
  if (b.lo.empty() || b.lo.size() != b.hi.size())
    throw std::invalid_argument("pso: bounds are empty or mismatched");
  for (std::size_t j = 0; j < b.lo.size(); ++j)
    if (!(b.lo[j] <= b.hi[j]))
      throw std::invalid_argument("pso: lower bound above upper bound");
}

double clamped(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

// Evaluations may fan out over threads; results land by index so the later
// reduction is order-deterministic regardless of jobs.
void evaluate_all(const std::vector<Particle>& ps, const FitnessFn& fit,
                  int jobs, std::vector<double>& f) {
  const int n = static_cast<int>(ps.size());
  f.resize(ps.size());
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f[i] = fit(ps[i].x);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < n;) f[i] = fit(ps[i].x);
  };
  std::vector<std::thread> pool;
  const int k = std::min(jobs, n);
  pool.reserve(k);
  for (int t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

void reduce_bests(Swarm& s, const std::vector<double>& f) {
  for (std::size_t i = 0; i < s.particles.size(); ++i) {
    Particle& p = s.particles[i];
    if (f[i] < p.pbest_fit) {
      p.pbest = p.x;
      p.pbest_fit = f[i];
    }
    if (p.pbest_fit < s.gbest_fit) {
      s.gbest = p.pbest;
      s.gbest_fit = p.pbest_fit;
    }
  }
}

long snap_true(const EvalCounters* c) { return c ? c->true_evals : 0; }
long snap_sur(const EvalCounters* c) { return c ? c->surrogate_evals : 0; }

}  // namespace

Swarm init_swarm(const FitnessFn& fit, const Bounds& b, const PsoConfig& cfg,
                 std::mt19937_64& rng,
                 const std::vector<std::vector<double>>& warm_seeds) {
  check_pso(cfg);
  check_bounds(b);
  const std::size_t d = b.dim();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Swarm s;
  s.particles.resize(cfg.particles);
  for (std::size_t i = 0; i < s.particles.size(); ++i) {
    Particle& p = s.particles[i];
    p.v.assign(d, 0.0);
    if (i < warm_seeds.size()) {
      if (warm_seeds[i].size() != d)
        throw std::invalid_argument("pso: warm seed has the wrong dimension");
      p.x.resize(d);
      for (std::size_t j = 0; j < d; ++j)
        p.x[j] = clamped(warm_seeds[i][j], b.lo[j], b.hi[j]);
    } else {
      p.x.resize(d);
      for (std::size_t j = 0; j < d; ++j)
        p.x[j] = b.lo[j] + u01(rng) * (b.hi[j] - b.lo[j]);
    }
  }
  std::vector<double> f;
  evaluate_all(s.particles, fit, cfg.jobs, f);
  for (std::size_t i = 0; i < s.particles.size(); ++i) {
    s.particles[i].pbest = s.particles[i].x;
    s.particles[i].pbest_fit = f[i];
  }
  s.gbest = s.particles[0].pbest;
  s.gbest_fit = s.particles[0].pbest_fit;
  for (std::size_t i = 1; i < s.particles.size(); ++i)
    if (s.particles[i].pbest_fit < s.gbest_fit) {
      s.gbest = s.particles[i].pbest;
      s.gbest_fit = s.particles[i].pbest_fit;
    }
  return s;
}

void pso_step(Swarm& s, const FitnessFn& fit, const Bounds& b,
              const PsoConfig& cfg, std::mt19937_64& rng) {
  check_bounds(b);
  const std::size_t d = b.dim();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const std::vector<double> g = s.gbest;  // one snapshot for the generation
  for (Particle& p : s.particles) {
    for (std::size_t j = 0; j < d; ++j) {
      const double r1 = u01(rng);
      const double r2 = u01(rng);
      p.v[j] = cfg.inertia * p.v[j] + cfg.phi1 * r1 * (p.pbest[j] - p.x[j]) +
               cfg.phi2 * r2 * (g[j] - p.x[j]);
      p.x[j] += p.v[j];
      if (p.x[j] < b.lo[j]) {
        p.x[j] = b.lo[j];
        p.v[j] = 0.0;
      } else if (p.x[j] > b.hi[j]) {
        p.x[j] = b.hi[j];
        p.v[j] = 0.0;
      }
    }
  }
  std::vector<double> f;
  evaluate_all(s.particles, fit, cfg.jobs, f);
  reduce_bests(s, f);
}

PsoResult pso_run(const FitnessFn& fit, const Bounds& b, const PsoConfig& cfg,
                  const std::vector<std::vector<double>>& warm_seeds,
                  EvalCounters* counters) {
  std::mt19937_64 rng(cfg.seed);
  Swarm s = init_swarm(fit, b, cfg, rng, warm_seeds);
  PsoResult out;
  out.history.push_back({0, s.gbest_fit, snap_true(counters), snap_sur(counters)});
  int stall = 0;
  int ran = 0;
  for (int g = 1; g <= cfg.max_generations; ++g) {
    const double before = s.gbest_fit;
    pso_step(s, fit, b, cfg, rng);
    ran = g;
    out.history.push_back({g, s.gbest_fit, snap_true(counters), snap_sur(counters)});
    if (before - s.gbest_fit < 1e-6)
      ++stall;
    else
      stall = 0;
    if (stall >= cfg.stall_generations) break;
  }
  out.best = s.gbest;
  out.best_fit = s.gbest_fit;
  out.generations_run = ran;
  return out;
}

InnerRunner make_pso_runner(const PsoConfig& cfg) {
  return [cfg](const FitnessFn& fit, const Bounds& b,
               const std::vector<std::vector<double>>& warm_seeds,
               EvalCounters& counters) {
    return pso_run(fit, b, cfg, warm_seeds, &counters);
  };
}

PartitionPlan partition_design_space(const Rect& space, int n, double r_min) {
  if (n < 1) throw std::invalid_argument("partition: n must be at least 1");
  if (!(r_min > 0.0))
    throw std::invalid_argument("partition: minimum radius must be positive");
  const double w = (space.x_max - space.x_min) / n;
  PartitionPlan plan;
  plan.n = n;
  std::vector<double> edges(n + 1);
  for (int k = 0; k <= n; ++k) edges[k] = space.x_min + k * w;
  edges[n] = space.x_max;  // tile exactly regardless of rounding
  for (int k = 0; k < n; ++k)
    plan.subdomains.push_back({edges[k], space.y_min, edges[k + 1], space.y_max});
  for (const Rect& s : plan.subdomains)
    if (strip_r_max(s, space, r_min) < r_min)
      throw std::invalid_argument(
          "partition: subdomains too narrow for the minimum hole radius");
  return plan;
}

double strip_r_max(const Rect& strip, const Rect& space, double r_min) {
  const double w = strip.x_max - strip.x_min;
  const double h = space.y_max - space.y_min;
  return 0.5 * std::min(w, h) - r_min;
}

Bounds bounds_for(const PartitionPlan& plan, const Rect& space, double r_min) {
  Bounds b;
  for (const Rect& s : plan.subdomains) {
    b.lo.insert(b.lo.end(), {s.x_min + r_min, space.y_min + r_min, r_min});
    b.hi.insert(b.hi.end(),
                {s.x_max - r_min, space.y_max - r_min, strip_r_max(s, space, r_min)});
  }
  check_bounds(b);
  return b;
}

Design design_from_vector(const std::vector<double>& x) {
  if (x.empty() || x.size() % 3 != 0)
    throw std::invalid_argument("design vector length must be a positive multiple of 3");
  Design d;
  for (std::size_t k = 0; k + 3 <= x.size(); k += 3)
    d.holes.push_back({{x[k], x[k + 1]}, x[k + 2]});
  return d;
}

std::vector<double> vector_from_design(const Design& d) {
  std::vector<double> x;
  x.reserve(d.holes.size() * 3);
  for (const Circle& h : d.holes) {
    x.push_back(h.center.x);
    x.push_back(h.center.y);
    x.push_back(h.r);
  }
  return x;
}

std::vector<double> pad_design(const Design& prev, const PartitionPlan& plan,
                               const Rect& space, double r_min,
                               const std::vector<Circle>& fixed_holes) {
  const int n = plan.n;
  std::vector<int> slot_of;  // previous hole index -> strip slot
  std::vector<bool> taken(n, false);
  for (const Circle& h : prev.holes) {
    int k = 0;
    while (k + 1 < n && h.center.x >= plan.subdomains[k].x_max) ++k;
    if (taken[k]) {  // nearest free strip, preferring the right neighbor
      int best = -1;
      for (int step = 1; step < n && best < 0; ++step) {
        if (k + step < n && !taken[k + step])
          best = k + step;
        else if (k - step >= 0 && !taken[k - step])
          best = k - step;
      }
      if (best < 0) best = k;  // more holes than strips: double up, clamp later
      k = best;
    }
    taken[k] = true;
    slot_of.push_back(k);
  }

  std::vector<Circle> slots(n, Circle{{0.0, 0.0}, 0.0});
  std::vector<bool> filled(n, false);
  for (std::size_t i = 0; i < prev.holes.size(); ++i) {
    const int k = slot_of[i];
    const Rect& s = plan.subdomains[k];
    Circle h = prev.holes[i];
    h.r = clamped(h.r, r_min, strip_r_max(s, space, r_min));
    h.center.x = clamped(h.center.x, s.x_min + r_min, s.x_max - r_min);
    h.center.y = clamped(h.center.y, space.y_min + r_min, space.y_max - r_min);
    slots[k] = h;
    filled[k] = true;
  }

  // Empty strips get a minimal hole parked in a corner clear of everyone.
  for (int k = 0; k < n; ++k) {
    if (filled[k]) continue;
    const Rect& s = plan.subdomains[k];
    const double m = 2.0 * r_min;
    const Point cands[] = {{s.x_max - m, space.y_max - m},
                           {s.x_min + m, space.y_max - m},
                           {s.x_max - m, space.y_min + m},
                           {s.x_min + m, space.y_min + m},
                           {0.5 * (s.x_min + s.x_max), 0.5 * (space.y_min + space.y_max)}};
    Circle dummy{cands[0], r_min};
    for (const Point& c : cands) {
      bool clear = true;
      for (const Circle& o : fixed_holes)
        if (std::hypot(c.x - o.center.x, c.y - o.center.y) <= r_min + o.r)
          clear = false;
      for (int j = 0; j < n && clear; ++j)
        if (filled[j] &&
            std::hypot(c.x - slots[j].center.x, c.y - slots[j].center.y) <=
                r_min + slots[j].r)
          clear = false;
      if (clear) {
        dummy.center = c;
        break;
      }
    }
    slots[k] = dummy;
    filled[k] = true;
  }

  Design padded;
  padded.holes = slots;
  return vector_from_design(padded);
}

FitnessFn make_ccp_fitness(const CcpProblem& prob, EvalCounters& counters) {
  auto guard = std::make_shared<std::mutex>();
  return [&prob, &counters, guard](const std::vector<double>& x) {
    const Design d = design_from_vector(x);
    if (!constraints_ok(d, prob.design_space, prob.sim.fixed_holes).ok)
      return kPenaltyFitness;
    double c = kPenaltyFitness;
    try {
      const SimResult r = propagate(d, prob.sim);
      c = path_fitness(r.crack, prob.path);
    } catch (const std::exception&) {
      // A geometrically admissible design can still produce a degenerate
      // system (a hole pinching the plate down to slivers); score it like an
      // infeasible one instead of aborting the whole search.
    }
    std::lock_guard<std::mutex> lock(*guard);
    ++counters.true_evals;
    return c;
  };
}

CcpResult adaptive_ccp(const CcpProblem& prob, const CcpConfig& cfg,
                       const InnerRunner& inner) {
  if (!(cfg.eps > 0.0))
    throw std::invalid_argument("adaptive: eps must be positive");
  if (cfg.n_max < 1)
    throw std::invalid_argument("adaptive: n_max must be at least 1");
  EvalCounters counters;
  const FitnessFn fit = make_ccp_fitness(prob, counters);
  CcpResult out;
  out.c_min = std::numeric_limits<double>::infinity();
  double running = std::numeric_limits<double>::infinity();
  int gen_offset = 0;
  for (int n = 1; n <= cfg.n_max; ++n) {
    PartitionPlan plan;
    try {
      plan = partition_design_space(prob.design_space, n, prob.r_min);
    } catch (const std::invalid_argument&) {
      break;  // space cannot host this many holes
    }
    const Bounds b = bounds_for(plan, prob.design_space, prob.r_min);
    std::vector<std::vector<double>> seeds;
    if (!out.best.holes.empty())
      seeds.push_back(
          pad_design(out.best, plan, prob.design_space, prob.r_min, prob.sim.fixed_holes));
    const PsoResult r = inner(fit, b, seeds, counters);
    out.c_min_per_n.push_back(r.best_fit);
    for (const GenRecord& h : r.history) {
      running = std::min(running, h.gbest);
      out.history.push_back(
          {gen_offset + h.generation, running, h.true_evals, h.surrogate_evals});
    }
    if (!r.history.empty()) gen_offset += r.history.back().generation + 1;
    if (r.best_fit < out.c_min) {
      out.best = design_from_vector(r.best);
      out.c_min = r.best_fit;
      out.n = n;
    }
    if (out.c_min < cfg.eps) {
      out.converged = true;
      break;
    }
  }
  out.true_evals = counters.true_evals;
  out.surrogate_evals = counters.surrogate_evals;
  return out;
}

void write_convergence_csv(std::ostream& os,
                           const std::vector<GenRecord>& history) {
  os << std::setprecision(17);
  os << "generation,gbest_mm,true_evals,surrogate_evals\n";
  for (const GenRecord& h : history)
    os << h.generation << ',' << h.gbest << ',' << h.true_evals << ','
       << h.surrogate_evals << '\n';
}

}  // namespace ccp
