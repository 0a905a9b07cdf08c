#include "ccp/simulate.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

#include "ccp/mesh.hpp"
#include "ccp/solver.hpp"

namespace ccp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double rel_inf(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() == 0 || b.size() == 0) return 0.0;
  const double den = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / den;
}

void check_config(const Design& design, const SimConfig& cfg) {
  if (!(cfg.crack.a0 > 0.0))
    throw std::invalid_argument("initial crack length must be positive");
  if (!(cfg.da > 0.0))
    throw std::invalid_argument("growth increment must be positive");
  if (cfg.max_steps < 1)
    throw std::invalid_argument("max_steps must be at least 1");
  if (cfg.nx < 1 || cfg.ny < 1)
    throw std::invalid_argument("mesh needs at least one element per side");
  for (const Circle& h : design.holes)
    if (!(h.r > 0.0)) throw std::invalid_argument("design hole radii must be positive");
  for (const Circle& h : cfg.fixed_holes)
    if (!(h.r > 0.0)) throw std::invalid_argument("fixed hole radii must be positive");
}

struct StepSystem {
  SpMat K;
  Eigen::VectorXd F;
  std::vector<DofDesc> desc;
  std::vector<int> candidates;
};

// One quasi-static growth loop. The solver policy receives the assembled
// reduced system each step and returns the reduced solution; everything else
// (classification, assembly, tip factors, kinking, termination) is shared so
// every solver mode walks an identical path.
template <class SolveFn>
SimResult run_loop(const Design& design, const SimConfig& cfg, SolveFn&& solve) {
  const Mesh mesh = build_mesh(cfg.domain, cfg.nx, cfg.ny);
  std::vector<Circle> holes = cfg.fixed_holes;
  holes.insert(holes.end(), design.holes.begin(), design.holes.end());

  SimResult out;
  const Point tip0{cfg.crack.mouth.x + cfg.crack.a0 * std::cos(cfg.crack.angle),
                   cfg.crack.mouth.y + cfg.crack.a0 * std::sin(cfg.crack.angle)};
  out.crack = Polyline({cfg.crack.mouth, tip0});

  for (const Circle& h : holes) {
    if (h.contains(tip0)) {
      out.status = GrowthStatus::HitHole;
      return out;
    }
  }
  if (!(tip0.x > cfg.domain.x_min && tip0.x < cfg.domain.x_max &&
        tip0.y > cfg.domain.y_min && tip0.y < cfg.domain.y_max)) {
    out.status = GrowthStatus::HitBoundary;
    return out;
  }

  Assembler asmb;
  XfemModel last_model;
  Eigen::VectorXd last_u;
  bool solved = false;
  GrowthStatus status = GrowthStatus::MaxSteps;

  for (int step = 1; step <= cfg.max_steps; ++step) {
    XfemModel model = XfemModel::build(mesh, cfg.mat, out.crack, holes);
    if (!model.has_crack || model.cls.tip_elem < 0) {
      status = GrowthStatus::HitBoundary;
      break;
    }

    asmb.update(model, solved ? &last_model : nullptr);
    const SpMat Kfull = asmb.build_matrix(model);
    const BcResult bc = apply_loads_bcs(model, cfg.loads);
    StepSystem sys;
    sys.K = reduce_matrix(Kfull, bc);
    sys.F = reduce_vector(bc.F, bc);
    sys.desc.resize(bc.free_to_full.size());
    for (std::size_t i = 0; i < sys.desc.size(); ++i)
      sys.desc[i] = model.dm.desc[bc.free_to_full[i]];
    for (int e : asmb.dirty_elements())
      for (int d : asmb.blocks()[e].dofs) {
        const int f = bc.full_to_free[d];
        if (f >= 0) sys.candidates.push_back(f);
      }

    double ms = 0.0;
    Eigen::VectorXd u_red;
    try {
      u_red = solve(step, model, bc, sys, ms);
    } catch (const std::exception& ex) {
      throw std::runtime_error("propagation step " + std::to_string(step) + ": " + ex.what());
    }
    Eigen::VectorXd U = expand_vector(u_red, bc);

    const SifPair k = compute_sifs(model, U, 2.5 * mesh.diag());
    const double theta = propagation_angle(k);
    GrowthResult g = grow_crack(out.crack, model.frame, theta, cfg.da, cfg.domain, holes);
    out.steps.push_back({k, theta, ms});
    out.crack = std::move(g.crack);

    last_model = std::move(model);
    last_u = std::move(U);
    solved = true;
    if (g.status != GrowthStatus::Growing) {
      status = g.status;
      break;
    }
  }

  out.status = status;
  if (solved) {
    out.u = last_u;
    out.von_mises = von_mises_nodal(last_model, last_u);
    const int nn = mesh.node_count();
    out.node_ux.assign(nn, 0.0);
    out.node_uy.assign(nn, 0.0);
    for (int n = 0; n < nn; ++n) {
      const int sd = last_model.dm.std_dof[n];
      if (sd >= 0) {
        out.node_ux[n] = last_u[sd];
        out.node_uy[n] = last_u[sd + 1];
      }
    }
  }
  return out;
}

Eigen::VectorXd timed_fresh_solve(const StepSystem& sys, double& ms) {
  const auto t0 = Clock::now();
  Factorization f;
  if (!f.compute(sys.K))
    throw std::runtime_error("stiffness not positive definite (missing constraints?)");
  Eigen::VectorXd u = f.solve(sys.F);
  // Tiny positive pivots can mask rank deficiency; the residual does not.
  const double fn = sys.F.cwiseAbs().maxCoeff();
  const double rn = (sys.K * u - sys.F).cwiseAbs().maxCoeff();
  if (rn > 1e-8 * std::max(fn, 1e-300))
    throw std::runtime_error("solve residual too large (missing constraints?)");
  ms = ms_since(t0);
  return u;
}

void csv_prelude(std::ostream& os) {
  os << std::setprecision(17);
}

}  // namespace

SimResult propagate(const Design& design, const SimConfig& cfg) {
  check_config(design, cfg);
  if (cfg.solver == SolverMode::FullEveryStep) {
    auto solve = [](int, const XfemModel&, const BcResult&, const StepSystem& sys,
                    double& ms) { return timed_fresh_solve(sys, ms); };
    return run_loop(design, cfg, solve);
  }
  DurEngine eng;
  auto solve = [&eng](int step, const XfemModel&, const BcResult&, const StepSystem& sys,
                      double& ms) {
    const auto t0 = Clock::now();
    Eigen::VectorXd u;
    if (step == 1) {
      eng.init(sys.K, sys.F, sys.desc);
      u = eng.base_solution();
    } else {
      u = eng.step(sys.K, sys.F, sys.desc, sys.candidates, nullptr);
    }
    ms = ms_since(t0);
    return u;
  };
  return run_loop(design, cfg, solve);
}

VerifyResult verify_reanalysis(const Design& design, const SimConfig& cfg) {
  check_config(design, cfg);
  VerifyResult vr;
  DurEngine eng;
  auto solve = [&eng, &vr](int step, const XfemModel& model, const BcResult& bc,
                           const StepSystem& sys, double& ms) {
    VerifyRow row;
    const Eigen::VectorXd uf = timed_fresh_solve(sys, row.t_full_ms);
    const auto t0 = Clock::now();
    Eigen::VectorXd ud;
    if (step == 1) {
      eng.init(sys.K, sys.F, sys.desc);
      ud = eng.base_solution();
    } else {
      ud = eng.step(sys.K, sys.F, sys.desc, sys.candidates, nullptr);
    }
    row.t_dur_ms = ms_since(t0);
    row.disp_rel_err = rel_inf(ud, uf);
    const Eigen::VectorXd vmf = von_mises_nodal(model, expand_vector(uf, bc));
    const Eigen::VectorXd vmd = von_mises_nodal(model, expand_vector(ud, bc));
    row.stress_rel_err = rel_inf(vmd, vmf);
    vr.rows.push_back(row);
    ms = row.t_dur_ms;
    return ud;
  };
  vr.sim = run_loop(design, cfg, solve);
  return vr;
}

double path_fitness(const Polyline& crack, const SpecifiedPath& spec) {
  if (crack.segment_count() < 1)
    throw std::invalid_argument("path fitness needs a crack with at least one segment");
  if (spec.key_points.empty())
    throw std::invalid_argument("path fitness needs at least one key point");
  double sum = 0.0;
  for (const Point& p : spec.key_points) sum += point_polyline_distance(p, crack);
  return sum / static_cast<double>(spec.key_points.size());
}

ConstraintReport constraints_ok(const Design& design, const Rect& space,
                                const std::vector<Circle>& fixed_holes) {
  ConstraintReport rep;
  char buf[96];
  const int n = static_cast<int>(design.holes.size());
  for (int i = 0; i < n; ++i) {
    const Circle& h = design.holes[i];
    if (!(h.r > 0.0)) {
      std::snprintf(buf, sizeof buf, "hole %d has nonpositive radius", i);
      rep.violations.emplace_back(buf);
      continue;
    }
    const bool inside = space.x_min + h.r < h.center.x && h.center.x < space.x_max - h.r &&
                        space.y_min + h.r < h.center.y && h.center.y < space.y_max - h.r;
    if (!inside) {
      std::snprintf(buf, sizeof buf, "hole %d leaves the design space", i);
      rep.violations.emplace_back(buf);
    }
    for (std::size_t j = 0; j < fixed_holes.size(); ++j) {
      const Circle& f = fixed_holes[j];
      const double clear2 = (h.center - f.center).squared_norm();
      const double min_d = h.r + f.r;
      if (!(clear2 > min_d * min_d)) {
        std::snprintf(buf, sizeof buf, "hole %d overlaps fixed hole %zu", i, j);
        rep.violations.emplace_back(buf);
      }
    }
    for (int j = 0; j < i; ++j) {
      const Circle& o = design.holes[j];
      const double clear2 = (h.center - o.center).squared_norm();
      const double min_d = h.r + o.r;
      if (!(clear2 > min_d * min_d)) {
        std::snprintf(buf, sizeof buf, "holes %d and %d overlap", j, i);
        rep.violations.emplace_back(buf);
      }
    }
  }
  rep.ok = rep.violations.empty();
  return rep;
}

void write_path_csv(std::ostream& os, const SimResult& res) {
  csv_prelude(os);
  os << "step,x_mm,y_mm\n";
  for (std::size_t i = 0; i < res.crack.pts.size(); ++i)
    os << i << ',' << res.crack.pts[i].x << ',' << res.crack.pts[i].y << '\n';
}

void write_steps_csv(std::ostream& os, const SimResult& res) {
  csv_prelude(os);
  os << "step,KI,KII,theta_rad,solve_ms\n";
  for (std::size_t i = 0; i < res.steps.size(); ++i) {
    const StepRecord& s = res.steps[i];
    os << (i + 1) << ',' << s.sifs.k1 << ',' << s.sifs.k2 << ',' << s.theta_c << ','
       << s.solve_ms << '\n';
  }
}

void write_fields_csv(std::ostream& os, const Mesh& mesh, const SimResult& res) {
  csv_prelude(os);
  os << "node,x_mm,y_mm,ux_mm,uy_mm,von_mises_mpa\n";
  const int nn = mesh.node_count();
  if (static_cast<int>(res.node_ux.size()) != nn ||
      static_cast<int>(res.von_mises.size()) != nn)
    return;
  for (int n = 0; n < nn; ++n) {
    const Point p = mesh.node_pos(n);
    os << n << ',' << p.x << ',' << p.y << ',' << res.node_ux[n] << ',' << res.node_uy[n]
       << ',' << res.von_mises[n] << '\n';
  }
}

void write_verify_csv(std::ostream& os, const VerifyResult& res) {
  csv_prelude(os);
  os << "step,disp_rel_err,stress_rel_err,t_full_ms,t_dur_ms\n";
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const VerifyRow& r = res.rows[i];
    os << (i + 1) << ',' << r.disp_rel_err << ',' << r.stress_rel_err << ',' << r.t_full_ms
       << ',' << r.t_dur_ms << '\n';
  }
}

}  // namespace ccp
