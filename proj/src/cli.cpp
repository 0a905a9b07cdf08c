#include "ccp/cli.hpp"

#include <chrono>
#include <climits>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace ccp::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail_cfg(const std::string& path, const std::string& why) {
  throw ConfigError("config: " + path + ": " + why);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail_cfg(path.empty() ? "(root)" : path, "must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) fail_cfg(join(path, it.key()), "unknown field");
  }
}

const json& member(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail_cfg(join(path, key), "required field is missing");
  return *it;
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) fail_cfg(path, "must be a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    fail_cfg(path, "must be an integer");
  const auto raw = v.get<std::int64_t>();
  if (raw < INT_MIN || raw > INT_MAX) fail_cfg(path, "out of range");
  return static_cast<int>(raw);
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  fail_cfg(path, "must be a non-negative integer");
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail_cfg(path, "must be true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail_cfg(path, "must be a string");
  return v.get<std::string>();
}

double opt_double(const json& obj, const std::string& path, const char* key,
                  double dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : as_double(*it, join(path, key));
}

int opt_int(const json& obj, const std::string& path, const char* key, int dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : as_int(*it, join(path, key));
}

bool opt_bool(const json& obj, const std::string& path, const char* key, bool dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : as_bool(*it, join(path, key));
}

std::string opt_string(const json& obj, const std::string& path, const char* key,
                       const std::string& dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : as_string(*it, join(path, key));
}

Rect parse_rect(const json& v, const std::string& path) {
  check_keys(v, path, {"x_min", "y_min", "x_max", "y_max"});
  Rect r;
  r.x_min = as_double(member(v, path, "x_min"), join(path, "x_min"));
  r.y_min = as_double(member(v, path, "y_min"), join(path, "y_min"));
  r.x_max = as_double(member(v, path, "x_max"), join(path, "x_max"));
  r.y_max = as_double(member(v, path, "y_max"), join(path, "y_max"));
  if (!(r.x_max > r.x_min)) fail_cfg(join(path, "x_max"), "must exceed x_min");
  if (!(r.y_max > r.y_min)) fail_cfg(join(path, "y_max"), "must exceed y_min");
  return r;
}

Point parse_point(const json& v, const std::string& path) {
  check_keys(v, path, {"x", "y"});
  return {as_double(member(v, path, "x"), join(path, "x")),
          as_double(member(v, path, "y"), join(path, "y"))};
}

Edge parse_edge(const json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  if (s == "bottom") return Edge::Bottom;
  if (s == "top") return Edge::Top;
  if (s == "left") return Edge::Left;
  if (s == "right") return Edge::Right;
  fail_cfg(path, "must be one of bottom|top|left|right");
}

const char* edge_name(Edge e) {
  switch (e) {
    case Edge::Bottom: return "bottom";
    case Edge::Top: return "top";
    case Edge::Left: return "left";
    case Edge::Right: return "right";
  }
  return "?";
}

std::vector<Circle> parse_holes(const json& v, const std::string& path) {
  if (!v.is_array()) fail_cfg(path, "must be an array");
  std::vector<Circle> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    check_keys(v[i], p, {"x", "y", "r"});
    Circle c;
    c.center = {as_double(member(v[i], p, "x"), join(p, "x")),
                as_double(member(v[i], p, "y"), join(p, "y"))};
    c.r = as_double(member(v[i], p, "r"), join(p, "r"));
    if (!(c.r > 0.0)) fail_cfg(join(p, "r"), "must be > 0");
    out.push_back(c);
  }
  return out;
}

LoadSpec parse_loads(const json& v, const std::string& path) {
  check_keys(v, path, {"tractions", "fixed_edges", "point_forces", "fixed_nodes"});
  LoadSpec loads;
  if (auto it = v.find("tractions"); it != v.end()) {
    const std::string base = join(path, "tractions");
    if (!it->is_array()) fail_cfg(base, "must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = base + "[" + std::to_string(i) + "]";
      check_keys((*it)[i], p, {"edge", "qx", "qy"});
      EdgeTraction t;
      t.edge = parse_edge(member((*it)[i], p, "edge"), join(p, "edge"));
      t.qx = opt_double((*it)[i], p, "qx", 0.0);
      t.qy = opt_double((*it)[i], p, "qy", 0.0);
      loads.tractions.push_back(t);
    }
  }
  if (auto it = v.find("fixed_edges"); it != v.end()) {
    const std::string base = join(path, "fixed_edges");
    if (!it->is_array()) fail_cfg(base, "must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = base + "[" + std::to_string(i) + "]";
      check_keys((*it)[i], p, {"edge", "fix_x", "fix_y"});
      EdgeFix f;
      f.edge = parse_edge(member((*it)[i], p, "edge"), join(p, "edge"));
      f.fix_x = opt_bool((*it)[i], p, "fix_x", true);
      f.fix_y = opt_bool((*it)[i], p, "fix_y", true);
      loads.fixed_edges.push_back(f);
    }
  }
  if (auto it = v.find("point_forces"); it != v.end()) {
    const std::string base = join(path, "point_forces");
    if (!it->is_array()) fail_cfg(base, "must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = base + "[" + std::to_string(i) + "]";
      check_keys((*it)[i], p, {"x", "y", "fx", "fy"});
      PointForce f;
      f.at = {as_double(member((*it)[i], p, "x"), join(p, "x")),
              as_double(member((*it)[i], p, "y"), join(p, "y"))};
      f.fx = opt_double((*it)[i], p, "fx", 0.0);
      f.fy = opt_double((*it)[i], p, "fy", 0.0);
      loads.point_forces.push_back(f);
    }
  }
  if (auto it = v.find("fixed_nodes"); it != v.end()) {
    const std::string base = join(path, "fixed_nodes");
    if (!it->is_array()) fail_cfg(base, "must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = base + "[" + std::to_string(i) + "]";
      check_keys((*it)[i], p, {"x", "y", "fix_x", "fix_y"});
      NodeFix f;
      f.at = {as_double(member((*it)[i], p, "x"), join(p, "x")),
              as_double(member((*it)[i], p, "y"), join(p, "y"))};
      f.fix_x = opt_bool((*it)[i], p, "fix_x", true);
      f.fix_y = opt_bool((*it)[i], p, "fix_y", true);
      loads.fixed_nodes.push_back(f);
    }
  }
  return loads;
}

void materialize(RunConfig& cfg) {
  cfg.ccp.pso.seed = cfg.seed;
  cfg.ccp.pso.jobs = cfg.jobs;
  cfg.surrogate.pso.seed = cfg.seed;
  cfg.surrogate.pso.jobs = cfg.jobs;
  cfg.surrogate.sample_seed = cfg.seed + 1;
  cfg.surrogate.init_seed = cfg.seed + 2;
  cfg.surrogate.train.seed = cfg.seed + 3;
}

// Cross-field invariants; every message names the invariant it enforces.
void validate(const RunConfig& cfg) {
  const Rect& dom = cfg.sim.domain;
  const double tol = 1e-9 * std::hypot(dom.width(), dom.height());
  const CrackInit& ck = cfg.sim.crack;
  const Point tip{ck.mouth.x + ck.a0 * std::cos(ck.angle),
                  ck.mouth.y + ck.a0 * std::sin(ck.angle)};
  if (!dom.contains(ck.mouth, tol) || !dom.contains(tip, tol))
    throw ValidationError(
        "config: crack: mouth or tip lies outside the domain "
        "(invariant: initial crack inside domain)");
  for (std::size_t i = 0; i < cfg.path.key_points.size(); ++i)
    if (!dom.contains(cfg.path.key_points[i], tol))
      throw ValidationError("config: path.key_points[" + std::to_string(i) +
                            "]: outside the domain "
                            "(invariant: key points inside domain)");
  if (cfg.design_space) {
    const Rect& s = *cfg.design_space;
    if (s.x_min < dom.x_min - tol || s.y_min < dom.y_min - tol ||
        s.x_max > dom.x_max + tol || s.y_max > dom.y_max + tol)
      throw ValidationError(
          "config: design_space: not contained in the domain "
          "(invariant: design space inside domain)");
  }
  for (std::size_t i = 0; i < cfg.sim.fixed_holes.size(); ++i) {
    const Circle& c = cfg.sim.fixed_holes[i];
    if (c.center.x - c.r <= dom.x_min || c.center.x + c.r >= dom.x_max ||
        c.center.y - c.r <= dom.y_min || c.center.y + c.r >= dom.y_max)
      throw ValidationError("config: holes[" + std::to_string(i) +
                            "]: must lie strictly inside the domain "
                            "(invariant: holes inside domain)");
  }
  if (cfg.sim.loads.fixed_edges.empty() && cfg.sim.loads.fixed_nodes.empty())
    throw ValidationError(
        "config: loads: at least one fixed edge or fixed node is required "
        "(invariant: constrained plate)");
}

json rect_json(const Rect& r) {
  return {{"x_min", r.x_min}, {"y_min", r.y_min}, {"x_max", r.x_max},
          {"y_max", r.y_max}};
}

json config_echo(const RunConfig& cfg) {
  json c;
  c["domain"] = rect_json(cfg.sim.domain);
  c["mesh"] = {{"nx", cfg.sim.nx}, {"ny", cfg.sim.ny}};
  c["material"] = {
      {"E", cfg.sim.mat.E},
      {"nu", cfg.sim.mat.nu},
      {"plane",
       cfg.sim.mat.state == PlaneState::PlaneStrain ? "strain" : "stress"}};
  json loads;
  loads["tractions"] = json::array();
  for (const EdgeTraction& t : cfg.sim.loads.tractions)
    loads["tractions"].push_back(
        {{"edge", edge_name(t.edge)}, {"qx", t.qx}, {"qy", t.qy}});
  loads["fixed_edges"] = json::array();
  for (const EdgeFix& f : cfg.sim.loads.fixed_edges)
    loads["fixed_edges"].push_back(
        {{"edge", edge_name(f.edge)}, {"fix_x", f.fix_x}, {"fix_y", f.fix_y}});
  loads["point_forces"] = json::array();
  for (const PointForce& f : cfg.sim.loads.point_forces)
    loads["point_forces"].push_back(
        {{"x", f.at.x}, {"y", f.at.y}, {"fx", f.fx}, {"fy", f.fy}});
  loads["fixed_nodes"] = json::array();
  for (const NodeFix& f : cfg.sim.loads.fixed_nodes)
    loads["fixed_nodes"].push_back({{"x", f.at.x},
                                    {"y", f.at.y},
                                    {"fix_x", f.fix_x},
                                    {"fix_y", f.fix_y}});
  c["loads"] = loads;
  c["crack"] = {{"x", cfg.sim.crack.mouth.x},
                {"y", cfg.sim.crack.mouth.y},
                {"angle_deg", cfg.sim.crack.angle * 180.0 / M_PI},
                {"length", cfg.sim.crack.a0}};
  c["growth"] = {{"da", cfg.sim.da}, {"max_steps", cfg.sim.max_steps}};
  c["holes"] = json::array();
  for (const Circle& h : cfg.sim.fixed_holes)
    c["holes"].push_back({{"x", h.center.x}, {"y", h.center.y}, {"r", h.r}});
  json kp = json::array();
  for (const Point& p : cfg.path.key_points)
    kp.push_back({{"x", p.x}, {"y", p.y}});
  c["path"] = {{"key_points", kp}};
  if (cfg.design_space) c["design_space"] = rect_json(*cfg.design_space);
  c["optimizer"] = {{"r_min", cfg.r_min},
                    {"eps", cfg.ccp.eps},
                    {"n_max", cfg.ccp.n_max},
                    {"particles", cfg.ccp.pso.particles},
                    {"max_generations", cfg.ccp.pso.max_generations},
                    {"inertia", cfg.ccp.pso.inertia},
                    {"phi1", cfg.ccp.pso.phi1},
                    {"phi2", cfg.ccp.pso.phi2},
                    {"stall_generations", cfg.ccp.pso.stall_generations}};
  c["metamodel"] = {{"holes", cfg.holes},
                    {"n_train", cfg.surrogate.n_train},
                    {"n_test", cfg.surrogate.n_test},
                    {"hidden", cfg.surrogate.hidden},
                    {"epochs", cfg.surrogate.train.epochs},
                    {"learning_rate", cfg.surrogate.train.learning_rate},
                    {"momentum", cfg.surrogate.train.momentum},
                    {"batch", cfg.surrogate.train.batch},
                    {"target_mse", cfg.surrogate.train.target_mse},
                    {"dataset", cfg.dataset}};
  c["output"] = {{"svg", cfg.svg}};
  c["solver"] = cfg.sim.solver == SolverMode::Dur ? "dur" : "full";
  c["inner"] = cfg.inner;
  c["seed"] = cfg.seed;
  c["jobs"] = cfg.jobs;
  return c;
}

const char* status_name(GrowthStatus s) {
  switch (s) {
    case GrowthStatus::Growing: return "growing";
    case GrowthStatus::HitBoundary: return "hit_boundary";
    case GrowthStatus::HitHole: return "hit_hole";
    case GrowthStatus::MaxSteps: return "max_steps";
  }
  return "?";
}

double ms_between(std::chrono::steady_clock::time_point a,
                  std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write '" + p.string() + "'");
  return os;
}

void finish(std::ofstream& os, const fs::path& p) {
  os.flush();
  if (!os.good()) throw IoError("write failed on '" + p.string() + "'");
}

void emit_manifest_timing(const fs::path& out, const std::string& cmd,
                          const RunConfig& cfg, const TimingReport& t) {
  {
    auto os = open_out(out / "manifest.json");
    write_manifest(os, cmd, cfg);
    finish(os, out / "manifest.json");
  }
  {
    auto os = open_out(out / "timing.json");
    write_timing(os, t);
    finish(os, out / "timing.json");
  }
}

void run_simulate(const RunConfig& cfg, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const SimResult r = propagate(Design{}, cfg.sim);
  const auto t1 = std::chrono::steady_clock::now();

  const Mesh mesh = build_mesh(cfg.sim.domain, cfg.sim.nx, cfg.sim.ny);
  {
    auto os = open_out(out / "path.csv");
    write_path_csv(os, r);
    finish(os, out / "path.csv");
  }
  {
    auto os = open_out(out / "steps.csv");
    write_steps_csv(os, r);
    finish(os, out / "steps.csv");
  }
  {
    auto os = open_out(out / "fields.csv");
    write_fields_csv(os, mesh, r);
    finish(os, out / "fields.csv");
  }
  if (cfg.svg) {
    auto os = open_out(out / "path.svg");
    write_svg(os, cfg, r.crack, {});
    finish(os, out / "path.svg");
  }

  TimingReport t;
  t.simulate_ms = ms_between(t0, t1);
  double solve_sum = 0.0;
  for (const StepRecord& s : r.steps) solve_sum += s.solve_ms;
  (cfg.sim.solver == SolverMode::Dur ? t.dur_solve_ms : t.full_solve_ms) =
      solve_sum;
  t.total_ms = t.simulate_ms;
  emit_manifest_timing(out, "simulate", cfg, t);

  std::cout << "simulate: " << r.crack.pts.size() << " path vertices, status "
            << status_name(r.status);
  if (!cfg.path.key_points.empty())
    std::cout << ", fitness " << path_fitness(r.crack, cfg.path) << " mm";
  std::cout << "\n";
}

void run_verify(const RunConfig& cfg, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const VerifyResult v = verify_reanalysis(Design{}, cfg.sim);
  const auto t1 = std::chrono::steady_clock::now();

  {
    auto os = open_out(out / "verify.csv");
    write_verify_csv(os, v);
    finish(os, out / "verify.csv");
  }
  {
    auto os = open_out(out / "path.csv");
    write_path_csv(os, v.sim);
    finish(os, out / "path.csv");
  }
  if (cfg.svg) {
    auto os = open_out(out / "path.svg");
    write_svg(os, cfg, v.sim.crack, {});
    finish(os, out / "path.svg");
  }

  TimingReport t;
  double max_disp = 0.0, max_stress = 0.0;
  for (const VerifyRow& row : v.rows) {
    t.full_solve_ms += row.t_full_ms;
    t.dur_solve_ms += row.t_dur_ms;
    max_disp = std::max(max_disp, row.disp_rel_err);
    max_stress = std::max(max_stress, row.stress_rel_err);
  }
  t.total_ms = ms_between(t0, t1);
  emit_manifest_timing(out, "verify", cfg, t);

  std::cout << "verify: " << v.rows.size() << " steps, max displacement error "
            << max_disp << ", max stress error " << max_stress
            << ", solve time full/reanalysis " << t.full_solve_ms << "/"
            << t.dur_solve_ms << " ms\n";
}

void require_search_fields(const RunConfig& cfg, const char* cmd) {
  if (!cfg.design_space)
    throw ValidationError(std::string("config: design_space: required by ") +
                          cmd);
  if (cfg.path.key_points.empty())
    throw ValidationError(
        std::string("config: path.key_points: at least one required by ") +
        cmd);
}

Dataset evaluate_rows(const Eigen::MatrixXd& X, const FitnessFn& fit) {
  Dataset data;
  data.X = X;
  data.y.resize(X.rows());
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      row[static_cast<std::size_t>(j)] = X(i, j);
    data.y(i) = fit(row);
  }
  return data;
}

void run_sample(const RunConfig& cfg, const fs::path& out) {
  require_search_fields(cfg, "sample");
  PartitionPlan plan;
  try {
    plan = partition_design_space(*cfg.design_space, cfg.holes, cfg.r_min);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("config: metamodel.holes: ") + e.what());
  }
  const Bounds b = bounds_for(plan, *cfg.design_space, cfg.r_min);
  const CcpProblem prob{cfg.sim, cfg.path, *cfg.design_space, cfg.r_min};
  EvalCounters counters;
  const FitnessFn fit = make_ccp_fitness(prob, counters);
  auto feasible = [&](const std::vector<double>& x) {
    return constraints_ok(design_from_vector(x), prob.design_space,
                          prob.sim.fixed_holes)
        .ok;
  };

  const auto t0 = std::chrono::steady_clock::now();
  const int total = cfg.surrogate.n_train + cfg.surrogate.n_test;
  const Eigen::MatrixXd X =
      lhs_sample(b, total, feasible, cfg.surrogate.sample_seed);
  const Dataset data = evaluate_rows(X, fit);
  const auto t1 = std::chrono::steady_clock::now();

  {
    auto os = open_out(out / "dataset.csv");
    write_dataset_csv(os, data);
    finish(os, out / "dataset.csv");
  }

  TimingReport t;
  t.sampling_ms = ms_between(t0, t1);
  t.total_ms = t.sampling_ms;
  t.true_evals = counters.true_evals;
  emit_manifest_timing(out, "sample", cfg, t);

  std::cout << "sample: " << total << " designs evaluated ("
            << cfg.surrogate.n_train << " train + " << cfg.surrogate.n_test
            << " test), fitness range [" << data.y.minCoeff() << ", "
            << data.y.maxCoeff() << "] mm\n";
}

void run_train(const RunConfig& cfg, const fs::path& out) {
  const fs::path src =
      cfg.dataset.empty() ? out / "dataset.csv" : fs::path(cfg.dataset);
  std::ifstream is(src);
  if (!is) throw IoError("cannot read dataset '" + src.string() + "'");
  Dataset data;
  try {
    data = read_dataset_csv(is);
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string(e.what()) + " ('" + src.string() + "')");
  }
  const int total = cfg.surrogate.n_train + cfg.surrogate.n_test;
  if (data.size() != total)
    throw ValidationError(
        "config: metamodel.n_train/n_test: dataset has " +
        std::to_string(data.size()) + " rows, expected " +
        std::to_string(total) + " (invariant: dataset split)");

  Dataset train_set{data.X.topRows(cfg.surrogate.n_train),
                    data.y.head(cfg.surrogate.n_train)};
  Dataset test_set{data.X.bottomRows(cfg.surrogate.n_test),
                   data.y.tail(cfg.surrogate.n_test)};

  std::vector<int> layers;
  layers.push_back(static_cast<int>(data.X.cols()));
  layers.insert(layers.end(), cfg.surrogate.hidden.begin(),
                cfg.surrogate.hidden.end());
  layers.push_back(1);

  const auto t0 = std::chrono::steady_clock::now();
  Network net = make_network(layers, cfg.surrogate.init_seed);
  fit_normalization(net, train_set);
  const std::vector<double> hist = train(net, train_set, cfg.surrogate.train);
  const auto t1 = std::chrono::steady_clock::now();

  const RegressionMetrics m =
      regression_metrics(forward_all(net, test_set.X), test_set.y);

  {
    auto os = open_out(out / "model.txt");
    save_network(os, net);
    finish(os, out / "model.txt");
  }
  {
    auto os = open_out(out / "loss.csv");
    os << std::setprecision(17) << "epoch,mse\n";
    for (std::size_t i = 0; i < hist.size(); ++i)
      os << i + 1 << ',' << hist[i] << '\n';
    finish(os, out / "loss.csv");
  }
  {
    json mj;
    mj["r2"] = m.r2_defined ? json(m.r2) : json();
    mj["r2_defined"] = m.r2_defined;
    mj["rmse"] = m.rmse;
    mj["final_train_mse"] = hist.empty() ? 0.0 : hist.back();
    mj["epochs_run"] = hist.size();
    auto os = open_out(out / "metrics.json");
    os << mj.dump(2) << '\n';
    finish(os, out / "metrics.json");
  }

  TimingReport t;
  t.modeling_ms = ms_between(t0, t1);
  t.total_ms = t.modeling_ms;
  emit_manifest_timing(out, "train", cfg, t);

  std::cout << "train: " << hist.size() << " epochs, test RMSE " << m.rmse;
  if (m.r2_defined) std::cout << ", test R^2 " << m.r2;
  std::cout << "\n";
}

void run_optimize(const RunConfig& cfg, const fs::path& out) {
  require_search_fields(cfg, "optimize");
  const CcpProblem prob{cfg.sim, cfg.path, *cfg.design_space, cfg.r_min};

  SurrogateOutcome last;
  double sampling_ms = 0.0, modeling_ms = 0.0;
  InnerRunner runner;
  if (cfg.inner == "pso") {
    runner = make_pso_runner(cfg.ccp.pso);
  } else {
    InnerRunner base = make_bpnn_pso_runner(prob, cfg.surrogate, &last);
    runner = [&, base](const FitnessFn& fit, const Bounds& b,
                       const std::vector<std::vector<double>>& seeds,
                       EvalCounters& counters) {
      PsoResult r = base(fit, b, seeds, counters);
      sampling_ms += last.sample_ms;
      modeling_ms += last.train_ms;
      return r;
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  const CcpResult res = adaptive_ccp(prob, cfg.ccp, runner);
  const auto t1 = std::chrono::steady_clock::now();

  {
    auto os = open_out(out / "convergence.csv");
    write_convergence_csv(os, res.history);
    finish(os, out / "convergence.csv");
  }
  {
    json bj;
    bj["holes"] = json::array();
    for (const Circle& h : res.best.holes)
      bj["holes"].push_back(
          {{"x_mm", h.center.x}, {"y_mm", h.center.y}, {"r_mm", h.r}});
    bj["c_min_mm"] = res.c_min;
    bj["n"] = res.n;
    bj["converged"] = res.converged;
    bj["c_min_per_n_mm"] = res.c_min_per_n;
    bj["true_evals"] = res.true_evals;
    bj["surrogate_evals"] = res.surrogate_evals;
    if (cfg.inner != "pso") {
      bj["surrogate_predicted_c_min_mm"] = last.predicted_c_min;
      bj["surrogate_test_rmse"] = last.test_metrics.rmse;
      if (last.test_metrics.r2_defined)
        bj["surrogate_test_r2"] = last.test_metrics.r2;
    }
    auto os = open_out(out / "best_design.json");
    os << bj.dump(2) << '\n';
    finish(os, out / "best_design.json");
  }

  // The winner's actual crack run, for plots and inspection.
  const SimResult best_run = propagate(res.best, cfg.sim);
  {
    auto os = open_out(out / "path.csv");
    write_path_csv(os, best_run);
    finish(os, out / "path.csv");
  }
  {
    auto os = open_out(out / "steps.csv");
    write_steps_csv(os, best_run);
    finish(os, out / "steps.csv");
  }
  if (cfg.svg) {
    auto os = open_out(out / "path.svg");
    write_svg(os, cfg, best_run.crack, res.best.holes);
    finish(os, out / "path.svg");
  }

  TimingReport t;
  t.sampling_ms = sampling_ms;
  t.modeling_ms = modeling_ms;
  t.total_ms = ms_between(t0, t1);
  t.optimization_ms = std::max(0.0, t.total_ms - sampling_ms - modeling_ms);
  t.true_evals = res.true_evals;
  t.surrogate_evals = res.surrogate_evals;
  emit_manifest_timing(out, "optimize", cfg, t);

  std::cout << "optimize: " << (res.converged ? "converged" : "stopped")
            << " at n=" << res.n << ", best fitness " << res.c_min
            << " mm, true evals " << res.true_evals << ", surrogate evals "
            << res.surrogate_evals << "\n";
}

}  // namespace

RunConfig parse_config(std::istream& is, const std::string& source_name) {
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t upto = std::min(text.size(), e.byte);
    for (std::size_t i = 0; i < upto; ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError("config: " + source_name + ": JSON syntax error at line " +
                      std::to_string(line) + ": " + e.what());
  }

  check_keys(j, "", {"domain", "mesh", "material", "loads", "crack", "growth",
                     "holes", "path", "design_space", "optimizer", "metamodel",
                     "output", "solver", "inner", "seed", "jobs"});

  RunConfig cfg;
  cfg.sim.domain = parse_rect(member(j, "", "domain"), "domain");

  {
    const json& v = member(j, "", "mesh");
    check_keys(v, "mesh", {"nx", "ny"});
    cfg.sim.nx = as_int(member(v, "mesh", "nx"), "mesh.nx");
    cfg.sim.ny = as_int(member(v, "mesh", "ny"), "mesh.ny");
    if (cfg.sim.nx < 1) fail_cfg("mesh.nx", "must be >= 1");
    if (cfg.sim.ny < 1) fail_cfg("mesh.ny", "must be >= 1");
  }
  {
    const json& v = member(j, "", "material");
    check_keys(v, "material", {"E", "nu", "plane"});
    cfg.sim.mat.E = as_double(member(v, "material", "E"), "material.E");
    cfg.sim.mat.nu = as_double(member(v, "material", "nu"), "material.nu");
    if (!(cfg.sim.mat.E > 0.0)) fail_cfg("material.E", "must be > 0");
    if (!(cfg.sim.mat.nu >= 0.0 && cfg.sim.mat.nu < 0.5))
      fail_cfg("material.nu", "must be in [0, 0.5)");
    const std::string plane = opt_string(v, "material", "plane", "strain");
    if (plane == "strain")
      cfg.sim.mat.state = PlaneState::PlaneStrain;
    else if (plane == "stress")
      cfg.sim.mat.state = PlaneState::PlaneStress;
    else
      fail_cfg("material.plane", "must be strain|stress");
  }
  cfg.sim.loads = parse_loads(member(j, "", "loads"), "loads");
  {
    const json& v = member(j, "", "crack");
    check_keys(v, "crack", {"x", "y", "angle_deg", "length"});
    cfg.sim.crack.mouth = {as_double(member(v, "crack", "x"), "crack.x"),
                           as_double(member(v, "crack", "y"), "crack.y")};
    cfg.sim.crack.angle =
        opt_double(v, "crack", "angle_deg", 0.0) * M_PI / 180.0;
    cfg.sim.crack.a0 = as_double(member(v, "crack", "length"), "crack.length");
    if (!(cfg.sim.crack.a0 > 0.0)) fail_cfg("crack.length", "must be > 0");
  }
  {
    const json& v = member(j, "", "growth");
    check_keys(v, "growth", {"da", "max_steps"});
    cfg.sim.da = as_double(member(v, "growth", "da"), "growth.da");
    cfg.sim.max_steps =
        as_int(member(v, "growth", "max_steps"), "growth.max_steps");
    if (!(cfg.sim.da > 0.0)) fail_cfg("growth.da", "must be > 0");
    if (cfg.sim.max_steps < 1) fail_cfg("growth.max_steps", "must be >= 1");
  }
  if (auto it = j.find("holes"); it != j.end())
    cfg.sim.fixed_holes = parse_holes(*it, "holes");
  if (auto it = j.find("path"); it != j.end()) {
    check_keys(*it, "path", {"key_points"});
    const json& kp = member(*it, "path", "key_points");
    if (!kp.is_array()) fail_cfg("path.key_points", "must be an array");
    for (std::size_t i = 0; i < kp.size(); ++i)
      cfg.path.key_points.push_back(
          parse_point(kp[i], "path.key_points[" + std::to_string(i) + "]"));
  }
  if (auto it = j.find("design_space"); it != j.end())
    cfg.design_space = parse_rect(*it, "design_space");
  {
    json v = j.value("optimizer", json::object());
    check_keys(v, "optimizer",
               {"r_min", "eps", "n_max", "particles", "max_generations",
                "inertia", "phi1", "phi2", "stall_generations"});
    cfg.r_min = opt_double(v, "optimizer", "r_min", 1.0);
    cfg.ccp.eps = opt_double(v, "optimizer", "eps", 0.5);
    cfg.ccp.n_max = opt_int(v, "optimizer", "n_max", 4);
    cfg.ccp.pso.particles = opt_int(v, "optimizer", "particles", 40);
    cfg.ccp.pso.max_generations =
        opt_int(v, "optimizer", "max_generations", 200);
    cfg.ccp.pso.inertia = opt_double(v, "optimizer", "inertia", 0.729);
    cfg.ccp.pso.phi1 = opt_double(v, "optimizer", "phi1", 1.49445);
    cfg.ccp.pso.phi2 = opt_double(v, "optimizer", "phi2", 1.49445);
    cfg.ccp.pso.stall_generations =
        opt_int(v, "optimizer", "stall_generations", 50);
    if (!(cfg.r_min > 0.0)) fail_cfg("optimizer.r_min", "must be > 0");
    if (!(cfg.ccp.eps > 0.0)) fail_cfg("optimizer.eps", "must be > 0");
    if (cfg.ccp.n_max < 1) fail_cfg("optimizer.n_max", "must be >= 1");
    if (cfg.ccp.pso.particles < 1)
      fail_cfg("optimizer.particles", "must be >= 1");
    if (cfg.ccp.pso.max_generations < 1)
      fail_cfg("optimizer.max_generations", "must be >= 1");
    if (cfg.ccp.pso.inertia < 0.0)
      fail_cfg("optimizer.inertia", "must be >= 0");
    if (cfg.ccp.pso.phi1 < 0.0) fail_cfg("optimizer.phi1", "must be >= 0");
    if (cfg.ccp.pso.phi2 < 0.0) fail_cfg("optimizer.phi2", "must be >= 0");
    if (cfg.ccp.pso.stall_generations < 1)
      fail_cfg("optimizer.stall_generations", "must be >= 1");
    cfg.surrogate.pso = cfg.ccp.pso;
  }
  {
    json v = j.value("metamodel", json::object());
    check_keys(v, "metamodel",
               {"holes", "n_train", "n_test", "hidden", "epochs",
                "learning_rate", "momentum", "batch", "target_mse", "dataset"});
    cfg.holes = opt_int(v, "metamodel", "holes", 1);
    cfg.surrogate.n_train = opt_int(v, "metamodel", "n_train", 1000);
    cfg.surrogate.n_test = opt_int(v, "metamodel", "n_test", 500);
    if (auto it = v.find("hidden"); it != v.end()) {
      if (!it->is_array() || it->empty())
        fail_cfg("metamodel.hidden", "must be a non-empty array of integers");
      cfg.surrogate.hidden.clear();
      for (std::size_t i = 0; i < it->size(); ++i) {
        const std::string p = "metamodel.hidden[" + std::to_string(i) + "]";
        const int width = as_int((*it)[i], p);
        if (width < 1) fail_cfg(p, "must be >= 1");
        cfg.surrogate.hidden.push_back(width);
      }
    }
    cfg.surrogate.train.epochs = opt_int(v, "metamodel", "epochs", 2000);
    cfg.surrogate.train.learning_rate =
        opt_double(v, "metamodel", "learning_rate", 0.01);
    cfg.surrogate.train.momentum = opt_double(v, "metamodel", "momentum", 0.9);
    cfg.surrogate.train.batch = opt_int(v, "metamodel", "batch", 32);
    cfg.surrogate.train.target_mse =
        opt_double(v, "metamodel", "target_mse", 0.0);
    cfg.dataset = opt_string(v, "metamodel", "dataset", "");
    if (cfg.holes < 1) fail_cfg("metamodel.holes", "must be >= 1");
    if (cfg.surrogate.n_train < 2) fail_cfg("metamodel.n_train", "must be >= 2");
    if (cfg.surrogate.n_test < 2) fail_cfg("metamodel.n_test", "must be >= 2");
    if (cfg.surrogate.train.epochs < 1)
      fail_cfg("metamodel.epochs", "must be >= 1");
    if (!(cfg.surrogate.train.learning_rate > 0.0))
      fail_cfg("metamodel.learning_rate", "must be > 0");
    if (!(cfg.surrogate.train.momentum >= 0.0 &&
          cfg.surrogate.train.momentum < 1.0))
      fail_cfg("metamodel.momentum", "must be in [0, 1)");
    if (cfg.surrogate.train.batch < 1)
      fail_cfg("metamodel.batch", "must be >= 1");
    if (cfg.surrogate.train.target_mse < 0.0)
      fail_cfg("metamodel.target_mse", "must be >= 0");
  }
  {
    json v = j.value("output", json::object());
    check_keys(v, "output", {"svg"});
    cfg.svg = opt_bool(v, "output", "svg", true);
  }
  if (auto it = j.find("solver"); it != j.end()) {
    const std::string s = as_string(*it, "solver");
    if (s == "dur")
      cfg.sim.solver = SolverMode::Dur;
    else if (s == "full")
      cfg.sim.solver = SolverMode::FullEveryStep;
    else
      fail_cfg("solver", "must be dur|full");
  }
  if (auto it = j.find("inner"); it != j.end()) {
    cfg.inner = as_string(*it, "inner");
    if (cfg.inner != "pso" && cfg.inner != "bpnn-pso")
      fail_cfg("inner", "must be pso|bpnn-pso");
  }
  if (auto it = j.find("seed"); it != j.end()) cfg.seed = as_u64(*it, "seed");
  if (auto it = j.find("jobs"); it != j.end()) {
    cfg.jobs = as_int(*it, "jobs");
    if (cfg.jobs < 1) fail_cfg("jobs", "must be >= 1");
  }

  validate(cfg);
  materialize(cfg);
  return cfg;
}

RunConfig parse_config_file(const std::string& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("config: cannot open '" + file + "'");
  return parse_config(is, file);
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) {
    if (*o.jobs < 1) throw ConfigError("config: jobs: must be >= 1");
    cfg.jobs = *o.jobs;
  }
  if (o.solver) {
    if (*o.solver == "dur")
      cfg.sim.solver = SolverMode::Dur;
    else if (*o.solver == "full")
      cfg.sim.solver = SolverMode::FullEveryStep;
    else
      throw ConfigError("config: solver: must be dur|full");
  }
  if (o.inner) {
    if (*o.inner != "pso" && *o.inner != "bpnn-pso")
      throw ConfigError("config: inner: must be pso|bpnn-pso");
    cfg.inner = *o.inner;
  }
  materialize(cfg);
}

void write_manifest(std::ostream& os, const std::string& cmd,
                    const RunConfig& cfg) {
  json j;
  j["version"] = "1.0.0";
  j["command"] = cmd;
  j["config"] = config_echo(cfg);
  os << j.dump(2) << '\n';
}

void write_timing(std::ostream& os, const TimingReport& t) {
  json j;
  j["sampling_ms"] = t.sampling_ms;
  j["modeling_ms"] = t.modeling_ms;
  j["optimization_ms"] = t.optimization_ms;
  j["simulate_ms"] = t.simulate_ms;
  j["full_solve_ms"] = t.full_solve_ms;
  j["dur_solve_ms"] = t.dur_solve_ms;
  j["total_ms"] = t.total_ms;
  j["true_evals"] = t.true_evals;
  j["surrogate_evals"] = t.surrogate_evals;
  os << j.dump(2) << '\n';
}

void write_svg(std::ostream& os, const RunConfig& cfg, const Polyline& crack,
               const std::vector<Circle>& design_holes) {
  const Rect& d = cfg.sim.domain;
  const double m = 0.05 * std::max(d.width(), d.height());
  os << std::setprecision(17);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << d.x_min - m
     << ' ' << d.y_min - m << ' ' << d.width() + 2.0 * m << ' '
     << d.height() + 2.0 * m << "\">\n";
  // Flip y once at group level so every child keeps raw model coordinates.
  os << "<g transform=\"translate(0 " << d.y_max + d.y_min
     << ") scale(1 -1)\">\n";
  os << "<rect x=\"" << d.x_min << "\" y=\"" << d.y_min << "\" width=\""
     << d.width() << "\" height=\"" << d.height()
     << "\" fill=\"#ffffff\" stroke=\"#333333\" stroke-width=\"0.4\"/>\n";
  if (cfg.design_space) {
    const Rect& s = *cfg.design_space;
    os << "<rect x=\"" << s.x_min << "\" y=\"" << s.y_min << "\" width=\""
       << s.width() << "\" height=\"" << s.height()
       << "\" fill=\"none\" stroke=\"#2b6cb0\" stroke-width=\"0.3\" "
          "stroke-dasharray=\"2 1.5\"/>\n";
  }
  for (const Circle& h : cfg.sim.fixed_holes)
    os << "<circle cx=\"" << h.center.x << "\" cy=\"" << h.center.y
       << "\" r=\"" << h.r
       << "\" fill=\"#d9d9d9\" stroke=\"#666666\" stroke-width=\"0.3\"/>\n";
  for (const Circle& h : design_holes)
    os << "<circle cx=\"" << h.center.x << "\" cy=\"" << h.center.y
       << "\" r=\"" << h.r
       << "\" fill=\"#9ecbff\" stroke=\"#2b6cb0\" stroke-width=\"0.3\"/>\n";
  for (const Point& p : cfg.path.key_points)
    os << "<circle cx=\"" << p.x << "\" cy=\"" << p.y
       << "\" r=\"0.9\" fill=\"none\" stroke=\"#c0392b\" "
          "stroke-width=\"0.45\"/>\n";
  if (!crack.pts.empty()) {
    os << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"0.7\" "
          "points=\"";
    for (std::size_t i = 0; i < crack.pts.size(); ++i) {
      if (i) os << ' ';
      os << crack.pts[i].x << ',' << crack.pts[i].y;
    }
    os << "\"/>\n";
  }
  os << "</g>\n</svg>\n";
}

void run_command(const std::string& cmd, const RunConfig& cfg,
                 const std::string& out_dir) {
  const fs::path out(out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "'");

  if (cmd == "simulate")
    run_simulate(cfg, out);
  else if (cmd == "sample")
    run_sample(cfg, out);
  else if (cmd == "train")
    run_train(cfg, out);
  else if (cmd == "optimize")
    run_optimize(cfg, out);
  else if (cmd == "verify")
    run_verify(cfg, out);
  else
    throw ConfigError("unknown command '" + cmd + "'");
}

int dispatch(const std::string& cmd, const RunConfig& cfg,
             const std::string& out_dir) {
  try {
    run_command(cmd, cfg, out_dir);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace ccp::cli
