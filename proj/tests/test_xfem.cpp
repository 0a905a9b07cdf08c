#include <doctest.h>

#include <Eigen/SparseCholesky>
#include <cmath>
#include <random>

#include "ccp/xfem.hpp"

using namespace ccp;

namespace {

Eigen::VectorXd solve_system(const XfemModel& model, const LoadSpec& loads) {
  Assembler asmr;
  asmr.update(model, nullptr);
  SpMat K = asmr.build_matrix(model);
  BcResult bc = apply_loads_bcs(model, loads);
  SpMat Kr = reduce_matrix(K, bc);
  Eigen::VectorXd Fr = reduce_vector(bc.F, bc);
  Eigen::SimplicialLDLT<SpMat> ldlt(Kr);
  REQUIRE(ldlt.info() == Eigen::Success);
  return expand_vector(ldlt.solve(Fr), bc);
}

// Reference Q4 stiffness for a rectangle, typed independently of the library.
Eigen::MatrixXd q4_reference(double hx, double hy, const Eigen::Matrix3d& D) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(8, 8);
  const double gp = 1.0 / std::sqrt(3.0);
  const double xs[4] = {-1, 1, 1, -1}, ys[4] = {-1, -1, 1, 1};
  for (double xi : {-gp, gp}) {
    for (double eta : {-gp, gp}) {
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 8);
      for (int k = 0; k < 4; ++k) {
        double dndx = 0.25 * xs[k] * (1 + ys[k] * eta) * 2.0 / hx;
        double dndy = 0.25 * ys[k] * (1 + xs[k] * xi) * 2.0 / hy;
        B(0, 2 * k) = dndx;
        B(1, 2 * k + 1) = dndy;
        B(2, 2 * k) = dndy;
        B(2, 2 * k + 1) = dndx;
      }
      K += B.transpose() * D * B * (hx * hy / 4.0);
    }
  }
  return K;
}

double bilinear_shape(int k, double xi, double eta) {
  const double xs[4] = {-1, 1, 1, -1}, ys[4] = {-1, -1, 1, 1};
  return 0.25 * (1 + xs[k] * xi) * (1 + ys[k] * eta);
}

}  // namespace

TEST_CASE("constitutive matrices") {
  Material ps{200.0, 0.3, PlaneState::PlaneStress};
  Eigen::Matrix3d D = ps.D();
  double c = 200.0 / (1 - 0.09);
  CHECK(D(0, 0) == doctest::Approx(c));
  CHECK(D(0, 1) == doctest::Approx(0.3 * c));
  CHECK(D(2, 2) == doctest::Approx(c * 0.35));

  Material pe{200.0, 0.3, PlaneState::PlaneStrain};
  Eigen::Matrix3d Dp = pe.D();
  double cp = 200.0 / (1.3 * 0.4);
  CHECK(Dp(0, 0) == doctest::Approx(cp * 0.7));
  CHECK(Dp(0, 1) == doctest::Approx(cp * 0.3));
  CHECK(Dp(2, 2) == doctest::Approx(cp * 0.2));
  CHECK(pe.kappa() == doctest::Approx(3.0 - 4.0 * 0.3));
  CHECK(ps.kappa() == doctest::Approx((3.0 - 0.3) / 1.3));
  CHECK(pe.e_star() == doctest::Approx(200.0 / (1 - 0.09)));
  CHECK(ps.e_star() == doctest::Approx(200.0));
}

TEST_CASE("branch function values") {
  auto f0 = tip_enrichment({1.0, 0.0});
  CHECK(f0[0] == doctest::Approx(0.0));
  CHECK(f0[1] == doctest::Approx(1.0));
  CHECK(f0[2] == doctest::Approx(0.0));
  CHECK(f0[3] == doctest::Approx(0.0));

  auto fpi = tip_enrichment({4.0, M_PI});
  CHECK(fpi[0] == doctest::Approx(2.0));
  CHECK(std::abs(fpi[1]) < 1e-12);
  CHECK(std::abs(fpi[2]) < 1e-12);
  CHECK(std::abs(fpi[3]) < 1e-12);

  auto up = tip_enrichment({1.0, M_PI});
  auto dn = tip_enrichment({1.0, -M_PI});
  CHECK(up[0] - dn[0] == doctest::Approx(2.0));
  CHECK(up[1] - dn[1] == doctest::Approx(0.0));
  CHECK(std::abs(up[2] - dn[2]) < 1e-12);
  CHECK(std::abs(up[3] - dn[3]) < 1e-12);
}

TEST_CASE("branch function gradients match finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ua(-M_PI, M_PI);
  std::uniform_real_distribution<double> ur(0.05, 2.0);
  std::uniform_real_distribution<double> ut(-0.95 * M_PI, 0.95 * M_PI);
  const double h = 1e-6;
  for (int it = 0; it < 100; ++it) {
    TipFrame f;
    double phi = ua(rng);
    f.tip = {ua(rng), ua(rng)};
    f.dir = {std::cos(phi), std::sin(phi)};
    double r = ur(rng), th = ut(rng);
    Vec2 n{-f.dir.y, f.dir.x};
    Point p{f.tip.x + r * (f.dir.x * std::cos(th) + n.x * std::sin(th)),
            f.tip.y + r * (f.dir.y * std::cos(th) + n.y * std::sin(th))};
    TipEnrichmentGrad g = tip_enrichment_grad(p, f);
    for (int a = 0; a < 4; ++a) {
      double dx = (tip_enrichment(tip_polar({p.x + h, p.y}, f))[a] -
                   tip_enrichment(tip_polar({p.x - h, p.y}, f))[a]) /
                  (2 * h);
      double dy = (tip_enrichment(tip_polar({p.x, p.y + h}, f))[a] -
                   tip_enrichment(tip_polar({p.x, p.y - h}, f))[a]) /
                  (2 * h);
      double scale = 1.0 + std::abs(dx) + std::abs(dy);
      CHECK(std::abs(g.grad[a].x - dx) / scale < 1e-5);
      CHECK(std::abs(g.grad[a].y - dy) / scale < 1e-5);
    }
  }
}

TEST_CASE("single element stiffness matches the reference Q4 matrix") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 1, 1);
  Material mat{1.0, 0.0, PlaneState::PlaneStress};
  XfemModel model = XfemModel::build(mesh, mat, Polyline{}, {});
  ElementBlock blk = element_stiffness(model, 0);
  REQUIRE(blk.K.rows() == 8);
  Eigen::MatrixXd ref = q4_reference(1.0, 1.0, mat.D());
  CHECK((blk.K - ref).cwiseAbs().maxCoeff() < 1e-12);
  // Hand-derived entries for E=1, nu=0 on the unit square.
  CHECK(blk.K(0, 0) == doctest::Approx(0.5));
  CHECK(blk.K(0, 2) == doctest::Approx(-0.25));
  // Rigid x-translation row sums vanish.
  for (int r = 0; r < 8; ++r) {
    double s = blk.K(r, 0) + blk.K(r, 2) + blk.K(r, 4) + blk.K(r, 6);
    CHECK(std::abs(s) < 1e-12);
  }
}

TEST_CASE("non-square element stiffness matches reference") {
  Mesh mesh = build_mesh(Rect{0, 0, 3, 1}, 2, 1);
  Material mat{71700.0, 0.33, PlaneState::PlaneStrain};
  XfemModel model = XfemModel::build(mesh, mat, Polyline{}, {});
  ElementBlock blk = element_stiffness(model, 0);
  Eigen::MatrixXd ref = q4_reference(1.5, 1.0, mat.D());
  CHECK((blk.K - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("enriched block sizes") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 1, 5);
  Material mat{1.0, 0.3, PlaneState::PlaneStrain};
  Polyline crack;
  crack.pts = {{-0.1, 0.45}, {1.1, 0.45}};
  XfemModel model = XfemModel::build(mesh, mat, crack, {});
  ElementBlock split = element_stiffness(model, mesh.elem_id(0, 2));
  CHECK(split.K.rows() == 16);

  Mesh single = build_mesh(Rect{0, 0, 1, 1}, 1, 1);
  Polyline inner;
  inner.pts = {{0.2, 0.5}, {0.6, 0.5}};
  XfemModel tip_model = XfemModel::build(single, mat, inner, {});
  ElementBlock tip = element_stiffness(tip_model, 0);
  CHECK(tip.K.rows() == 40);
}

TEST_CASE("element blocks are exactly symmetric") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 4, 4);
  Material mat{71700.0, 0.33, PlaneState::PlaneStrain};
  Polyline crack;
  crack.pts = {{0.0, 0.52}, {0.62, 0.52}};
  XfemModel model = XfemModel::build(mesh, mat, crack, {});
  for (int e = 0; e < mesh.elem_count(); ++e) {
    ElementBlock blk = element_stiffness(model, e);
    for (int i = 0; i < blk.K.rows(); ++i)
      for (int j = 0; j < i; ++j) CHECK(blk.K(i, j) == blk.K(j, i));
  }
}

TEST_CASE("assembled stiffness annihilates rigid-body modes") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 4, 4);
  Material mat{1.0, 0.3, PlaneState::PlaneStrain};
  Polyline crack;
  crack.pts = {{0.0, 0.52}, {0.62, 0.52}};
  XfemModel model = XfemModel::build(mesh, mat, crack, {});
  Assembler asmr;
  asmr.update(model, nullptr);
  SpMat K = asmr.build_matrix(model);
  double kmax = 0.0;
  for (int k = 0; k < K.outerSize(); ++k)
    for (SpMat::InnerIterator it(K, k); it; ++it)
      kmax = std::max(kmax, std::abs(it.value()));

  Eigen::VectorXd tx = Eigen::VectorXd::Zero(model.dm.total);
  Eigen::VectorXd ty = Eigen::VectorXd::Zero(model.dm.total);
  Eigen::VectorXd rot = Eigen::VectorXd::Zero(model.dm.total);
  for (int n = 0; n < mesh.node_count(); ++n) {
    int d = model.dm.std_dof[n];
    if (d < 0) continue;
    Point p = mesh.node_pos(n);
    tx[d] = 1.0;
    ty[d + 1] = 1.0;
    rot[d] = -p.y;
    rot[d + 1] = p.x;
  }
  CHECK((K * tx).cwiseAbs().maxCoeff() < 1e-10 * kmax);
  CHECK((K * ty).cwiseAbs().maxCoeff() < 1e-10 * kmax);
  CHECK((K * rot).cwiseAbs().maxCoeff() < 1e-10 * kmax);
}

TEST_CASE("stiffness is linear in the modulus") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 3, 3);
  Polyline crack;
  crack.pts = {{0.0, 0.52}, {0.40, 0.52}};
  XfemModel m1 = XfemModel::build(mesh, {100.0, 0.25, PlaneState::PlaneStrain}, crack, {});
  XfemModel m2 = XfemModel::build(mesh, {200.0, 0.25, PlaneState::PlaneStrain}, crack, {});
  Assembler a1, a2;
  a1.update(m1, nullptr);
  a2.update(m2, nullptr);
  SpMat K1 = a1.build_matrix(m1);
  SpMat K2 = a2.build_matrix(m2);
  REQUIRE(K1.nonZeros() == K2.nonZeros());
  for (int k = 0; k < K1.outerSize(); ++k) {
    SpMat::InnerIterator i1(K1, k), i2(K2, k);
    for (; i1; ++i1, ++i2)
      CHECK(i2.value() == doctest::Approx(2.0 * i1.value()).epsilon(1e-14));
  }
}

TEST_CASE("uniaxial patch test is exact") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 3, 3);
  Material mat{100.0, 0.3, PlaneState::PlaneStress};
  XfemModel model = XfemModel::build(mesh, mat, Polyline{}, {});
  const double sigma = 2.5;
  LoadSpec loads;
  loads.tractions.push_back({Edge::Top, 0.0, sigma});
  loads.fixed_edges.push_back({Edge::Bottom, false, true});
  loads.fixed_nodes.push_back({{0.0, 0.0}, true, false});
  Eigen::VectorXd U = solve_system(model, loads);

  for (double x : {0.17, 0.5, 0.83}) {
    for (double y : {0.2, 0.61, 0.94}) {
      int e = mesh.locate({x, y});
      Rect r = mesh.elem_rect(e);
      Point xi{(x - (r.x_min + r.x_max) / 2) * 2 / mesh.hx,
               (y - (r.y_min + r.y_max) / 2) * 2 / mesh.hy};
      Eigen::Vector3d s = stress_at(model, U, e, xi);
      CHECK(std::abs(s[0]) < 1e-8 * sigma);
      CHECK(s[1] == doctest::Approx(sigma).epsilon(1e-8));
      CHECK(std::abs(s[2]) < 1e-8 * sigma);
    }
  }
  Vec2 top = evaluate_displacement(model, U, {0.5, 1.0});
  CHECK(top.y == doctest::Approx(sigma / 100.0).epsilon(1e-8));
  Vec2 right = evaluate_displacement(model, U, {1.0, 0.0});
  CHECK(right.x == doctest::Approx(-0.3 * sigma / 100.0).epsilon(1e-6));

  Eigen::VectorXd vm = von_mises_nodal(model, U);
  for (int n = 0; n < mesh.node_count(); ++n)
    CHECK(vm[n] == doctest::Approx(sigma).epsilon(1e-6));

  Eigen::Matrix2d g = displacement_gradient(model, U, mesh.locate({0.5, 0.5}), {0.1, -0.2});
  CHECK(g(1, 1) == doctest::Approx(sigma / 100.0).epsilon(1e-8));
  CHECK(g(0, 0) == doctest::Approx(-0.3 * sigma / 100.0).epsilon(1e-6));
}

TEST_CASE("consistent edge tractions sum to the applied load") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 4, 4);
  Material mat{1.0, 0.3, PlaneState::PlaneStrain};
  XfemModel model = XfemModel::build(mesh, mat, Polyline{}, {});
  LoadSpec loads;
  loads.tractions.push_back({Edge::Top, 0.0, 3.5});
  BcResult bc = apply_loads_bcs(model, loads);
  double total = 0.0;
  for (int i = 0; i < model.dm.total; ++i) total += bc.F[i] * (i % 2);
  CHECK(total == doctest::Approx(3.5).epsilon(1e-13));
  // Interior edge nodes carry twice the corner share.
  int corner = model.dm.std_dof[mesh.node_id(0, 4)];
  int interior = model.dm.std_dof[mesh.node_id(2, 4)];
  CHECK(bc.F[corner + 1] == doctest::Approx(3.5 * 0.125).epsilon(1e-13));
  CHECK(bc.F[interior + 1] == doctest::Approx(3.5 * 0.25).epsilon(1e-13));
  // Nothing lands off the loaded edge.
  for (int n = 0; n < mesh.node_count(); ++n) {
    if (mesh.node_pos(n).y > 1.0 - 1e-12) continue;
    int d = model.dm.std_dof[n];
    CHECK(bc.F[d] == 0.0);
    CHECK(bc.F[d + 1] == 0.0);
  }
}

TEST_CASE("reduction and expansion round-trip") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 3, 3);
  Material mat{1.0, 0.3, PlaneState::PlaneStrain};
  XfemModel model = XfemModel::build(mesh, mat, Polyline{}, {});
  LoadSpec loads;
  loads.fixed_edges.push_back({Edge::Bottom, true, true});
  BcResult bc = apply_loads_bcs(model, loads);
  int n_fixed = 0;
  for (int v : bc.fixed) n_fixed += v;
  CHECK(n_fixed == 8);
  CHECK(static_cast<int>(bc.free_to_full.size()) == model.dm.total - 8);
  Eigen::VectorXd F = Eigen::VectorXd::LinSpaced(model.dm.total, 1.0, 2.0);
  Eigen::VectorXd r = reduce_vector(F, bc);
  Eigen::VectorXd x = expand_vector(r, bc);
  for (int i = 0; i < model.dm.total; ++i)
    CHECK(x[i] == (bc.fixed[i] ? 0.0 : F[i]));
}

TEST_CASE("heaviside field produces the expected displacement jump") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 4, 4);
  Material mat{1.0, 0.25, PlaneState::PlaneStrain};
  Polyline crack;
  crack.pts = {{0.0, 0.52}, {0.62, 0.52}};
  XfemModel model = XfemModel::build(mesh, mat, crack, {});
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd U(model.dm.total);
  for (int i = 0; i < model.dm.total; ++i) U[i] = u(rng);

  auto expected_jump = [&](const Point& p) {
    int e = mesh.locate(p);
    Rect r = mesh.elem_rect(e);
    double xi = (p.x - (r.x_min + r.x_max) / 2) * 2 / mesh.hx;
    double eta = (p.y - (r.y_min + r.y_max) / 2) * 2 / mesh.hy;
    auto nodes = mesh.elem_nodes(e);
    Vec2 jump{0.0, 0.0};
    double rtip = (p - model.frame.tip).norm();
    for (int k = 0; k < 4; ++k) {
      double N = bilinear_shape(k, xi, eta);
      int hd = model.dm.h_dof[nodes[k]];
      if (hd >= 0) {
        jump.x += 2.0 * N * U[hd];
        jump.y += 2.0 * N * U[hd + 1];
      }
      int bd = model.dm.branch_dof[nodes[k]];
      if (bd >= 0) {
        jump.x += 2.0 * std::sqrt(rtip) * N * U[model.dm.branch_index(nodes[k], 0, 0)];
        jump.y += 2.0 * std::sqrt(rtip) * N * U[model.dm.branch_index(nodes[k], 0, 1)];
      }
    }
    return jump;
  };

  const double eps = 1e-8;
  for (double x : {0.1, 0.3, 0.55}) {
    Point p{x, 0.52};
    Vec2 up = evaluate_displacement(model, U, {x, 0.52 + eps});
    Vec2 dn = evaluate_displacement(model, U, {x, 0.52 - eps});
    Vec2 want = expected_jump(p);
    CHECK(up.x - dn.x == doctest::Approx(want.x).epsilon(1e-5));
    CHECK(up.y - dn.y == doctest::Approx(want.y).epsilon(1e-5));
  }
  // Ahead of the tip and far away the field is continuous.
  for (Point p : {Point{0.8, 0.52}, Point{0.3, 0.9}}) {
    Vec2 up = evaluate_displacement(model, U, {p.x, p.y + eps});
    Vec2 dn = evaluate_displacement(model, U, {p.x, p.y - eps});
    CHECK(std::abs(up.x - dn.x) < 1e-6);
    CHECK(std::abs(up.y - dn.y) < 1e-6);
  }
}

TEST_CASE("incremental assembly is bit-identical to scratch assembly") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 8, 8);
  Material mat{71700.0, 0.33, PlaneState::PlaneStrain};
  Polyline crack_a;
  crack_a.pts = {{0.0, 0.56}, {0.40, 0.56}};
  Polyline crack_b = crack_a;
  crack_b.pts.push_back({0.63, 0.60});

  XfemModel ma = XfemModel::build(mesh, mat, crack_a, {});
  XfemModel mb = XfemModel::build(mesh, mat, crack_b, {});

  Assembler incremental;
  incremental.update(ma, nullptr);
  SpMat Ka = incremental.build_matrix(ma);
  incremental.update(mb, &ma);
  CHECK(incremental.last_dirty_count() < mesh.elem_count() / 2);
  SpMat Kb_inc = incremental.build_matrix(mb);

  Assembler scratch;
  scratch.update(mb, nullptr);
  SpMat Kb = scratch.build_matrix(mb);

  REQUIRE(Kb_inc.nonZeros() == Kb.nonZeros());
  REQUIRE(Kb_inc.outerSize() == Kb.outerSize());
  for (int k = 0; k <= Kb.outerSize(); ++k)
    REQUIRE(Kb_inc.outerIndexPtr()[k] == Kb.outerIndexPtr()[k]);
  for (int k = 0; k < Kb.nonZeros(); ++k) {
    REQUIRE(Kb_inc.innerIndexPtr()[k] == Kb.innerIndexPtr()[k]);
    REQUIRE(Kb_inc.valuePtr()[k] == Kb.valuePtr()[k]);
  }
  CHECK(Ka.nonZeros() < Kb.nonZeros());
}

TEST_CASE("von mises invariants") {
  Material pe{100.0, 0.3, PlaneState::PlaneStrain};
  Material ps{100.0, 0.3, PlaneState::PlaneStress};
  CHECK(von_mises({0, 0, 5.0}, ps) == doctest::Approx(5.0 * std::sqrt(3.0)));
  CHECK(von_mises({7.0, 0, 0}, ps) == doctest::Approx(7.0));
  CHECK(von_mises({3.0, 3.0, 0}, pe) == doctest::Approx(3.0 * 0.4));
  CHECK(von_mises({0, 0, 0}, pe) == 0.0);
}

TEST_CASE("cracked plate under tension opens the crack") {
  Mesh mesh = build_mesh(Rect{0, 0, 1, 1}, 8, 8);
  Material mat{1000.0, 0.3, PlaneState::PlaneStrain};
  Polyline crack;
  crack.pts = {{0.0, 0.52}, {0.47, 0.52}};
  XfemModel model = XfemModel::build(mesh, mat, crack, {});
  LoadSpec loads;
  loads.tractions.push_back({Edge::Top, 0.0, 1.0});
  loads.tractions.push_back({Edge::Bottom, 0.0, -1.0});
  loads.fixed_nodes.push_back({{1.0, 0.0}, true, true});
  loads.fixed_nodes.push_back({{1.0, 1.0}, true, false});
  Eigen::VectorXd U = solve_system(model, loads);
  double opening = evaluate_displacement(model, U, {0.2, 0.52 + 1e-9}).y -
                   evaluate_displacement(model, U, {0.2, 0.52 - 1e-9}).y;
  CHECK(opening > 1e-4);
  // Far field still pulls apart vertically.
  CHECK(evaluate_displacement(model, U, {0.5, 1.0}).y >
        evaluate_displacement(model, U, {0.5, 0.0}).y);
}
