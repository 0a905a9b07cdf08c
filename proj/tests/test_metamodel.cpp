#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "ccp/metamodel.hpp"

using namespace ccp;

namespace {

Dataset random_batch(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  Dataset b;
  b.X.resize(n, d);
  b.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) b.X(i, j) = u(rng);
    b.y(i) = u(rng);
  }
  return b;
}

double quadratic3(double a, double b, double c) {
  return (a - 1.0) * (a - 1.0) + 0.5 * (b + 0.5) * (b + 0.5) + 0.3 * a * c + 2.0;
}

std::vector<double> flatten(const Gradients& g) {
  std::vector<double> v;
  for (const auto& W : g.dW)
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) v.push_back(W(r, c));
  for (const auto& b : g.db)
    for (Eigen::Index r = 0; r < b.size(); ++r) v.push_back(b(r));
  return v;
}

SimConfig tiny_sim() {
  SimConfig cfg;
  cfg.domain = {0.0, 0.0, 60.0, 120.0};
  cfg.nx = 12;
  cfg.ny = 24;
  cfg.mat = {7.17e4, 0.33, PlaneState::PlaneStrain};
  cfg.loads.tractions = {{Edge::Top, 0.0, 200.0}};
  cfg.loads.fixed_edges = {{Edge::Bottom, true, true}};
  cfg.crack = {{0.0, 60.0}, 0.0, 10.0};
  cfg.da = 2.0;
  cfg.max_steps = 4;
  return cfg;
}

}  // namespace

TEST_CASE("normalization round trips and forward matches hand arithmetic") {
  SUBCASE("round trip is exact to machine noise") {
    Network net = make_network({3, 5, 5, 1}, 11);
    Dataset d = random_batch(40, 3, 12);
    fit_normalization(net, d);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-2.0, 3.0);
    for (int t = 0; t < 50; ++t) {
      Eigen::VectorXd x(3);
      x << u(rng), u(rng), u(rng);
      const Eigen::VectorXd back = denormalize_input(net, normalize_input(net, x));
      for (int j = 0; j < 3; ++j) CHECK(std::abs(back(j) - x(j)) < 1e-12);
      const double y = u(rng);
      CHECK(std::abs(denormalize_output(net, normalize_output(net, y)) - y) < 1e-12);
    }
  }

  SUBCASE("a constant column still maps invertibly") {
    Network net = make_network({2, 3, 1}, 4);
    Dataset d;
    d.X.resize(5, 2);
    d.y.resize(5);
    for (int i = 0; i < 5; ++i) {
      d.X(i, 0) = 7.0;  // constant feature
      d.X(i, 1) = i;
      d.y(i) = 3.0;  // constant target
    }
    fit_normalization(net, d);
    Eigen::VectorXd x(2);
    x << 7.0, 2.5;
    const Eigen::VectorXd xn = normalize_input(net, x);
    CHECK(xn(0) == 0.0);
    CHECK(std::abs(denormalize_input(net, xn)(0) - 7.0) < 1e-12);
    CHECK(std::abs(denormalize_output(net, normalize_output(net, 3.0)) - 3.0) < 1e-12);
  }

  SUBCASE("zero weights output the denormalized bias") {
    Network net = make_network({2, 4, 1}, 9);
    for (auto& W : net.W) W.setZero();
    net.b.back()(0) = 0.25;
    net.y_min = 10.0;
    net.y_max = 30.0;
    // denorm(0.25) = 10 + 1.25/2 * 20
    CHECK(forward(net, {0.3, -0.4}) == doctest::Approx(22.5).epsilon(1e-14));
  }

  SUBCASE("a tiny network matches the closed form") {
    Network net = make_network({1, 2, 1}, 1);
    net.W[0](0, 0) = 0.5;
    net.W[0](1, 0) = -0.25;
    net.b[0](0) = 0.1;
    net.b[0](1) = 0.2;
    net.W[1](0, 0) = 0.3;
    net.W[1](0, 1) = -0.4;
    net.b[1](0) = 0.05;
    // identity normalization: ranges already [-1, 1]
    const double x = 0.3;
    const double expect = 0.3 * std::tanh(0.5 * x + 0.1) -
                          0.4 * std::tanh(-0.25 * x + 0.2) + 0.05;
    CHECK(std::abs(forward(net, {x}) - expect) < 1e-12);
    CHECK(forward(net, {x}) == forward(net, {x}));  // deterministic bits
  }
}

TEST_CASE("gradients match finite differences") {
  SUBCASE("twenty random networks against central differences") {
    for (int trial = 0; trial < 20; ++trial) {
      Network net = make_network({2, 5, 5, 1}, 100 + trial);
      Dataset batch = random_batch(8, 2, 200 + trial);
      fit_normalization(net, batch);
      const Gradients g = gradient(net, batch);
      const std::vector<double> gv = flatten(g);

      std::vector<double> fd;
      const double h = 1e-6;
      auto probe = [&](Eigen::MatrixXd& M, Eigen::Index r, Eigen::Index c) {
        const double keep = M(r, c);
        M(r, c) = keep + h;
        const double up = loss(net, batch);
        M(r, c) = keep - h;
        const double dn = loss(net, batch);
        M(r, c) = keep;
        fd.push_back((up - dn) / (2.0 * h));
      };
      for (auto& W : net.W)
        for (Eigen::Index r = 0; r < W.rows(); ++r)
          for (Eigen::Index c = 0; c < W.cols(); ++c) probe(W, r, c);
      for (auto& b : net.b) {
        Eigen::MatrixXd view = b;
        for (Eigen::Index r = 0; r < b.size(); ++r) {
          const double keep = b(r);
          b(r) = keep + h;
          const double up = loss(net, batch);
          b(r) = keep - h;
          const double dn = loss(net, batch);
          b(r) = keep;
          fd.push_back((up - dn) / (2.0 * h));
        }
        (void)view;
      }

      REQUIRE(fd.size() == gv.size());
      double scale = 0.0, err = 0.0;
      for (std::size_t k = 0; k < fd.size(); ++k) {
        scale = std::max(scale, std::abs(fd[k]));
        err = std::max(err, std::abs(fd[k] - gv[k]));
      }
      CHECK(err < 1e-6 * std::max(scale, 1e-12));
    }
  }

  SUBCASE("zero residual means zero gradient") {
    Network net = make_network({2, 5, 1}, 3);
    Dataset batch = random_batch(6, 2, 4);
    fit_normalization(net, batch);
    for (Eigen::Index i = 0; i < batch.X.rows(); ++i) {
      std::vector<double> row = {batch.X(i, 0), batch.X(i, 1)};
      batch.y(i) = forward(net, row);
    }
    // fit_normalization used the old targets; refit so norm(y) hits exactly
    const Gradients g = gradient(net, batch);
    for (double v : flatten(g)) CHECK(std::abs(v) < 1e-12);
  }

  SUBCASE("the gradient scales linearly with a single-sample residual") {
    Network net = make_network({2, 4, 1}, 8);
    Dataset base = random_batch(1, 2, 9);
    fit_normalization(net, base);
    std::vector<double> row = {base.X(0, 0), base.X(0, 1)};
    const double fit = forward(net, row);
    const double span = net.y_max - net.y_min;

    Dataset one = base;
    one.y(0) = fit - 0.1 * span;
    Dataset two = base;
    two.y(0) = fit - 0.2 * span;
    const std::vector<double> g1 = flatten(gradient(net, one));
    const std::vector<double> g2 = flatten(gradient(net, two));
    for (std::size_t k = 0; k < g1.size(); ++k)
      CHECK(std::abs(g2[k] - 2.0 * g1[k]) < 1e-9 * std::max(1.0, std::abs(g2[k])));
  }
}

TEST_CASE("training fits analytic targets") {
  SUBCASE("the identity map on one input") {
    Network net = make_network({1, 5, 5, 1}, 21);
    Dataset train_set, test_set;
    train_set.X.resize(100, 1);
    train_set.y.resize(100);
    for (int i = 0; i < 100; ++i) {
      train_set.X(i, 0) = i / 99.0;
      train_set.y(i) = train_set.X(i, 0);
    }
    test_set.X.resize(37, 1);
    test_set.y.resize(37);
    for (int i = 0; i < 37; ++i) {
      test_set.X(i, 0) = (i + 0.5) / 37.0;
      test_set.y(i) = test_set.X(i, 0);
    }
    fit_normalization(net, train_set);
    TrainConfig cfg;
    cfg.epochs = 800;
    cfg.seed = 5;
    const std::vector<double> hist = train(net, train_set, cfg);
    const Eigen::VectorXd pred = forward_all(net, test_set.X);
    const double mse = (pred - test_set.y).squaredNorm() / 37.0;
    CHECK(mse < 1e-4);

    // Ten-epoch moving average trends down. Minibatch noise wobbles several
    // percent once the loss sits at its floor (observed up to ~5%), so the
    // window check carries an allowance well below divergence territory and
    // the overall 100x drop check carries none.
    REQUIRE(hist.size() >= 40);
    auto ma = [&](std::size_t k) {
      double s = 0.0;
      for (std::size_t i = k; i < k + 10; ++i) s += hist[i];
      return s / 10.0;
    };
    for (std::size_t k = 0; k + 20 <= hist.size(); k += 10)
      CHECK(ma(k + 10) <= ma(k) * 1.1 + 1e-12);
    CHECK(ma(hist.size() - 10) < 0.01 * ma(0));
  }

  SUBCASE("training is reproducible for a fixed seed") {
    Dataset data = random_batch(60, 2, 31);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.seed = 6;
    Network a = make_network({2, 5, 5, 1}, 77);
    fit_normalization(a, data);
    Network b_net = make_network({2, 5, 5, 1}, 77);
    fit_normalization(b_net, data);
    const std::vector<double> ha = train(a, data, cfg);
    const std::vector<double> hb = train(b_net, data, cfg);
    REQUIRE(ha.size() == hb.size());
    for (std::size_t i = 0; i < ha.size(); ++i) CHECK(ha[i] == hb[i]);
    for (std::size_t l = 0; l < a.W.size(); ++l)
      CHECK((a.W[l] - b_net.W[l]).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("an absurd learning rate is caught as divergence") {
    Dataset data = random_batch(60, 2, 41);
    Network net = make_network({2, 5, 5, 1}, 78);
    fit_normalization(net, data);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.learning_rate = 50.0;
    CHECK_THROWS_AS(train(net, data, cfg), std::runtime_error);
  }

  SUBCASE("a smooth three-input map reaches R^2 above 0.95") {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Dataset train_set, test_set;
    train_set.X.resize(400, 3);
    train_set.y.resize(400);
    for (int i = 0; i < 400; ++i) {
      for (int j = 0; j < 3; ++j) train_set.X(i, j) = u(rng);
      train_set.y(i) = quadratic3(train_set.X(i, 0), train_set.X(i, 1), train_set.X(i, 2));
    }
    test_set.X.resize(200, 3);
    test_set.y.resize(200);
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 3; ++j) test_set.X(i, j) = u(rng);
      test_set.y(i) = quadratic3(test_set.X(i, 0), test_set.X(i, 1), test_set.X(i, 2));
    }
    Network net = make_network({3, 5, 5, 1}, 91);
    fit_normalization(net, train_set);
    TrainConfig cfg;
    cfg.epochs = 1200;
    cfg.seed = 7;
    train(net, train_set, cfg);
    const RegressionMetrics m =
        regression_metrics(forward_all(net, test_set.X), test_set.y);
    CHECK(m.r2_defined);
    CHECK(m.r2 > 0.95);
  }
}

TEST_CASE("regression metrics match hand values") {
  Eigen::VectorXd actual(3), pred(3);
  actual << 0.0, 1.0, 2.0;
  pred << 0.0, 1.0, 1.0;
  const RegressionMetrics m = regression_metrics(pred, actual);
  CHECK(m.r2_defined);
  CHECK(m.r2 == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m.rmse == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-14));

  const RegressionMetrics perfect = regression_metrics(actual, actual);
  CHECK(perfect.r2 == 1.0);
  CHECK(perfect.rmse == 0.0);

  Eigen::VectorXd mean_pred = Eigen::VectorXd::Constant(3, 1.0);
  CHECK(regression_metrics(mean_pred, actual).r2 == doctest::Approx(0.0).epsilon(1e-14));

  Eigen::VectorXd flat = Eigen::VectorXd::Constant(3, 2.0);
  CHECK_FALSE(regression_metrics(pred, flat).r2_defined);

  Eigen::VectorXd two(2);
  two << 0.0, 1.0;
  CHECK_THROWS_AS(regression_metrics(two, actual), std::invalid_argument);
  Eigen::VectorXd one(1);
  CHECK_THROWS_AS(regression_metrics(one, one), std::invalid_argument);
}

TEST_CASE("latin hypercube sampling stratifies and respects constraints") {
  auto always = [](const std::vector<double>&) { return true; };

  SUBCASE("four one-dimensional samples land one per quarter") {
    Bounds b{{0.0}, {1.0}};
    Eigen::MatrixXd X = lhs_sample(b, 4, always, 17);
    std::vector<double> v = {X(0, 0), X(1, 0), X(2, 0), X(3, 0)};
    std::sort(v.begin(), v.end());
    for (int k = 0; k < 4; ++k) {
      CHECK(v[k] >= 0.25 * k);
      CHECK(v[k] < 0.25 * (k + 1));
    }
  }

  SUBCASE("every marginal is stratified in three dimensions") {
    Bounds b{{-1.0, 0.0, 5.0}, {1.0, 10.0, 6.0}};
    const int n = 50;
    Eigen::MatrixXd X = lhs_sample(b, n, always, 18);
    for (int j = 0; j < 3; ++j) {
      std::vector<double> col(n);
      for (int i = 0; i < n; ++i) col[i] = X(i, j);
      std::sort(col.begin(), col.end());
      const double w = (b.hi[j] - b.lo[j]) / n;
      for (int k = 0; k < n; ++k) {
        CHECK(col[k] >= b.lo[j] + k * w);
        CHECK(col[k] < b.lo[j] + (k + 1) * w);
      }
    }
  }

  SUBCASE("constrained rows all pass and keep their strata") {
    Bounds b{{0.0, 0.0}, {1.0, 1.0}};
    auto sum_ok = [](const std::vector<double>& x) { return x[0] + x[1] <= 1.5; };
    const int n = 40;
    Eigen::MatrixXd X = lhs_sample(b, n, sum_ok, 19);
    for (int i = 0; i < n; ++i) CHECK(X(i, 0) + X(i, 1) <= 1.5);
    for (int j = 0; j < 2; ++j) {
      std::vector<double> col(n);
      for (int i = 0; i < n; ++i) col[i] = X(i, j);
      std::sort(col.begin(), col.end());
      for (int k = 0; k < n; ++k) {
        CHECK(col[k] >= static_cast<double>(k) / n);
        CHECK(col[k] < static_cast<double>(k + 1) / n);
      }
    }
  }

  SUBCASE("a hopeless feasible region is rejected with a diagnostic") {
    Bounds b{{0.0}, {1.0}};
    auto never = [](const std::vector<double>&) { return false; };
    CHECK_THROWS_AS(lhs_sample(b, 4, never, 20), std::runtime_error);
  }

  SUBCASE("sampling is reproducible") {
    Bounds b{{0.0, 0.0}, {1.0, 2.0}};
    Eigen::MatrixXd a = lhs_sample(b, 25, always, 21);
    Eigen::MatrixXd c = lhs_sample(b, 25, always, 21);
    CHECK((a - c).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("model files round trip exactly") {
  Network net = make_network({3, 5, 5, 1}, 33);
  Dataset d = random_batch(30, 3, 34);
  fit_normalization(net, d);
  std::ostringstream os;
  save_network(os, net);
  std::istringstream is(os.str());
  const Network back = load_network(is);

  CHECK(back.layers == net.layers);
  CHECK(back.activation == net.activation);
  CHECK((back.x_min - net.x_min).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.x_max - net.x_max).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.y_min == net.y_min);
  CHECK(back.y_max == net.y_max);
  for (std::size_t l = 0; l < net.W.size(); ++l) {
    CHECK((back.W[l] - net.W[l]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.b[l] - net.b[l]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(forward(back, {0.1, -0.7, 2.0}) == forward(net, {0.1, -0.7, 2.0}));

  std::istringstream bad("mlp 1\nlayers 2 1 1\n");
  CHECK_THROWS_AS(load_network(bad), std::runtime_error);
  std::istringstream truncated("bpnn 1\nlayers 3 2 2 1\nactivation tanh\nx_min 0 0");
  CHECK_THROWS_AS(load_network(truncated), std::runtime_error);
}

TEST_CASE("a perfect surrogate reproduces the true-function swarm") {
  const Rect space{0.0, 0.0, 100.0, 100.0};
  Bounds b{{20.0, 20.0, 1.0}, {80.0, 80.0, 10.0}};  // always strictly inside
  auto f = [](const std::vector<double>& x) {
    return (x[0] - 50.0) * (x[0] - 50.0) + (x[1] - 40.0) * (x[1] - 40.0) +
           (x[2] - 5.0) * (x[2] - 5.0);
  };
  PsoConfig cfg;
  cfg.seed = 12;
  cfg.max_generations = 40;

  EvalCounters c1, c2;
  const FitnessFn direct = make_model_fitness(f, space, {}, c1);
  const FitnessFn doubled = make_model_fitness(f, space, {}, c2);
  const PsoResult a = pso_run(direct, b, cfg, {}, &c1);
  const PsoResult d = pso_run(doubled, b, cfg, {}, &c2);
  REQUIRE(a.best.size() == d.best.size());
  for (std::size_t j = 0; j < a.best.size(); ++j) CHECK(a.best[j] == d.best[j]);
  CHECK(a.best_fit == d.best_fit);
  CHECK(c1.surrogate_evals == c2.surrogate_evals);
  CHECK(c1.true_evals == 0);
}

TEST_CASE("the surrogate swarm never touches the true solver mid-flight") {
  CcpProblem prob;
  prob.sim = tiny_sim();
  prob.path.key_points = {{25.0, 61.0}, {35.0, 62.0}};
  prob.design_space = {15.0, 64.0, 55.0, 110.0};
  prob.r_min = 3.0;

  SurrogateConfig cfg;
  cfg.n_train = 40;
  cfg.n_test = 20;
  cfg.train.epochs = 200;
  cfg.train.seed = 2;
  cfg.pso.particles = 10;
  cfg.pso.max_generations = 15;
  cfg.pso.stall_generations = 15;
  cfg.pso.seed = 3;
  cfg.sample_seed = 4;
  cfg.init_seed = 5;

  const PartitionPlan plan = partition_design_space(prob.design_space, 1, prob.r_min);
  const Bounds b = bounds_for(plan, prob.design_space, prob.r_min);
  const SurrogateOutcome out = surrogate_pso(prob, b, cfg);

  CHECK(out.result.true_evals == 61);  // 40 + 20 samples + 1 verification
  CHECK(out.result.surrogate_evals > 0);
  for (const GenRecord& h : out.result.history)
    CHECK(h.true_evals == 60);  // constant during the swarm: no solver calls
  CHECK(out.result.c_min < kPenaltyFitness);
  CHECK(out.result.best.holes.size() == 1);
  CHECK(constraints_ok(out.result.best, prob.design_space, {}).ok);
  CHECK(out.train_set.size() == 40);
  CHECK(out.test_set.size() == 20);
  CHECK(std::isfinite(out.predicted_c_min));

  // The adapter plugs into the adaptive loop and reports the true fitness.
  SurrogateOutcome last;
  CcpConfig ccp;
  ccp.eps = std::numeric_limits<double>::infinity();
  ccp.n_max = 1;
  CcpResult res = adaptive_ccp(prob, ccp, make_bpnn_pso_runner(prob, cfg, &last));
  CHECK(res.converged);
  CHECK(res.true_evals == 61);
  CHECK(res.c_min == last.result.c_min);

  std::ostringstream os;
  write_dataset_csv(os, out.train_set);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "h0_x_mm,h0_y_mm,h0_r_mm,c_mm");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 40);
}
