#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccp/optimizer.hpp"

namespace ccp {

// Fully connected feed-forward regressor with tanh hidden layers, a linear
// output, and min-max normalization of inputs and target to [-1, 1].
struct Network {
  std::vector<int> layers;  // e.g. {3, 5, 5, 1}
  std::vector<Eigen::MatrixXd> W;  // W[l] maps layer l to layer l+1
  std::vector<Eigen::VectorXd> b;
  std::string activation = "tanh";
  Eigen::VectorXd x_min, x_max;  // per-feature input range
  double y_min = -1.0, y_max = 1.0;
};

struct Dataset {
  Eigen::MatrixXd X;  // one sample per row, raw (unnormalized) scale
  Eigen::VectorXd y;
  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
};

// Glorot-uniform weights, zero biases, identity normalization. Deterministic
// for a fixed seed.
Network make_network(const std::vector<int>& layers, std::uint64_t seed);

// Sets the normalization ranges from the data; near-constant columns map to
// the normalized midpoint instead of dividing by a vanishing span.
void fit_normalization(Network& net, const Dataset& data);

// Affine min-max maps to and from [-1, 1]; exact inverses of each other.
Eigen::VectorXd normalize_input(const Network& net, const Eigen::VectorXd& x);
Eigen::VectorXd denormalize_input(const Network& net, const Eigen::VectorXd& xn);
double normalize_output(const Network& net, double y);
double denormalize_output(const Network& net, double yn);

double forward(const Network& net, const std::vector<double>& x);
Eigen::VectorXd forward_all(const Network& net, const Eigen::MatrixXd& X);

// Mean squared error over the batch, measured on the normalized target scale
// (the scale training sees).
double loss(const Network& net, const Dataset& batch);

struct Gradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
};

// Exact reverse-mode gradient of loss() with respect to every weight and
// bias.
Gradients gradient(const Network& net, const Dataset& batch);

struct TrainConfig {
  int epochs = 2000;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch = 32;
  std::uint64_t seed = 1;
  double target_mse = 0.0;  // stop early when the epoch loss drops below
};

// Mini-batch gradient descent with momentum; returns the per-epoch loss
// history. Deterministic given cfg.seed. Throws when the loss exceeds ten
// times its initial value (diverging step size).
std::vector<double> train(Network& net, const Dataset& data,
                          const TrainConfig& cfg);

struct RegressionMetrics {
  double r2 = 0.0;
  double rmse = 0.0;
  bool r2_defined = true;  // false when the actuals have zero variance
};

RegressionMetrics regression_metrics(const Eigen::VectorXd& pred,
                                     const Eigen::VectorXd& actual);

// Versioned plain-text round trip: layer sizes, activation, normalization
// ranges, then row-major weights and biases per layer.
void save_network(std::ostream& os, const Network& net);
Network load_network(std::istream& is);

// Latin hypercube over the box: each dimension is split into n strata and
// each stratum used exactly once. Rows violating the feasibility predicate
// are redrawn inside their strata; a row that cannot find a feasible point
// within the retry cap aborts with a low-feasibility diagnostic.
Eigen::MatrixXd lhs_sample(const Bounds& b, int n,
                           const std::function<bool(const std::vector<double>&)>& feasible,
                           std::uint64_t seed);

// Penalty-guarded fitness over a predictor instead of the solver: infeasible
// designs get kPenaltyFitness, feasible ones the prediction, counted as
// surrogate evaluations.
FitnessFn make_model_fitness(std::function<double(const std::vector<double>&)> predict,
                             const Rect& space, const std::vector<Circle>& fixed,
                             EvalCounters& counters);

struct SurrogateConfig {
  int n_train = 1000;
  int n_test = 500;
  std::vector<int> hidden = {5, 5};
  TrainConfig train;
  PsoConfig pso;
  std::uint64_t sample_seed = 1;
  std::uint64_t init_seed = 1;
};

struct SurrogateOutcome {
  CcpResult result;  // c_min is the true-verified fitness of the best design
  double predicted_c_min = 0.0;  // the surrogate's value for that design
  RegressionMetrics test_metrics;
  Network net;
  Dataset train_set, test_set;
  // Wall-clock phase split: true-solver dataset evaluation, network
  // training, and the surrogate-only swarm (verification included).
  double sample_ms = 0.0;
  double train_ms = 0.0;
  double swarm_ms = 0.0;
};

// Sample -> evaluate with the true solver -> train -> swarm over the
// surrogate only -> verify the winner once with the true solver. True solver
// calls total exactly n_train + n_test + 1; none happen inside the swarm
// loop, which the history's true_evals column makes visible.
SurrogateOutcome surrogate_pso(const CcpProblem& prob, const Bounds& b,
                               const SurrogateConfig& cfg);

// Adapter for the adaptive partition loop. When last is given, each call
// stores its full outcome there (for model export and reporting).
InnerRunner make_bpnn_pso_runner(const CcpProblem& prob,
                                 const SurrogateConfig& cfg,
                                 SurrogateOutcome* last = nullptr);

// One row per sample: the design coordinates then the measured fitness.
void write_dataset_csv(std::ostream& os, const Dataset& data);

// Inverse of write_dataset_csv: last column is the target, any header
// accepted. Throws with the line number on malformed rows.
Dataset read_dataset_csv(std::istream& is);

}  // namespace ccp
