#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <unordered_map>
#include <vector>

#include "ccp/xfem.hpp"

namespace ccp {

// Sparse SPD factorization with exact partial inverse queries: selected
// entries of K^{-1} are obtained from elimination-tree-restricted triangular
// solves instead of full solves.
class Factorization {
 public:
  bool compute(const SpMat& K);
  bool ok() const { return ok_; }
  int size() const { return n_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

  // Rows of interest for inverse_column, in insertion order.
  void clear_targets();
  void add_target(int row);
  int target_count() const { return static_cast<int>(targets_.size()); }

  // out[t] = (K^{-1})(targets[t], col), exact to solver precision.
  void inverse_column(int col, std::vector<double>& out) const;

 private:
  void refresh_closure() const;

  Eigen::SimplicialLDLT<SpMat> ldlt_;
  int n_ = 0;
  bool ok_ = false;
  SpMat L_;                    // unit-lower factor, strict lower part stored
  Eigen::VectorXd D_;
  std::vector<int> perm_;      // original -> permuted
  std::vector<int> parent_;    // elimination tree over permuted indices

  std::vector<int> targets_;            // original indices
  mutable std::vector<int> closure_;    // permuted, ancestor-closed
  mutable std::vector<char> in_closure_;
  mutable bool closure_dirty_ = false;
  mutable std::vector<double> fwd_, bwd_;
  mutable std::vector<int> path_;
};

struct DofDescHash {
  std::size_t operator()(const DofDesc& d) const {
    std::size_t h = static_cast<std::size_t>(d.node);
    h = h * 131 + static_cast<std::size_t>(d.kind);
    h = h * 131 + static_cast<std::size_t>(d.comp);
    h = h * 131 + static_cast<std::size_t>(d.alpha + 1);
    return h;
  }
};

struct DurStats {
  int unbalanced = 0;     // rows solved densely this step
  int q_size = 0;         // accumulated special set in the base numbering
  int new_dofs = 0;
  double ms_detect = 0, ms_grow = 0, ms_schur = 0, ms_solve = 0, ms_total = 0;
  double residual = 0;
  bool fallback = false;
};

// Exact reanalysis against the first factorized configuration. Each step
// solves the current system by dense elimination of the rows that differ
// from the base system, reusing the base factorization for everything else.
// A residual check guards the result; on failure the step falls back to a
// fresh factorization, so the returned solution is always a true solve.
class DurEngine {
 public:
  void init(const SpMat& K1, const Eigen::VectorXd& F1,
            const std::vector<DofDesc>& desc);
  bool ready() const { return ready_; }
  const Eigen::VectorXd& base_solution() const { return u1_; }

  // candidate_rows: current free indices whose equations may have changed
  // (union of dofs of re-integrated elements). Empty = scan every row.
  Eigen::VectorXd step(const SpMat& Ki, const Eigen::VectorXd& Fi,
                       const std::vector<DofDesc>& desc,
                       const std::vector<int>& candidate_rows,
                       DurStats* stats = nullptr);

 private:
  void grow_q(const std::vector<int>& new_slots_base);

  bool ready_ = false;
  SpMat k1_;
  Factorization f1_;
  Eigen::VectorXd u1_;
  std::vector<DofDesc> desc1_;
  std::unordered_map<DofDesc, int, DofDescHash> index1_;

  // Accumulated special set q: base-numbering dofs whose rows ever changed
  // plus dofs later removed from the model.
  std::vector<int> q_slots_;               // base indices, insertion order
  std::unordered_map<int, int> q_pos_;     // base index -> slot
  Eigen::MatrixXd g_, ginv_, c_;           // (K1^{-1})_qq, its inverse, K1_qq
  int q_ = 0;
};

}  // namespace ccp
