#include "ccp/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ccp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

bool Factorization::compute(const SpMat& K) {
  n_ = static_cast<int>(K.rows());
  ldlt_.compute(K);
  ok_ = (ldlt_.info() == Eigen::Success);
  if (ok_) {
    D_ = ldlt_.vectorD();
    ok_ = D_.size() == n_ && D_.minCoeff() > 0.0;
  }
  if (!ok_) return false;
  L_ = ldlt_.matrixL().nestedExpression();
  const auto& pidx = ldlt_.permutationP().indices();
  perm_.resize(n_);
  for (int i = 0; i < n_; ++i) perm_[i] = pidx[i];
  parent_.assign(n_, -1);
  for (int j = 0; j < n_; ++j) {
    for (SpMat::InnerIterator it(L_, j); it; ++it) {
      if (it.row() > j) {
        parent_[j] = static_cast<int>(it.row());
        break;
      }
    }
  }
  fwd_.assign(n_, 0.0);
  bwd_.assign(n_, 0.0);
  in_closure_.assign(n_, 0);
  closure_.clear();
  targets_.clear();
  closure_dirty_ = false;
  return true;
}

Eigen::VectorXd Factorization::solve(const Eigen::VectorXd& b) const {
  return ldlt_.solve(b);
}

void Factorization::clear_targets() {
  for (int c : closure_) in_closure_[c] = 0;
  closure_.clear();
  targets_.clear();
  closure_dirty_ = false;
}

void Factorization::add_target(int row) {
  targets_.push_back(row);
  for (int j = perm_[row]; j != -1 && !in_closure_[j]; j = parent_[j]) {
    in_closure_[j] = 1;
    closure_.push_back(j);
    closure_dirty_ = true;
  }
}

void Factorization::refresh_closure() const {
  if (!closure_dirty_) return;
  std::sort(closure_.begin(), closure_.end(), std::greater<int>());
  closure_dirty_ = false;
}

void Factorization::inverse_column(int col, std::vector<double>& out) const {
  refresh_closure();
  // Forward substitution L y = e_p touches exactly the elimination-tree path
  // from p to the root; every off-diagonal row of an L column is an ancestor.
  path_.clear();
  const int p = perm_[col];
  for (int j = p; j != -1; j = parent_[j]) path_.push_back(j);
  fwd_[p] = 1.0;
  for (int j : path_) {
    double yj = fwd_[j];
    if (yj == 0.0) continue;
    for (SpMat::InnerIterator it(L_, j); it; ++it)
      if (it.row() > j) fwd_[it.row()] -= it.value() * yj;
  }
  for (int j : path_) fwd_[j] /= D_[j];
  // Backward substitution restricted to the ancestor-closed target set:
  // x_i depends only on x at ancestors of i, all of which are in the set.
  for (int i : closure_) {
    double s = fwd_[i];
    for (SpMat::InnerIterator it(L_, i); it; ++it)
      if (it.row() > i) s -= it.value() * bwd_[it.row()];
    bwd_[i] = s;
  }
  out.resize(targets_.size());
  for (std::size_t t = 0; t < targets_.size(); ++t)
    out[t] = bwd_[perm_[targets_[t]]];
  for (int j : path_) fwd_[j] = 0.0;
}

void DurEngine::init(const SpMat& K1, const Eigen::VectorXd& F1,
                     const std::vector<DofDesc>& desc) {
  k1_ = K1;
  if (!f1_.compute(K1)) throw std::runtime_error("base factorization failed");
  u1_ = f1_.solve(F1);
  // A rank-deficient matrix can slip past the pivot check when rounding
  // turns exact zeros into tiny positive values; the solution it yields
  // cannot reproduce the load, so the residual exposes it.
  const double fn = F1.cwiseAbs().maxCoeff();
  const double rn = (K1 * u1_ - F1).cwiseAbs().maxCoeff();
  if (rn > 1e-8 * std::max(fn, 1e-300))
    throw std::runtime_error(
        "base solve residual too large (missing constraints?)");
  desc1_ = desc;
  index1_.clear();
  index1_.reserve(desc.size() * 2);
  for (std::size_t i = 0; i < desc.size(); ++i)
    index1_.emplace(desc[i], static_cast<int>(i));
  q_slots_.clear();
  q_pos_.clear();
  q_ = 0;
  g_.resize(0, 0);
  ginv_.resize(0, 0);
  c_.resize(0, 0);
  f1_.clear_targets();
  ready_ = true;
}

void DurEngine::grow_q(const std::vector<int>& add) {
  if (add.empty()) return;
  const int k = static_cast<int>(add.size());
  const int q0 = q_;
  const int q1 = q0 + k;
  for (int b : add) {
    q_pos_.emplace(b, static_cast<int>(q_slots_.size()));
    q_slots_.push_back(b);
    f1_.add_target(b);
  }
  auto grow = [&](Eigen::MatrixXd& M) {
    Eigen::MatrixXd nm = Eigen::MatrixXd::Zero(q1, q1);
    if (q0 > 0) nm.topLeftCorner(q0, q0) = M.topLeftCorner(q0, q0);
    M.swap(nm);
  };
  grow(g_);
  grow(c_);

  std::vector<double> colv;
  for (int t = 0; t < k; ++t) {
    f1_.inverse_column(add[t], colv);
    for (int r = 0; r < q1; ++r) {
      g_(r, q0 + t) = colv[r];
      g_(q0 + t, r) = colv[r];
    }
  }
  for (int t = 0; t < k; ++t) {
    for (SpMat::InnerIterator it(k1_, add[t]); it; ++it) {
      auto f = q_pos_.find(static_cast<int>(it.row()));
      if (f != q_pos_.end()) {
        c_(f->second, q0 + t) = it.value();
        c_(q0 + t, f->second) = it.value();
      }
    }
  }

  if (q0 == 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(g_);
    if (llt.info() == Eigen::Success)
      ginv_ = llt.solve(Eigen::MatrixXd::Identity(q1, q1));
    else
      ginv_ = g_.ldlt().solve(Eigen::MatrixXd::Identity(q1, q1));
  } else {
    Eigen::MatrixXd B = g_.block(0, q0, q0, k);
    Eigen::MatrixXd Cb = g_.block(q0, q0, k, k);
    Eigen::MatrixXd W = ginv_ * B;
    Eigen::MatrixXd Sc = Cb - B.transpose() * W;
    Eigen::LLT<Eigen::MatrixXd> llt(Sc);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd Sinv = llt.solve(Eigen::MatrixXd::Identity(k, k));
      Eigen::MatrixXd WS = W * Sinv;
      Eigen::MatrixXd ni(q1, q1);
      ni.topLeftCorner(q0, q0) = ginv_ + WS * W.transpose();
      ni.topRightCorner(q0, k) = -WS;
      ni.bottomLeftCorner(k, q0) = -WS.transpose();
      ni.bottomRightCorner(k, k) = Sinv;
      ginv_.swap(ni);
    } else {
      // Severely ill-conditioned border: rebuild from scratch.
      ginv_ = g_.ldlt().solve(Eigen::MatrixXd::Identity(q1, q1));
    }
  }
  ginv_ = ((ginv_ + ginv_.transpose()) / 2.0).eval();
  q_ = q1;
}

Eigen::VectorXd DurEngine::step(const SpMat& Ki, const Eigen::VectorXd& Fi,
                                const std::vector<DofDesc>& desc,
                                const std::vector<int>& candidate_rows,
                                DurStats* stats) {
  auto t_all = Clock::now();
  const int ni = static_cast<int>(Ki.rows());
  const int n1 = static_cast<int>(k1_.rows());
  DurStats st;

  auto t0 = Clock::now();
  std::vector<int> to1(ni);
  std::vector<int> from1(n1, -1);
  for (int i = 0; i < ni; ++i) {
    auto f = index1_.find(desc[i]);
    to1[i] = (f == index1_.end()) ? -1 : f->second;
    if (to1[i] >= 0) from1[to1[i]] = i;
  }
  Eigen::VectorXd u1s = Eigen::VectorXd::Zero(ni);
  for (int i = 0; i < ni; ++i)
    if (to1[i] >= 0) u1s[i] = u1_[to1[i]];
  const double umax = std::max(1.0, u1s.cwiseAbs().maxCoeff());

  std::vector<char> in_p(ni, 0);
  for (int i = 0; i < ni; ++i)
    if (to1[i] < 0) {
      in_p[i] = 1;
      ++st.new_dofs;
    }
  for (int b : q_slots_)
    if (from1[b] >= 0) in_p[from1[b]] = 1;

  std::vector<int> scan;
  if (candidate_rows.empty()) {
    scan.resize(ni);
    for (int i = 0; i < ni; ++i) scan[i] = i;
  } else {
    scan = candidate_rows;
    std::sort(scan.begin(), scan.end());
    scan.erase(std::unique(scan.begin(), scan.end()), scan.end());
  }

  std::vector<int> add_slots;
  const int kmax = std::numeric_limits<int>::max();
  for (int r : scan) {
    if (in_p[r]) continue;
    const int r1 = to1[r];
    if (q_pos_.count(r1)) {
      in_p[r] = 1;
      continue;
    }
    double rowmax = 0.0, maxdiff = 0.0, dot = 0.0;
    SpMat::InnerIterator a(Ki, r);
    SpMat::InnerIterator b(k1_, r1);
    while (a || b) {
      while (a && to1[a.row()] < 0) {
        // entry in a column that does not exist in the base system
        rowmax = std::max(rowmax, std::abs(a.value()));
        maxdiff = std::max(maxdiff, std::abs(a.value()));
        dot += a.value() * u1s[a.row()];
        ++a;
      }
      if (!a && !b) break;
      const int akey = a ? to1[a.row()] : kmax;
      const int bkey = b ? static_cast<int>(b.row()) : kmax;
      if (akey == bkey) {
        rowmax = std::max({rowmax, std::abs(a.value()), std::abs(b.value())});
        maxdiff = std::max(maxdiff, std::abs(a.value() - b.value()));
        dot += a.value() * u1s[a.row()];
        ++a;
        ++b;
      } else if (akey < bkey) {
        rowmax = std::max(rowmax, std::abs(a.value()));
        maxdiff = std::max(maxdiff, std::abs(a.value()));
        dot += a.value() * u1s[a.row()];
        ++a;
      } else {
        // entry of the base system that disappeared
        rowmax = std::max(rowmax, std::abs(b.value()));
        maxdiff = std::max(maxdiff, std::abs(b.value()));
        ++b;
      }
    }
    const double tau = 1e-12 * std::max(rowmax, 1e-300);
    const double delta = Fi[r] - dot;
    if (maxdiff > tau || std::abs(delta) > tau * umax) {
      in_p[r] = 1;
      add_slots.push_back(r1);
    }
  }
  // Base dofs no longer present must leave the reusable block as well.
  for (int b = 0; b < n1; ++b)
    if (from1[b] < 0 && !q_pos_.count(b)) add_slots.push_back(b);
  st.ms_detect = ms_since(t0);

  t0 = Clock::now();
  grow_q(add_slots);
  st.ms_grow = ms_since(t0);

  t0 = Clock::now();
  std::vector<int> P;
  P.reserve(64);
  for (int i = 0; i < ni; ++i)
    if (in_p[i]) P.push_back(i);
  const int m = static_cast<int>(P.size());
  st.unbalanced = m;
  st.q_size = q_;

  Eigen::VectorXd u = u1s;
  Eigen::VectorXd dup;
  std::vector<int> slot_of(m, -1);
  if (m > 0) {
    std::vector<int> ip(ni, -1);
    for (int t = 0; t < m; ++t) ip[P[t]] = t;
    for (int t = 0; t < m; ++t) {
      int b = to1[P[t]];
      if (b >= 0) slot_of[t] = q_pos_.at(b);
    }
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(m, m);
    for (int tc = 0; tc < m; ++tc)
      for (SpMat::InnerIterator it(Ki, P[tc]); it; ++it) {
        int tp = ip[it.row()];
        if (tp >= 0) S(tp, tc) = it.value();
      }
    for (int ar = 0; ar < m; ++ar) {
      if (slot_of[ar] < 0) continue;
      for (int ac = 0; ac < m; ++ac) {
        if (slot_of[ac] < 0) continue;
        S(ar, ac) -= c_(slot_of[ar], slot_of[ac]) - ginv_(slot_of[ar], slot_of[ac]);
      }
    }
    Eigen::VectorXd d(m);
    for (int t = 0; t < m; ++t) {
      double dot = 0.0;
      for (SpMat::InnerIterator it(Ki, P[t]); it; ++it)
        dot += it.value() * u1s[it.row()];
      d[t] = Fi[P[t]] - dot;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() == Eigen::Success)
      dup = llt.solve(d);
    else
      dup = S.ldlt().solve(d);
    for (int t = 0; t < m; ++t) u[P[t]] += dup[t];
  }
  st.ms_schur = ms_since(t0);

  t0 = Clock::now();
  if (m > 0 && q_ > 0) {
    Eigen::VectorXd mq = Eigen::VectorXd::Zero(q_);
    for (int t = 0; t < m; ++t)
      if (slot_of[t] >= 0) mq[slot_of[t]] = dup[t];
    Eigen::VectorXd h = ginv_ * mq;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n1);
    for (int s = 0; s < q_; ++s) rhs[q_slots_[s]] = h[s];
    Eigen::VectorXd z = f1_.solve(rhs);
    for (int i = 0; i < ni; ++i)
      if (!in_p[i] && to1[i] >= 0) u[i] += z[to1[i]];
  }
  st.ms_solve = ms_since(t0);

  const double fmax = std::max(Fi.cwiseAbs().maxCoeff(), 1e-300);
  st.residual = (Ki * u - Fi).cwiseAbs().maxCoeff() / fmax;
  if (!(st.residual <= 1e-8)) {
    st.fallback = true;
    Factorization full;
    if (!full.compute(Ki)) throw std::runtime_error("fallback factorization failed");
    u = full.solve(Fi);
    st.residual = (Ki * u - Fi).cwiseAbs().maxCoeff() / fmax;
  }
  st.ms_total = ms_since(t_all);
  if (stats) *stats = st;
  return u;
}

}  // namespace ccp
