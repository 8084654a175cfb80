#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "igdtm/conjugate.hpp"

namespace igdtm::test {

/// Hand-built statistics for a deterministic trajectory: second = x x^T and
/// cross = x_t x_{t-1}^T, with zero posterior spread.
inline SmootherStats<double> point_stats(const Eigen::MatrixXd& x) {
  SmootherStats<double> st;
  st.mean = x;
  for (Eigen::Index t = 0; t < x.cols(); ++t) st.second.push_back(x.col(t) * x.col(t).transpose());
  for (Eigen::Index t = 1; t < x.cols(); ++t) st.cross.push_back(x.col(t) * x.col(t - 1).transpose());
  return st;
}

/// Scalar statistics with chosen E[x_t^2] and zero means.
inline SmootherStats<double> scalar_second_moments(const std::vector<double>& second) {
  SmootherStats<double> st;
  const int T = static_cast<int>(second.size());
  st.mean = Eigen::MatrixXd::Zero(1, T);
  for (double s : second) st.second.push_back(Eigen::MatrixXd::Constant(1, 1, s));
  for (int t = 1; t < T; ++t) st.cross.push_back(Eigen::MatrixXd::Zero(1, 1));
  return st;
}

inline MatrixRowsPosterior<double> point_rows(const Eigen::MatrixXd& A) {
  const auto N = A.rows();
  return {A, Eigen::MatrixXd::Zero(N * N, N * N)};
}

struct ConjugateReport {
  bool prior_recovery = true;
  double max_error = 0.0;
  void error(double e) { max_error = std::max(max_error, std::abs(e)); }
};

/// Every zero-evidence and scalar hand-derived case of the five conjugate
/// updates; prior recovery is checked for exact equality.
inline ConjugateReport run_conjugate_cases() {
  ConjugateReport rep;
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  const auto zero_rows = point_rows(Eigen::MatrixXd::Zero(1, 1));

  // Q: zero residuals over T = 5, then w1 = 2, Psi1 = 1 with residual sum 3 over T = 4.
  {
    const WishartPosterior<double> prior{2.0, 0.7 * one};
    const auto post = update_Q(scalar_second_moments({0, 0, 0, 0, 0}), zero_rows, prior);
    rep.prior_recovery &= post.w == 4.0 + 2.0 && post.Psi == prior.Psi;
    const auto q = update_Q(scalar_second_moments({0.4, 1, 1, 1}), zero_rows, WishartPosterior<double>{2.0, one});
    rep.error(q.w - 5.0);
    rep.error(q.Psi(0, 0) - 0.25);
    rep.error(q.mean()(0, 0) - 1.25);
  }
  // mu, r: no responsibility, then one pixel with unit residual moments at T = 2.
  {
    const NormalGammaPosterior<double> prior{0.0, 1.0, 1.0, 1.0};
    const Eigen::MatrixXd y = Eigen::MatrixXd::Ones(1, 2);
    const auto st = scalar_second_moments({0.3, 0.9});
    const std::vector<RowPosterior<double>> C{{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1)}};
    const auto empty = update_mu_r(Eigen::VectorXd(Eigen::VectorXd::Zero(1)), y, st, C, prior);
    rep.prior_recovery &= empty.m == prior.m && empty.lambda == prior.lambda && empty.w == prior.w && empty.Psi == prior.Psi;
    const auto post = update_mu_r(Eigen::VectorXd(Eigen::VectorXd::Ones(1)), y, st, C, prior);
    rep.error(post.lambda - 3.0);
    rep.error(post.m - 2.0 / 3.0);
    rep.error(post.w - 3.0);
    rep.error(post.Psi - 0.6);
    rep.error(post.E_r_mu() - post.w * post.Psi * post.m);
  }
  // delta, S: zero weight, then x_1 = 2 exactly with unit weight.
  {
    const NormalWishartPosterior<double> prior{Eigen::VectorXd::Zero(1), 1.0, 2.0, one};
    Eigen::MatrixXd x(1, 3);
    x << 2.0, 1.0, 0.5;
    const auto st = point_stats(x);
    const auto empty = update_delta_S(0.0, st, prior);
    rep.prior_recovery &= empty.m == prior.m && empty.lambda == prior.lambda && empty.w == prior.w && empty.Psi == prior.Psi;
    const auto post = update_delta_S(1.0, st, prior);
    rep.error(post.lambda - 2.0);
    rep.error(post.m(0) - 1.0);
    rep.error(post.w - 3.0);
    rep.error(post.Psi(0, 0) - 1.0 / 3.0);
  }
  // A: zero statistics, then a flat-prior scalar fit of x_t = 0.6 x_{t-1}.
  {
    const auto empty = update_A(scalar_second_moments({0, 0, 0}), one, 2.5);
    rep.prior_recovery &= empty.mean.isZero(0) && empty.cov == 2.5 * one;
    Eigen::MatrixXd x(1, 4);
    x << 1.0, 0.6, 0.36, 0.216;
    const auto post = update_A(point_stats(x), Eigen::MatrixXd(3.0 * one), std::numeric_limits<double>::infinity());
    rep.error(post.mean(0, 0) - 0.6);
    // Scalar posterior variance 1 / (E[q] sum x_{t-1}^2).
    rep.error(post.cov(0, 0) - 1.0 / (3.0 * (1.0 + 0.36 + 0.1296)));
  }
  // C: zero weight, then a flat-prior scalar regression y_t = 0.4 x_t.
  {
    Eigen::MatrixXd x(1, 3);
    x << 1.0, -2.0, 0.5;
    const auto st = point_stats(x);
    const Eigen::VectorXd y = 0.4 * x.row(0).transpose();
    const auto empty = update_C(0.0, y, st, 2.0, 0.0, 0.3);
    rep.prior_recovery &= empty.mean.isZero(0) && empty.cov == 0.3 * one;
    const auto post = update_C(1.0, y, st, 2.0, 0.0, std::numeric_limits<double>::infinity());
    rep.error(post.mean(0) - 0.4);
    rep.error(post.cov(0, 0) - 1.0 / (2.0 * 5.25));
  }
  return rep;
}

}  // namespace igdtm::test
