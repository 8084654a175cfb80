#pragma once

#include <random>

#include "igdtm/rtss.hpp"
#include "test_util.hpp"

namespace igdtm::test {

struct SmootherInstance {
  ExpectedLds<double> p;
  WeightedObservation<double> w;
  // Point values behind p when it was built from a known LDS.
  Eigen::MatrixXd A, Q, S;
  Eigen::VectorXd delta, c;
  double r = 1.0, mu = 0.0;
};

/// Random SPD parameters. With `uncertain`, E[A^T Q A] and E[C^T C] carry
/// extra posterior-covariance terms, as they do inside the VB loop.
inline SmootherInstance random_instance(std::mt19937_64& rng, int N, int T, bool uncertain) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SmootherInstance s;
  s.A = random_matrix(rng, N, N, 0.7);
  s.Q = random_spd(rng, N, 0.3);
  s.S = random_spd(rng, N, 0.3);
  s.delta = random_matrix(rng, N, 1);
  s.c = random_matrix(rng, N, 1);
  s.r = 0.5 + 2.0 * u(rng);
  s.mu = u(rng);
  s.p = ExpectedLds<double>::point(s.A, s.Q, s.S, s.delta, s.c, s.r, s.mu);
  if (uncertain) {
    s.p.AtQA += random_spd(rng, N, 0.05) * 0.3;
    s.p.C_second_moment += random_spd(rng, N, 0.05) * 0.2;
  }
  s.w.y_bar = random_matrix(rng, T, 1, 0.5);
  s.w.N_tilde = 0.5 + 3.0 * u(rng);
  return s;
}

/// Moment-form reference for a point-parameter LDS: builds the prior joint
/// covariance of x_{1:T} by propagating x_1 ~ N(delta, S^-1) through
/// x_t = A x_{t-1} + N(0, Q^-1), then conditions on the first `upto`
/// pseudo-observations y_t = c^T x_t + mu + N(0, 1 / (N_tilde r)).
struct MomentPosterior {
  Eigen::VectorXd mean;  // NT
  Eigen::MatrixXd cov;   // NT x NT
};

inline MomentPosterior moment_form_posterior(const SmootherInstance& s, int upto) {
  const int N = static_cast<int>(s.A.rows()), T = s.w.T();
  const Eigen::MatrixXd Qinv = s.Q.inverse(), Sinv = s.S.inverse();
  Eigen::VectorXd m(N * T);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N * T, N * T);
  m.head(N) = s.delta;
  P.topLeftCorner(N, N) = Sinv;
  for (int t = 1; t < T; ++t) {
    m.segment(t * N, N) = s.A * m.segment((t - 1) * N, N);
    for (int u = 0; u < t; ++u)
      P.block(t * N, u * N, N, N) = s.A * P.block((t - 1) * N, u * N, N, N);
    P.block(t * N, t * N, N, N) = s.A * P.block((t - 1) * N, (t - 1) * N, N, N) * s.A.transpose() + Qinv;
    for (int u = 0; u < t; ++u) P.block(u * N, t * N, N, N) = P.block(t * N, u * N, N, N).transpose();
  }
  if (upto == 0 || s.w.N_tilde == 0.0) return {m, P};
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(upto, N * T);
  for (int t = 0; t < upto; ++t) H.block(t, t * N, 1, N) = s.c.transpose();
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(upto, upto) / (s.w.N_tilde * s.r);
  const Eigen::MatrixXd G = P * H.transpose() * (H * P * H.transpose() + R).inverse();
  const Eigen::VectorXd resid = s.w.y_bar.head(upto).array() - s.mu - (H * m).array();
  return {m + G * resid, P - G * H * P};
}

inline SmootherStats<double> stats_from_moments(const MomentPosterior& mp, int N, int T) {
  SmootherStats<double> st;
  st.mean = Eigen::Map<const Eigen::MatrixXd>(mp.mean.data(), N, T);
  for (int t = 0; t < T; ++t)
    st.second.push_back(mp.cov.block(t * N, t * N, N, N) + st.mean.col(t) * st.mean.col(t).transpose());
  for (int t = 1; t < T; ++t)
    st.cross.push_back(mp.cov.block(t * N, (t - 1) * N, N, N) + st.mean.col(t) * st.mean.col(t - 1).transpose());
  return st;
}

/// Largest relative discrepancy over mean, second and cross moments.
inline double stats_rel_error(const SmootherStats<double>& a, const SmootherStats<double>& b) {
  double e = max_rel_diff(a.mean, b.mean);
  for (std::size_t t = 0; t < a.second.size(); ++t) e = std::max(e, max_rel_diff(a.second[t], b.second[t]));
  for (std::size_t t = 0; t < a.cross.size(); ++t) e = std::max(e, max_rel_diff(a.cross[t], b.cross[t]));
  return e;
}

}  // namespace igdtm::test
