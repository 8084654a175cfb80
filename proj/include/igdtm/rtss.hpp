#pragma once

#include <string>
#include <vector>

#include "igdtm/error.hpp"
#include "igdtm/linalg.hpp"

namespace igdtm {

/// Expectations under q of the parameters of one component's chain
///   x_1 ~ N(delta, S^-1),  x_t = A x_{t-1} + noise with precision Q,
/// together with the aggregated observation row.
template <typename Scalar>
struct ExpectedLds {
  Mat<Scalar> A;     ///< E[A]
  Mat<Scalar> AtQA;  ///< E[A^T Q A], includes the posterior covariance of A
  Mat<Scalar> Q;     ///< E[Q]
  Vec<Scalar> C_bar;  ///< responsibility-weighted mean observation row
  Scalar r = Scalar(1);     ///< E[r]
  Scalar r_mu = Scalar(0);  ///< E[r mu]
  Mat<Scalar> S;        ///< E[S]
  Vec<Scalar> S_delta;  ///< E[S delta]
  Mat<Scalar> C_second_moment;  ///< responsibility-weighted mean of E[C_i^T C_i]

  int N() const noexcept { return static_cast<int>(Q.rows()); }

  /// Plug-in parameters of a known LDS: every expectation is a point value.
  static ExpectedLds point(const Mat<Scalar>& A, const Mat<Scalar>& Q, const Mat<Scalar>& S, const Vec<Scalar>& delta,
                           const Vec<Scalar>& C_row, Scalar r, Scalar mu) {
    return {A, A.transpose() * Q * A, Q, C_row, r, r * mu, S, S * delta, C_row * C_row.transpose()};
  }
};

/// The component pseudo-observation: responsibility-weighted mean trace.
template <typename Scalar>
struct WeightedObservation {
  Vec<Scalar> y_bar;
  Scalar N_tilde = Scalar(0);

  int T() const noexcept { return static_cast<int>(y_bar.size()); }
};

inline constexpr double kWeightFloor = 1e-10;

/// N_tilde = sum_i q_ij and y_bar_t = sum_i q_ij y_it / max(N_tilde, 1e-10).
/// `q` is L x K, `y` is L x T.
template <typename DerivedQ, typename DerivedY>
WeightedObservation<typename DerivedY::Scalar> weighted_observation(const Eigen::MatrixBase<DerivedQ>& q,
                                                                    const Eigen::MatrixBase<DerivedY>& y, int j) {
  using Scalar = typename DerivedY::Scalar;
  if (q.rows() != y.rows()) throw Error("weighted_observation: responsibility rows do not match pixel count");
  const Scalar n = q.col(j).sum();
  Vec<Scalar> ybar = (y.transpose() * q.col(j)) / std::max(n, Scalar(kWeightFloor));
  if (n == Scalar(0)) ybar.setZero();
  return {std::move(ybar), n};
}

/// Observation evidence about the states in information form: the log
/// likelihood contributes -x_t^T J x_t / 2 + h_t^T x_t at every t.
template <typename Scalar>
struct ObservationInfo {
  Mat<Scalar> J;  ///< N x N, shared by all t
  Mat<Scalar> h;  ///< N x T
};

/// Evidence from the pseudo-observation with effective precision N_tilde * E[r].
template <typename Scalar>
ObservationInfo<Scalar> observation_info(const ExpectedLds<Scalar>& p, const WeightedObservation<Scalar>& w) {
  const int N = p.N(), T = w.T();
  ObservationInfo<Scalar> info{Mat<Scalar>::Zero(N, N), Mat<Scalar>::Zero(N, T)};
  if (w.N_tilde <= Scalar(0)) return info;
  info.J = w.N_tilde * p.r * p.C_second_moment;
  for (int t = 0; t < T; ++t) info.h.col(t) = w.N_tilde * p.C_bar * (p.r * w.y_bar(t) - p.r_mu);
  return info;
}

/// Gaussian message in information form: density proportional to
/// exp(-x^T precision x / 2 + shift^T x).
template <typename Scalar>
struct InfoGaussian {
  Mat<Scalar> precision;
  Vec<Scalar> shift;

  Vec<Scalar> mean() const {
    if (precision.rows() == 0) return Vec<Scalar>(0);
    return spd_factor(precision, "message precision").solve(shift);
  }
};

template <typename Scalar>
struct SmootherStats {
  Mat<Scalar> mean;                  ///< N x T, column t is E[x_t]
  std::vector<Mat<Scalar>> second;   ///< E[x_t x_t^T], T entries
  std::vector<Mat<Scalar>> cross;    ///< cross[t - 1] = E[x_t x_{t-1}^T], T - 1 entries
  Scalar log_det_precision = Scalar(0);  ///< ln |joint precision of x_{1:T}|

  int T() const noexcept { return static_cast<int>(mean.cols()); }
  int N() const noexcept { return static_cast<int>(mean.rows()); }
  Mat<Scalar> covariance(int t) const { return second[static_cast<std::size_t>(t)] - mean.col(t) * mean.col(t).transpose(); }
};

/// Filtered messages: message t carries the prior and observations 1..t.
template <typename Scalar>
std::vector<InfoGaussian<Scalar>> forward_pass(const ExpectedLds<Scalar>& p, const ObservationInfo<Scalar>& obs) {
  const int T = static_cast<int>(obs.h.cols());
  if (T < 1) throw Error("forward_pass: need at least one frame");
  const Mat<Scalar> QA = p.Q * p.A;
  std::vector<InfoGaussian<Scalar>> msg(static_cast<std::size_t>(T));
  msg[0] = {symmetrized(p.S + obs.J), p.S_delta + obs.h.col(0)};
  for (int t = 1; t < T; ++t) {
    const auto& prev = msg[static_cast<std::size_t>(t - 1)];
    const auto llt = spd_factor<Scalar>(prev.precision + p.AtQA, "forward prediction");
    const Mat<Scalar> K = QA * llt.solve(Mat<Scalar>::Identity(p.N(), p.N()));
    msg[static_cast<std::size_t>(t)] = {symmetrized(p.Q - K * QA.transpose() + obs.J),
                                        K * prev.shift + obs.h.col(t)};
  }
  return msg;
}

/// Backward messages: message t carries observations t+1..T; the last is flat.
template <typename Scalar>
std::vector<InfoGaussian<Scalar>> backward_pass(const ExpectedLds<Scalar>& p, const ObservationInfo<Scalar>& obs) {
  const int T = static_cast<int>(obs.h.cols());
  const int N = p.N();
  if (T < 1) throw Error("backward_pass: need at least one frame");
  const Mat<Scalar> QA = p.Q * p.A;
  std::vector<InfoGaussian<Scalar>> msg(static_cast<std::size_t>(T));
  msg[static_cast<std::size_t>(T - 1)] = {Mat<Scalar>::Zero(N, N), Vec<Scalar>::Zero(N)};
  for (int t = T - 1; t >= 1; --t) {
    const auto& next = msg[static_cast<std::size_t>(t)];
    const auto llt = spd_factor<Scalar>(p.Q + obs.J + next.precision, "backward update");
    const Mat<Scalar> G = QA.transpose() * llt.solve(Mat<Scalar>::Identity(N, N));
    msg[static_cast<std::size_t>(t - 1)] = {symmetrized(p.AtQA - G * QA), G * (next.shift + obs.h.col(t))};
  }
  return msg;
}

/// Combines the two message sweeps into marginal and lag-one moments.
template <typename Scalar>
SmootherStats<Scalar> smoother_stats(const std::vector<InfoGaussian<Scalar>>& fwd,
                                     const std::vector<InfoGaussian<Scalar>>& bwd, const ExpectedLds<Scalar>& p,
                                     const ObservationInfo<Scalar>& obs) {
  const int T = static_cast<int>(fwd.size());
  const int N = p.N();
  if (static_cast<int>(bwd.size()) != T) throw Error("smoother_stats: message counts differ");
  const Mat<Scalar> QA = p.Q * p.A;
  SmootherStats<Scalar> st;
  st.mean.resize(N, T);
  st.second.resize(static_cast<std::size_t>(T));
  st.cross.resize(static_cast<std::size_t>(T > 0 ? T - 1 : 0));
  for (int t = 0; t < T; ++t) {
    const auto& f = fwd[static_cast<std::size_t>(t)];
    const auto& b = bwd[static_cast<std::size_t>(t)];
    const Mat<Scalar> cov = spd_inverse<Scalar>(f.precision + b.precision, "smoothed marginal");
    st.mean.col(t) = cov * (f.shift + b.shift);
    st.second[static_cast<std::size_t>(t)] = symmetrized(cov + st.mean.col(t) * st.mean.col(t).transpose());
  }
  for (int t = 0; t + 1 < T; ++t) {
    const auto& f = fwd[static_cast<std::size_t>(t)];
    const auto& b = bwd[static_cast<std::size_t>(t + 1)];
    Mat<Scalar> pair(2 * N, 2 * N);
    pair.topLeftCorner(N, N) = f.precision + p.AtQA;
    pair.topRightCorner(N, N) = -QA.transpose();
    pair.bottomLeftCorner(N, N) = -QA;
    pair.bottomRightCorner(N, N) = p.Q + obs.J + b.precision;
    const Mat<Scalar> cov = spd_inverse<Scalar>(pair, "smoothed pair");
    st.cross[static_cast<std::size_t>(t)] =
        cov.bottomLeftCorner(N, N) + st.mean.col(t + 1) * st.mean.col(t).transpose();
  }
  // Block LDL of the joint precision: the pivots are F_t + E[A^T Q A] for t < T and F_T.
  Scalar log_det(0);
  for (int t = 0; t < T; ++t) {
    const auto& f = fwd[static_cast<std::size_t>(t)];
    log_det += t + 1 < T ? log_det_spd<Scalar>(f.precision + p.AtQA, "joint precision pivot")
                         : log_det_spd<Scalar>(f.precision, "joint precision pivot");
  }
  st.log_det_precision = log_det;
  return st;
}

template <typename Scalar>
SmootherStats<Scalar> run_smoother(const ExpectedLds<Scalar>& p, const ObservationInfo<Scalar>& obs) {
  return smoother_stats(forward_pass(p, obs), backward_pass(p, obs), p, obs);
}

template <typename Scalar>
SmootherStats<Scalar> run_smoother(const ExpectedLds<Scalar>& p, const WeightedObservation<Scalar>& w) {
  return run_smoother(p, observation_info(p, w));
}

inline constexpr int kOracleMaxDim = 64;

/// Block-tridiagonal joint precision of x_{1:T} and its linear term.
template <typename Scalar>
std::pair<Mat<Scalar>, Vec<Scalar>> joint_information(const ExpectedLds<Scalar>& p, const ObservationInfo<Scalar>& obs) {
  const int N = p.N(), T = static_cast<int>(obs.h.cols());
  if (N * T > kOracleMaxDim) throw Error("joint_information: N*T exceeds " + std::to_string(kOracleMaxDim));
  const Mat<Scalar> QA = p.Q * p.A;
  Mat<Scalar> P = Mat<Scalar>::Zero(N * T, N * T);
  Vec<Scalar> h(N * T);
  for (int t = 0; t < T; ++t) {
    Mat<Scalar> D = obs.J;
    D += t == 0 ? p.S : p.Q;
    if (t + 1 < T) D += p.AtQA;
    P.block(t * N, t * N, N, N) = D;
    h.segment(t * N, N) = obs.h.col(t);
    if (t > 0) {
      P.block(t * N, (t - 1) * N, N, N) = -QA;
      P.block((t - 1) * N, t * N, N, N) = -QA.transpose();
    }
  }
  h.head(N) += p.S_delta;
  return {P, h};
}

/// Dense reference: inverts the full joint precision once.
template <typename Scalar>
SmootherStats<Scalar> exact_smoother_oracle(const ExpectedLds<Scalar>& p, const ObservationInfo<Scalar>& obs) {
  const int N = p.N(), T = static_cast<int>(obs.h.cols());
  const auto [P, h] = joint_information(p, obs);
  const Eigen::FullPivLU<Mat<Scalar>> lu(P);
  if (!lu.isInvertible()) throw NumericError("exact_smoother_oracle: singular joint precision");
  const Mat<Scalar> cov = lu.inverse();
  const Vec<Scalar> m = cov * h;
  SmootherStats<Scalar> st;
  st.mean = Eigen::Map<const Mat<Scalar>>(m.data(), N, T);
  for (int t = 0; t < T; ++t)
    st.second.push_back(cov.block(t * N, t * N, N, N) + m.segment(t * N, N) * m.segment(t * N, N).transpose());
  for (int t = 1; t < T; ++t)
    st.cross.push_back(cov.block(t * N, (t - 1) * N, N, N) + m.segment(t * N, N) * m.segment((t - 1) * N, N).transpose());
  st.log_det_precision = std::log(std::abs(lu.determinant()));
  return st;
}

template <typename Scalar>
SmootherStats<Scalar> exact_smoother_oracle(const ExpectedLds<Scalar>& p, const WeightedObservation<Scalar>& w) {
  return exact_smoother_oracle(p, observation_info(p, w));
}

}  // namespace igdtm
