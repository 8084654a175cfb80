#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "igdtm/error.hpp"
#include "igdtm/linalg.hpp"
#include "igdtm/rtss.hpp"
#include "igdtm/special.hpp"

namespace igdtm {

/// Wishart(w, Psi) over an N x N precision; E[X] = w Psi.
template <typename Scalar>
struct WishartPosterior {
  Scalar w;
  Mat<Scalar> Psi;

  int N() const noexcept { return static_cast<int>(Psi.rows()); }
  Mat<Scalar> mean() const { return w * Psi; }
  Scalar expected_log_det() const {
    return mv_digamma(w / Scalar(2), N()) + Scalar(N()) * std::numbers::ln2_v<Scalar> + log_det_spd(Psi, "Wishart scale");
  }
};

/// r ~ Gamma(w/2, rate 1/(2 Psi)), mu | r ~ N(m, (lambda r)^-1).
template <typename Scalar>
struct NormalGammaPosterior {
  Scalar m;
  Scalar lambda;
  Scalar w;
  Scalar Psi;

  Scalar E_r() const { return w * Psi; }
  Scalar E_r_mu() const { return w * Psi * m; }
  /// E[r mu^2] = 1/lambda + m^2 w Psi.
  Scalar E_r_mu2() const { return Scalar(1) / lambda + m * m * w * Psi; }
  Scalar E_ln_r() const { return digamma(w / Scalar(2)) + std::numbers::ln2_v<Scalar> + std::log(Psi); }
};

/// S ~ Wishart(w, Psi), delta | S ~ N(m, (lambda S)^-1).
template <typename Scalar>
struct NormalWishartPosterior {
  Vec<Scalar> m;
  Scalar lambda;
  Scalar w;
  Mat<Scalar> Psi;

  int N() const noexcept { return static_cast<int>(Psi.rows()); }
  WishartPosterior<Scalar> precision() const { return {w, Psi}; }
  Mat<Scalar> E_S() const { return w * Psi; }
  Vec<Scalar> E_S_delta() const { return w * Psi * m; }
  /// E[delta^T S delta] = N/lambda + m^T w Psi m.
  Scalar E_delta_S_delta() const { return Scalar(N()) / lambda + m.dot(w * Psi * m); }
};

/// Joint Gaussian over the rows of an N x N matrix; `cov` is indexed by the
/// row-stacked vectorization, so block (n, n') is Cov(a_n, a_n').
template <typename Scalar>
struct MatrixRowsPosterior {
  Mat<Scalar> mean;
  Mat<Scalar> cov;

  int N() const noexcept { return static_cast<int>(mean.rows()); }
  Mat<Scalar> row_cov(int n) const { return cov.block(n * N(), n * N(), N(), N()); }

  /// E[A P A^T] for a fixed symmetric P.
  Mat<Scalar> expected_APAt(const Mat<Scalar>& P) const {
    const int n_ = N();
    Mat<Scalar> out = mean * P * mean.transpose();
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b) out(a, b) += (P * cov.block(b * n_, a * n_, n_, n_)).trace();
    return out;
  }

  /// E[A^T Q A] = sum_{n,n'} Q_{nn'} E[a_n a_n'^T].
  Mat<Scalar> expected_AtQA(const Mat<Scalar>& Q) const {
    const int n_ = N();
    Mat<Scalar> out = mean.transpose() * Q * mean;
    for (int a = 0; a < n_; ++a)
      for (int b = 0; b < n_; ++b) out += Q(a, b) * cov.block(a * n_, b * n_, n_, n_);
    return symmetrized(out);
  }
};

/// Gaussian over one observation row C_i (as an N-vector).
template <typename Scalar>
struct RowPosterior {
  Vec<Scalar> mean;
  Mat<Scalar> cov;

  Mat<Scalar> second_moment() const { return cov + mean * mean.transpose(); }
};

// Wishart update with T - 1 transition residuals.
template <typename Scalar>
WishartPosterior<Scalar> update_wishart(const WishartPosterior<Scalar>& prior, Scalar count, const Mat<Scalar>& scatter) {
  if (scatter.isZero(0)) return {prior.w + count, prior.Psi};
  const Mat<Scalar> prior_inv = spd_inverse(prior.Psi, "Wishart prior scale");
  return {prior.w + count, spd_inverse<Scalar>(prior_inv + scatter, "Wishart posterior scale")};
}

/// Expected transition scatter sum_{t>=2} E[(x_t - A x_{t-1})(x_t - A x_{t-1})^T].
template <typename Scalar>
Mat<Scalar> transition_scatter(const SmootherStats<Scalar>& st, const MatrixRowsPosterior<Scalar>& A) {
  const int N = st.N();
  Mat<Scalar> self = Mat<Scalar>::Zero(N, N), lagged = Mat<Scalar>::Zero(N, N), cross = Mat<Scalar>::Zero(N, N);
  for (int t = 1; t < st.T(); ++t) {
    self += st.second[static_cast<std::size_t>(t)];
    lagged += st.second[static_cast<std::size_t>(t - 1)];
    cross += st.cross[static_cast<std::size_t>(t - 1)];
  }
  const Mat<Scalar> AC = A.mean * cross.transpose();
  return symmetrized(self - AC - AC.transpose() + A.expected_APAt(lagged));
}

template <typename Scalar>
WishartPosterior<Scalar> update_Q(const SmootherStats<Scalar>& st, const MatrixRowsPosterior<Scalar>& A,
                                  const WishartPosterior<Scalar>& prior) {
  if (st.T() < 2) return prior;
  return update_wishart(prior, Scalar(st.T() - 1), transition_scatter(st, A));
}

/// Normal-Gamma update from n weighted samples with weighted first and second
/// moments s1 = sum q e, s2 = sum q e^2.
template <typename Scalar>
NormalGammaPosterior<Scalar> update_normal_gamma(const NormalGammaPosterior<Scalar>& prior, Scalar n, Scalar s1, Scalar s2) {
  if (n == Scalar(0)) return prior;
  const Scalar lambda = prior.lambda + n;
  const Scalar m = (prior.lambda * prior.m + s1) / lambda;
  const Scalar inv = Scalar(1) / prior.Psi + s2 + prior.lambda * prior.m * prior.m - lambda * m * m;
  if (!(inv > Scalar(0))) throw NumericError("update_mu_r: non-positive Gamma scale");
  return {m, lambda, prior.w + n, Scalar(1) / inv};
}

/// Residual moments of pixel i, e_t = y_t - C_i x_t, under q(C_i) q(x).
template <typename Scalar>
std::pair<Scalar, Scalar> residual_moments(const Vec<Scalar>& y, const SmootherStats<Scalar>& st, const RowPosterior<Scalar>& C) {
  const Mat<Scalar> CC = C.second_moment();
  Scalar s1(0), s2(0);
  for (int t = 0; t < st.T(); ++t) {
    const Scalar pred = C.mean.dot(st.mean.col(t));
    s1 += y(t) - pred;
    s2 += y(t) * y(t) - Scalar(2) * y(t) * pred + (CC.cwiseProduct(st.second[static_cast<std::size_t>(t)])).sum();
  }
  return {s1, s2};
}

/// `q` holds q(z_i = j) per pixel, `y` is L x T, C holds the L row posteriors.
template <typename Scalar>
NormalGammaPosterior<Scalar> update_mu_r(const Vec<Scalar>& q, const Mat<Scalar>& y, const SmootherStats<Scalar>& st,
                                         const std::vector<RowPosterior<Scalar>>& C,
                                         const NormalGammaPosterior<Scalar>& prior) {
  Scalar n(0), s1(0), s2(0);
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (q(i) == Scalar(0)) continue;
    const auto [e1, e2] = residual_moments<Scalar>(y.row(i).transpose(), st, C[static_cast<std::size_t>(i)]);
    n += q(i) * Scalar(st.T());
    s1 += q(i) * e1;
    s2 += q(i) * e2;
  }
  return update_normal_gamma(prior, n, s1, s2);
}

template <typename Scalar>
NormalWishartPosterior<Scalar> update_normal_wishart(const NormalWishartPosterior<Scalar>& prior, Scalar n,
                                                     const Vec<Scalar>& xbar, const Mat<Scalar>& Delta) {
  if (n == Scalar(0)) return prior;
  const Scalar lambda = prior.lambda + n;
  const Vec<Scalar> m = (prior.lambda * prior.m + n * xbar) / lambda;
  const Vec<Scalar> d = xbar - prior.m;
  const Mat<Scalar> inv =
      spd_inverse(prior.Psi, "initial-state prior scale") + Delta + (prior.lambda * n / lambda) * d * d.transpose();
  return {m, lambda, prior.w + n, spd_inverse<Scalar>(inv, "initial-state posterior scale")};
}

/// Initial-state update from x_1 with weight n: xbar = E[x_1], Delta = n Cov(x_1).
template <typename Scalar>
NormalWishartPosterior<Scalar> update_delta_S(Scalar n, const SmootherStats<Scalar>& st,
                                              const NormalWishartPosterior<Scalar>& prior) {
  if (n == Scalar(0)) return prior;
  return update_normal_wishart<Scalar>(prior, n, st.mean.col(0), n * st.covariance(0));
}

/// Joint posterior over the rows of A given E[Q] and the prior variance
/// sigma_A per entry (infinity gives a flat prior).
template <typename Scalar>
MatrixRowsPosterior<Scalar> update_A(const SmootherStats<Scalar>& st, const Mat<Scalar>& E_Q, Scalar sigma_A) {
  const int N = st.N();
  Mat<Scalar> P = Mat<Scalar>::Zero(N, N), M = Mat<Scalar>::Zero(N, N);
  for (int t = 1; t < st.T(); ++t) {
    P += st.second[static_cast<std::size_t>(t - 1)];
    M += st.cross[static_cast<std::size_t>(t - 1)];
  }
  if (P.isZero(0) && M.isZero(0))
    return {Mat<Scalar>::Zero(N, N), sigma_A * Mat<Scalar>::Identity(N * N, N * N)};
  const Scalar prior_prec = Scalar(1) / sigma_A;
  Mat<Scalar> prec(N * N, N * N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) prec.block(a * N, b * N, N, N) = E_Q(a, b) * P;
  prec.diagonal().array() += prior_prec;
  const Mat<Scalar> QM = E_Q * M;
  Vec<Scalar> rhs(N * N);
  for (int a = 0; a < N; ++a) rhs.segment(a * N, N) = QM.row(a).transpose();
  const auto llt = spd_factor<Scalar>(prec, "transition posterior precision");
  const Vec<Scalar> mu = llt.solve(rhs);
  MatrixRowsPosterior<Scalar> post;
  post.mean = Eigen::Map<const Mat<Scalar>>(mu.data(), N, N).transpose();
  post.cov = symmetrized(llt.solve(Mat<Scalar>::Identity(N * N, N * N)));
  return post;
}

/// Bayesian linear regression for one observation row with evidence weight w.
template <typename Scalar>
RowPosterior<Scalar> update_C(Scalar w, const Vec<Scalar>& y, const SmootherStats<Scalar>& st, Scalar E_r, Scalar E_r_mu,
                              Scalar sigma_C) {
  const int N = st.N();
  if (w == Scalar(0)) return {Vec<Scalar>::Zero(N), sigma_C * Mat<Scalar>::Identity(N, N)};
  Mat<Scalar> prec = Mat<Scalar>::Identity(N, N) / sigma_C;
  Vec<Scalar> rhs = Vec<Scalar>::Zero(N);
  for (int t = 0; t < st.T(); ++t) {
    prec += w * E_r * st.second[static_cast<std::size_t>(t)];
    rhs += w * st.mean.col(t) * (E_r * y(t) - E_r_mu);
  }
  const auto llt = spd_factor<Scalar>(prec, "observation row precision");
  return {llt.solve(rhs), symmetrized(llt.solve(Mat<Scalar>::Identity(N, N)))};
}

/// KL(q(C_i) || N(0, sigma_C I)).
template <typename Scalar>
Scalar row_kl(const RowPosterior<Scalar>& C, Scalar sigma_C) {
  const int N = static_cast<int>(C.mean.size());
  if (N == 0) return Scalar(0);
  return Scalar(0.5) * ((C.cov.trace() + C.mean.squaredNorm()) / sigma_C - Scalar(N) + Scalar(N) * std::log(sigma_C) -
                        log_det_spd(C.cov, "observation row covariance"));
}

}  // namespace igdtm
