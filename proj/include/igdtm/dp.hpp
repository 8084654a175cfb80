#pragma once

#include <cmath>
#include <string>

#include "igdtm/error.hpp"
#include "igdtm/linalg.hpp"
#include "igdtm/special.hpp"

namespace igdtm {

/// Beta(beta1[j], beta2[j]) posteriors over the K stick proportions.
template <typename Scalar>
struct StickState {
  Vec<Scalar> beta1;
  Vec<Scalar> beta2;

  int K() const noexcept { return static_cast<int>(beta1.size()); }
};

/// Gamma(shape, rate) posterior over the concentration alpha.
template <typename Scalar>
struct AlphaState {
  Scalar eta1_hat;
  Scalar eta2_hat;

  Scalar mean() const { return eta1_hat / eta2_hat; }
  Scalar expected_log() const { return digamma(eta1_hat) - std::log(eta2_hat); }
};

template <typename Scalar>
struct ExpectedLogStick {
  Vec<Scalar> ln_nu;
  Vec<Scalar> ln_1m_nu;
};

/// pi_j = nu_j * prod_{l<j} (1 - nu_l).
template <typename Derived>
Vec<typename Derived::Scalar> stick_breaking_weights(const Eigen::MatrixBase<Derived>& nu) {
  using Scalar = typename Derived::Scalar;
  Vec<Scalar> pi(nu.size());
  Scalar remaining(1);
  for (Eigen::Index j = 0; j < nu.size(); ++j) {
    const Scalar v = nu(j);
    if (!(v >= Scalar(0) && v <= Scalar(1)))
      throw Error("stick_breaking_weights: nu[" + std::to_string(j) + "] outside [0, 1]");
    pi(j) = v * remaining;
    remaining *= Scalar(1) - v;
  }
  return pi;
}

/// beta1_j = 1 + sum_i q_ij, beta2_j = E[alpha] + sum_i sum_{k>j} q_ik.
/// `q` is L x K; an empty q gives the prior Beta(1, E[alpha]).
template <typename Derived>
StickState<typename Derived::Scalar> update_nu(const Eigen::MatrixBase<Derived>& q, typename Derived::Scalar E_alpha) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index K = q.cols();
  const Vec<Scalar> counts = q.colwise().sum().transpose();
  StickState<Scalar> s{Vec<Scalar>(K), Vec<Scalar>(K)};
  Scalar tail(0);
  for (Eigen::Index j = K - 1; j >= 0; --j) {
    s.beta1(j) = Scalar(1) + counts(j);
    s.beta2(j) = E_alpha + tail;
    tail += counts(j);
  }
  return s;
}

template <typename Scalar>
ExpectedLogStick<Scalar> expected_log_stick(const StickState<Scalar>& s) {
  ExpectedLogStick<Scalar> e{Vec<Scalar>(s.K()), Vec<Scalar>(s.K())};
  for (int j = 0; j < s.K(); ++j) {
    const Scalar total = digamma(s.beta1(j) + s.beta2(j));
    e.ln_nu(j) = digamma(s.beta1(j)) - total;
    e.ln_1m_nu(j) = digamma(s.beta2(j)) - total;
  }
  return e;
}

/// Each of the K - 1 free sticks contributes ln(alpha) + (alpha - 1) E[ln(1 - nu_j)]
/// to the log conditional of alpha, hence the shape gains K - 1.
template <typename Scalar>
AlphaState<Scalar> update_alpha(const StickState<Scalar>& s, Scalar eta1, Scalar eta2) {
  const int K = s.K();
  const auto e = expected_log_stick(s);
  Scalar rate = eta2;
  for (int j = 0; j + 1 < K; ++j) rate -= e.ln_1m_nu(j);
  if (!(rate > Scalar(0))) throw NumericError("update_alpha: non-positive rate");
  return {eta1 + Scalar(K - 1), rate};
}

/// E[ln pi_j] = E[ln nu_j] + sum_{l<j} E[ln(1 - nu_l)]; the last stick is fixed
/// at nu_K = 1 so its own term vanishes.
template <typename Scalar>
Vec<Scalar> expected_log_mixture_weight(const StickState<Scalar>& s) {
  const int K = s.K();
  const auto e = expected_log_stick(s);
  Vec<Scalar> out(K);
  Scalar acc(0);
  for (int j = 0; j < K; ++j) {
    out(j) = acc + (j + 1 < K ? e.ln_nu(j) : Scalar(0));
    acc += e.ln_1m_nu(j);
  }
  return out;
}

}  // namespace igdtm
