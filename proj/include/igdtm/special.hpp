#pragma once

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <numbers>

namespace igdtm {

template <typename Scalar>
Scalar digamma(Scalar x) {
  return boost::math::digamma(x);
}

/// Multivariate digamma: sum_{n=1}^{dim} psi(a + (1 - n) / 2).
template <typename Scalar>
Scalar mv_digamma(Scalar a, int dim) {
  Scalar s = 0;
  for (int n = 1; n <= dim; ++n) s += digamma(a + Scalar(1 - n) / Scalar(2));
  return s;
}

/// Log of the multivariate gamma function Gamma_dim(a).
template <typename Scalar>
Scalar mv_lgamma(Scalar a, int dim) {
  Scalar s = Scalar(dim) * Scalar(dim - 1) / Scalar(4) * std::log(std::numbers::pi_v<Scalar>);
  for (int n = 1; n <= dim; ++n) s += std::lgamma(a + Scalar(1 - n) / Scalar(2));
  return s;
}

template <typename Scalar>
Scalar log_beta(Scalar a, Scalar b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace igdtm
