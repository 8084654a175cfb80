#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "igdtm/error.hpp"

namespace igdtm {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kJitter = 1e-9;

template <typename Derived>
Mat<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

/// Cholesky of a symmetric positive-definite matrix. A failed factorization is
/// retried once with kJitter added to the diagonal; a second failure throws.
template <typename Scalar>
Eigen::LLT<Mat<Scalar>> spd_factor(const Mat<Scalar>& m, const char* what) {
  Eigen::LLT<Mat<Scalar>> llt(symmetrized(m));
  if (llt.info() == Eigen::Success) return llt;
  Mat<Scalar> jittered = symmetrized(m);
  jittered.diagonal().array() += Scalar(kJitter);
  llt.compute(jittered);
  if (llt.info() != Eigen::Success)
    throw NumericError(std::string("matrix is not positive definite: ") + what);
  return llt;
}

template <typename Scalar>
Mat<Scalar> spd_inverse(const Mat<Scalar>& m, const char* what) {
  const Eigen::Index n = m.rows();
  if (n == 0) return Mat<Scalar>(0, 0);
  return symmetrized(spd_factor(m, what).solve(Mat<Scalar>::Identity(n, n)));
}

template <typename Scalar>
Scalar log_det_spd(const Mat<Scalar>& m, const char* what) {
  if (m.rows() == 0) return Scalar(0);
  const auto llt = spd_factor(m, what);
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

template <typename Scalar>
Scalar min_eigenvalue(const Mat<Scalar>& m) {
  if (m.rows() == 0) return Scalar(0);
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <typename Scalar>
bool is_spd(const Mat<Scalar>& m) {
  if (m.rows() != m.cols()) return false;
  if (m.rows() == 0) return true;
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-8) * (Scalar(1) + m.cwiseAbs().maxCoeff()))
    return false;
  return Eigen::LLT<Mat<Scalar>>(m).info() == Eigen::Success;
}

template <typename Scalar>
Scalar spectral_radius(const Mat<Scalar>& m) {
  if (m.rows() == 0) return Scalar(0);
  Eigen::EigenSolver<Mat<Scalar>> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace igdtm
