#pragma once

#include <string>
#include <vector>

#include "igdtm/error.hpp"
#include "igdtm/linalg.hpp"
#include "igdtm/tensor_io.hpp"

namespace igdtm {

/// Potts prior: energy(j) = singleton_j + beta * sum_{neighbors} (gamma1 if same label else gamma2).
template <typename Scalar>
struct MrfConfig {
  Scalar beta = Scalar(0.8);
  Scalar gamma1 = Scalar(-1);
  Scalar gamma2 = Scalar(1);
  std::vector<Scalar> sigma_singletons;
};

/// The 8-connected spatial neighbors of site i, in row-major order.
inline std::vector<int> neighborhood(int i, int rows, int cols) {
  if (rows <= 0 || cols <= 0 || i < 0 || i >= rows * cols)
    throw Error("neighborhood: site " + std::to_string(i) + " outside the grid");
  const int r = i / cols, c = i % cols;
  std::vector<int> out;
  out.reserve(8);
  for (int dr = -1; dr <= 1; ++dr)
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const int rr = r + dr, cc = c + dc;
      if (rr >= 0 && rr < rows && cc >= 0 && cc < cols) out.push_back(rr * cols + cc);
    }
  return out;
}

/// Softmax of -energy over the K labels, given the neighbors' hard labels.
template <typename Scalar>
Vec<Scalar> pointwise_prior(const LabelField& hard, int i, const MrfConfig<Scalar>& cfg, int K) {
  if (cfg.sigma_singletons.size() != static_cast<std::size_t>(K))
    throw Error("pointwise_prior: need one singleton potential per label");
  Vec<Scalar> same_count = Vec<Scalar>::Zero(K);
  int n = 0;
  for (int nb : neighborhood(i, hard.rows, hard.cols)) {
    const int l = hard.labels[static_cast<std::size_t>(nb)];
    if (l >= 0 && l < K) same_count(l) += Scalar(1);
    ++n;
  }
  Vec<Scalar> neg_energy(K);
  for (int j = 0; j < K; ++j) {
    const Scalar pair = cfg.gamma1 * same_count(j) + cfg.gamma2 * (Scalar(n) - same_count(j));
    neg_energy(j) = -(cfg.sigma_singletons[static_cast<std::size_t>(j)] + cfg.beta * pair);
  }
  const Scalar top = neg_energy.maxCoeff();
  Vec<Scalar> p = (neg_energy.array() - top).exp().matrix();
  return p / p.sum();
}

}  // namespace igdtm
