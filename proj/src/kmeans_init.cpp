#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "igdtm/error.hpp"
#include "igdtm/vbem.hpp"

namespace igdtm {

namespace {

// k-means++ seeding followed by Lloyd iterations on rows of `x`.
std::vector<int> kmeans(const Eigen::MatrixXd& x, int K, std::uint64_t seed, int iterations) {
  const Eigen::Index n = x.rows();
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centers(K, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2(n);
  for (int k = 1; k < K; ++k) {
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = (centers.topRows(k).rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff();
    const double total = d2.sum();
    if (total <= 0.0) {
      centers.row(k) = x.row(pick(rng));
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    Eigen::Index chosen = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      target -= d2(i);
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.row(k) = x.row(chosen);
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        assign[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int k = 0; k < K; ++k)
      if (counts(k) > 0) centers.row(k) = sums.row(k) / counts(k);
    if (!changed && it > 0) break;
  }
  return assign;
}

}  // namespace

Eigen::MatrixXd kmeans_responsibilities(const Eigen::MatrixXd& y, int K, std::uint64_t seed, int iterations, double eps) {
  const Eigen::Index L = y.rows();
  if (K < 1 || L < 1) throw Error("kmeans_responsibilities: need K >= 1 and at least one pixel");
  Eigen::MatrixXd features(L, 2);
  features.col(0) = y.rowwise().mean();
  features.col(1) = ((y.colwise() - features.col(0)).rowwise().squaredNorm() / static_cast<double>(y.cols())).cwiseSqrt();

  const std::vector<int> assign = kmeans(features, K, seed, iterations);
  std::vector<int> counts(static_cast<std::size_t>(K), 0);
  for (int a : assign) ++counts[static_cast<std::size_t>(a)];
  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)]; });
  std::vector<int> rank(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;

  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(L, K, eps / K);
  for (Eigen::Index i = 0; i < L; ++i) q(i, rank[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])]) += 1.0 - eps;
  return q;
}

}  // namespace igdtm
