#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "igdtm/error.hpp"
#include "igdtm/mrf.hpp"

using namespace igdtm;

namespace {

LabelField random_field(std::mt19937_64& rng, int rows, int cols, int K) {
  std::uniform_int_distribution<int> lab(0, K - 1);
  LabelField f{rows, cols, K, std::vector<int>(static_cast<std::size_t>(rows * cols))};
  for (int& l : f.labels) l = lab(rng);
  return f;
}

}  // namespace

TEST_CASE("neighborhood sizes") {
  CHECK(neighborhood(12, 5, 5).size() == 8u);
  CHECK(neighborhood(0, 5, 5).size() == 3u);
  CHECK(neighborhood(2, 5, 5).size() == 5u);
  CHECK(neighborhood(0, 1, 1).empty());
  CHECK_THROWS_AS(neighborhood(25, 5, 5), Error);
  CHECK_THROWS_AS(neighborhood(-1, 5, 5), Error);
}

TEST_CASE("neighborhood matches exhaustive enumeration on a 3x4 grid") {
  const int rows = 3, cols = 4;
  for (int i = 0; i < rows * cols; ++i) {
    std::vector<int> expected;
    for (int k = 0; k < rows * cols; ++k) {
      if (k == i) continue;
      if (std::abs(k / cols - i / cols) <= 1 && std::abs(k % cols - i % cols) <= 1) expected.push_back(k);
    }
    CHECK(neighborhood(i, rows, cols) == expected);
  }
}

TEST_CASE("no coupling gives the uniform prior") {
  std::mt19937_64 rng(1);
  const LabelField f = random_field(rng, 4, 4, 3);
  const MrfConfig<double> cfg{0.0, -1.0, 1.0, {0.0, 0.0, 0.0}};
  for (int i = 0; i < 16; ++i) {
    const Eigen::VectorXd p = pointwise_prior(f, i, cfg, 3);
    CHECK((p.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("unanimous neighbors with unit coupling") {
  LabelField f{3, 3, 2, std::vector<int>(9, 1)};
  f.labels[4] = 0;
  const MrfConfig<double> cfg{1.0, -1.0, 1.0, {0.0, 0.0}};
  const Eigen::VectorXd p = pointwise_prior(f, 4, cfg, 2);
  const double expected = std::exp(8.0) / (std::exp(8.0) + std::exp(-8.0));
  CHECK(std::abs(p(1) - expected) < 1e-6);
  CHECK(std::abs(p(1) - 1.0) < 1e-6);
}

TEST_CASE("shift invariance in the singletons") {
  std::mt19937_64 rng(2);
  const LabelField f = random_field(rng, 5, 5, 4);
  const MrfConfig<double> a{0.8, -1.0, 1.0, {0.1, -0.3, 0.7, 0.0}};
  MrfConfig<double> b = a;
  for (double& s : b.sigma_singletons) s += 12.5;
  for (int i = 0; i < 25; ++i)
    CHECK((pointwise_prior(f, i, a, 4) - pointwise_prior(f, i, b, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("output is a probability vector and favors the majority") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    const LabelField f = random_field(rng, 4, 5, 3);
    const MrfConfig<double> cfg{std::abs(u(rng)), u(rng), u(rng), {u(rng), u(rng), u(rng)}};
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd p = pointwise_prior(f, i, cfg, 3);
      CHECK((p.array() > 0.0).all());
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    }
  }
  // Majority label with gamma1 < gamma2, beta > 0 and equal singletons.
  for (int rep = 0; rep < 50; ++rep) {
    const LabelField f = random_field(rng, 5, 5, 3);
    const MrfConfig<double> cfg{0.5, -1.0, 1.0, {0.0, 0.0, 0.0}};
    for (int i = 0; i < 25; ++i) {
      std::vector<int> counts(3, 0);
      for (int nb : neighborhood(i, 5, 5)) ++counts[static_cast<std::size_t>(f.labels[static_cast<std::size_t>(nb)])];
      const auto top = std::max_element(counts.begin(), counts.end());
      if (std::count(counts.begin(), counts.end(), *top) > 1) continue;
      CHECK(pointwise_prior(f, i, cfg, 3)(top - counts.begin()) > 1.0 / 3.0);
    }
  }
}

TEST_CASE("label permutation equivariance") {
  std::mt19937_64 rng(4);
  const int K = 4;
  const LabelField f = random_field(rng, 6, 5, K);
  const MrfConfig<double> cfg{0.9, -0.7, 1.3, {0.2, -0.5, 0.0, 1.1}};
  std::vector<int> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  LabelField fp = f;
  for (int& l : fp.labels) l = perm[static_cast<std::size_t>(l)];
  MrfConfig<double> cp = cfg;
  for (int j = 0; j < K; ++j)
    cp.sigma_singletons[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] =
        cfg.sigma_singletons[static_cast<std::size_t>(j)];
  for (int i = 0; i < f.size(); ++i) {
    const Eigen::VectorXd p = pointwise_prior(f, i, cfg, K);
    const Eigen::VectorXd q = pointwise_prior(fp, i, cp, K);
    for (int j = 0; j < K; ++j) CHECK(std::abs(p(j) - q(perm[static_cast<std::size_t>(j)])) < 1e-14);
  }
}

TEST_CASE("singleton count must match K") {
  const LabelField f{2, 2, 2, {0, 1, 0, 1}};
  CHECK_THROWS_AS(pointwise_prior(f, 0, MrfConfig<double>{0.8, -1.0, 1.0, {0.0}}, 2), Error);
}
