#include <doctest.h>

#include <cmath>

#include "igdtm/error.hpp"
#include "igdtm/linalg.hpp"
#include "igdtm/synth.hpp"

using namespace igdtm;

namespace {

LdsParams scalar_lds(double a, double q, double mu, double r, int L) {
  LdsParams p;
  p.A = Eigen::MatrixXd::Constant(1, 1, a);
  p.C = Eigen::MatrixXd::Constant(L, 1, 0.05);
  p.Q = Eigen::MatrixXd::Constant(1, 1, q);
  p.mu = mu;
  p.r = r;
  p.delta = Eigen::VectorXd::Zero(1);
  p.S = Eigen::MatrixXd::Constant(1, 1, q);
  return p;
}

}  // namespace

TEST_CASE("zero transition variance gives the zero matrix") {
  Rng rng(1);
  ModelConfig cfg = synth_preset(3);
  cfg.sigma_A = 0.0;
  const LdsParams p = sample_lds_params(rng, 3, 5, cfg);
  CHECK(p.A.isZero(0));
}

TEST_CASE("sampled transitions are stable and precisions SPD") {
  Rng rng(2);
  const ModelConfig cfg = synth_preset(4);
  for (int k = 0; k < 200; ++k) {
    const LdsParams p = sample_lds_params(rng, 4, 6, cfg);
    CHECK(spectral_radius<double>(p.A) <= 0.9 + 1e-9);
    CHECK(is_spd<double>(p.Q));
    CHECK(is_spd<double>(p.S));
    CHECK(p.r > 0.0);
    CHECK(p.C.rows() == 6);
  }
}

TEST_CASE("raw transition entries follow N(0, sigma_A)") {
  Rng rng(3);
  for (double sigma_A : {1.0, 0.25}) {
    double sum = 0.0, sq = 0.0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) {
      const double a = sample_transition_raw(rng, 2, sigma_A)(0, 0);
      sum += a;
      sq += a * a;
    }
    CHECK(std::abs(sum / n) < 3.0 * std::sqrt(sigma_A) / 100.0);
    CHECK(sq / n == doctest::Approx(sigma_A).epsilon(0.05));
  }
}

TEST_CASE("Wishart draws have mean w Psi") {
  Rng rng(4);
  Eigen::MatrixXd Psi(2, 2);
  Psi << 0.5, 0.1, 0.1, 0.3;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
  const int n = 20000;
  for (int k = 0; k < n; ++k) acc += sample_wishart(rng, 5.0, Psi);
  CHECK(((acc / n) - 5.0 * Psi).cwiseAbs().maxCoeff() < 0.05);
  CHECK_THROWS_AS(sample_wishart(rng, 1.0, Psi), Error);
}

TEST_CASE("noise-free identity dynamics give constant traces") {
  Rng rng(5);
  LdsParams p = sample_lds_params(rng, 3, 12, synth_preset(3));
  p.A = Eigen::MatrixXd::Identity(3, 3);
  p.mu = 0.5;
  const LabelField field = stripes_layout(3, 4, 1);
  const GroundTruth gt = generate_video({p}, field, 20, rng, {false, false});
  REQUIRE(gt.clip_count == 0);
  for (int i = 0; i < 12; ++i) {
    const Eigen::RowVectorXd trace = gt.tensor.pixels().row(i);
    CHECK((trace.array() - trace(0)).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("lag-one autocorrelation of a long chain recovers A") {
  Rng rng(6);
  for (double a : {0.3, 0.8, -0.5}) {
    const LdsParams p = scalar_lds(a, 100.0, 0.5, 1e4, 1);
    const GroundTruth gt = generate_video({p}, stripes_layout(1, 1, 1), 5000, rng, {true, false});
    const Eigen::VectorXd x = gt.states[0].row(0).transpose();
    const double m = x.mean();
    const Eigen::VectorXd c = x.array() - m;
    const double rho = c.head(4999).dot(c.tail(4999)) / c.squaredNorm();
    CHECK(std::abs(rho - a) < 0.02);
  }
}

TEST_CASE("per-pixel sample means converge to mu") {
  Rng rng(7);
  const double a = 0.6, q = 100.0, r = 400.0, mu = 0.4;
  const LdsParams p = scalar_lds(a, q, mu, r, 4);
  const GroundTruth gt = generate_video({p}, stripes_layout(2, 2, 1), 5000, rng);
  REQUIRE(gt.clip_count == 0);
  const double c = 0.05;
  const double long_run_var = c * c / q / ((1 - a) * (1 - a)) + 1.0 / r;
  const double se = std::sqrt(long_run_var / 5000.0);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(gt.tensor.pixels().row(i).mean() - mu) < 5.0 * se);
}

TEST_CASE("same seed gives bit-identical ground truth") {
  const SceneSpec spec{3, "quadrants", 12, 10, 8, 2, 99};
  const GroundTruth a = synthesize_scene(spec);
  const GroundTruth b = synthesize_scene(spec);
  CHECK(a.tensor == b.tensor);
  CHECK(a.field == b.field);
  CHECK(a.clip_count == b.clip_count);
  for (std::size_t j = 0; j < a.states.size(); ++j) CHECK(a.states[j] == b.states[j]);
  SceneSpec other = spec;
  other.seed = 100;
  CHECK_FALSE(synthesize_scene(other).tensor == a.tensor);
}

TEST_CASE("layouts partition the grid") {
  for (int k = 1; k <= 5; ++k) {
    const LabelField f = stripes_layout(7, 11, k);
    CHECK_NOTHROW(f.validate());
    CHECK(f.labels.size() == 77u);
    std::vector<int> seen(static_cast<std::size_t>(k), 0);
    for (int l : f.labels) ++seen[static_cast<std::size_t>(l)];
    for (int s : seen) CHECK(s > 0);
  }
  const LabelField q = quadrants_layout(40, 40, 4);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c) CHECK(q.at(r, c) == 2 * (r / 20) + c / 20);
  const LabelField q3 = quadrants_layout(48, 48, 3);
  CHECK(q3.at(0, 0) == 0);
  CHECK(q3.at(0, 47) == 1);
  CHECK(q3.at(47, 0) == 2);
  CHECK(q3.at(47, 47) == 2);
  CHECK(stripes_layout(4, 4, 1).labels == std::vector<int>(16, 0));
}

TEST_CASE("every label indexes a component and dimensions agree") {
  const GroundTruth gt = synthesize_scene({3, "stripes", 6, 9, 5, 2, 4});
  CHECK(gt.components.size() == 3u);
  CHECK(gt.tensor.rows() == gt.field.rows);
  CHECK(gt.tensor.cols() == gt.field.cols);
  CHECK(gt.tensor.frames() == 5);
  for (int l : gt.field.labels) CHECK((l >= 0 && l < 3));
}

TEST_CASE("generation errors") {
  Rng rng(8);
  const LdsParams p = scalar_lds(0.5, 1.0, 0.5, 100.0, 3);
  CHECK_THROWS_AS(generate_video({p}, stripes_layout(2, 2, 1), 5, rng), Error);
  CHECK_THROWS_AS(generate_video({p}, stripes_layout(1, 3, 1), 0, rng), Error);
  CHECK_THROWS_AS(generate_video({p}, stripes_layout(1, 3, 2), 5, rng), Error);
  CHECK_THROWS_AS(synthesize_scene({2, "spiral", 4, 4, 3, 1, 1}), Error);
}
