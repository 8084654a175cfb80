#include "igdtm/synth.hpp"

#include <algorithm>
#include <cmath>

#include "igdtm/error.hpp"
#include "igdtm/linalg.hpp"

namespace igdtm {

namespace {

Eigen::VectorXd standard_normal(Rng& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (int k = 0; k < n; ++k) z(k) = g(rng);
  return z;
}

// Draw from N(mean, precision^-1).
Eigen::VectorXd sample_with_precision(Rng& rng, const Eigen::VectorXd& mean, const Eigen::MatrixXd& precision) {
  const auto llt = spd_factor<double>(precision, "sampling precision");
  // precision = L L^T, so L^-T z has covariance precision^-1.
  return mean + llt.matrixU().solve(standard_normal(rng, static_cast<int>(mean.size())));
}

}  // namespace

Eigen::MatrixXd sample_transition_raw(Rng& rng, int N, double sigma_A) {
  std::normal_distribution<double> g(0.0, 1.0);
  const double sd = std::sqrt(sigma_A);
  Eigen::MatrixXd A(N, N);
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) A(a, b) = sd * g(rng);
  return A;
}

void stabilize(Eigen::MatrixXd& A, double radius) {
  const double rho = spectral_radius<double>(A);
  if (rho > 0.0) A *= radius / rho;
}

Eigen::MatrixXd sample_wishart(Rng& rng, double w, const Eigen::MatrixXd& Psi) {
  const int N = static_cast<int>(Psi.rows());
  if (!(w > N - 1)) throw Error("sample_wishart: degrees of freedom must exceed N - 1");
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N, N);
  for (int a = 0; a < N; ++a) {
    std::chi_squared_distribution<double> chi(w - a);
    B(a, a) = std::sqrt(chi(rng));
    for (int b = 0; b < a; ++b) B(a, b) = g(rng);
  }
  const Eigen::MatrixXd Lb = spd_factor<double>(Psi, "Wishart scale").matrixL() * B;
  return symmetrized(Lb * Lb.transpose());
}

LdsParams sample_lds_params(Rng& rng, int N, int L, const ModelConfig& cfg) {
  if (N < 1 || L < 1) throw Error("sample_lds_params: N and L must be positive");
  LdsParams p;
  p.A = sample_transition_raw(rng, N, cfg.sigma_A);
  stabilize(p.A);
  p.C.resize(L, N);
  std::normal_distribution<double> g(0.0, std::sqrt(cfg.sigma_C));
  for (int i = 0; i < L; ++i)
    for (int n = 0; n < N; ++n) p.C(i, n) = g(rng);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  p.Q = sample_wishart(rng, cfg.w1, cfg.Psi1_scale * I);
  std::gamma_distribution<double> gamma(cfg.w2 / 2.0, 2.0 * cfg.Psi2);
  p.r = gamma(rng);
  std::normal_distribution<double> unit(0.0, 1.0);
  p.mu = cfg.m2 + unit(rng) / std::sqrt(cfg.lambda2 * p.r);
  p.S = sample_wishart(rng, cfg.w3, cfg.Psi3_scale * I);
  p.delta = sample_with_precision(rng, Eigen::VectorXd::Constant(N, cfg.m3), cfg.lambda3 * p.S);
  return p;
}

GroundTruth generate_video(const std::vector<LdsParams>& components, const LabelField& field, int T, Rng& rng,
                           const GenerateOptions& opts) {
  if (T < 1) throw Error("generate_video: T must be positive");
  field.validate();
  const int K = static_cast<int>(components.size());
  if (field.num_labels > K) throw Error("generate_video: field has more labels than components");
  const int L = field.size();
  for (const auto& c : components)
    if (c.C.rows() != L) throw Error("generate_video: observation matrix rows do not match the field size");

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(K));
  for (auto& s : seeds) s = rng();

  GroundTruth gt;
  gt.components = components;
  gt.field = field;
  gt.states.resize(static_cast<std::size_t>(K));
  Eigen::MatrixXd y(L, T);
  for (int j = 0; j < K; ++j) {
    const LdsParams& p = components[static_cast<std::size_t>(j)];
    Rng stream(seeds[static_cast<std::size_t>(j)]);
    Eigen::MatrixXd x(p.N(), T);
    x.col(0) = opts.state_noise ? sample_with_precision(stream, p.delta, p.S) : p.delta;
    for (int t = 1; t < T; ++t) {
      x.col(t) = p.A * x.col(t - 1);
      if (opts.state_noise) x.col(t) = sample_with_precision(stream, x.col(t), p.Q);
    }
    std::normal_distribution<double> noise(0.0, 1.0 / std::sqrt(p.r));
    for (int i = 0; i < L; ++i) {
      if (field.labels[static_cast<std::size_t>(i)] != j) continue;
      for (int t = 0; t < T; ++t) {
        y(i, t) = p.C.row(i).dot(x.col(t)) + p.mu;
        if (opts.observation_noise) y(i, t) += noise(stream);
      }
    }
    gt.states[static_cast<std::size_t>(j)] = std::move(x);
  }
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    double& v = y.data()[k];
    if (v < 0.0 || v > 1.0) {
      v = std::clamp(v, 0.0, 1.0);
      ++gt.clip_count;
    }
  }
  gt.tensor = VideoTensor(field.rows, field.cols, std::move(y));
  return gt;
}

LabelField stripes_layout(int rows, int cols, int k) {
  if (rows < 1 || cols < 1 || k < 1 || k > cols) throw Error("stripes layout needs 1 <= k <= cols");
  LabelField f{rows, cols, k, {}};
  f.labels.resize(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) f.labels[static_cast<std::size_t>(r * cols + c)] = c * k / cols;
  return f;
}

LabelField quadrants_layout(int rows, int cols, int k) {
  if (rows < 2 || cols < 2 || k < 1 || k > 4) throw Error("quadrants layout needs a 2x2 grid or larger and 1 <= k <= 4");
  LabelField f{rows, cols, k, {}};
  f.labels.resize(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int q = 2 * (r >= rows / 2 ? 1 : 0) + (c >= cols / 2 ? 1 : 0);
      f.labels[static_cast<std::size_t>(r * cols + c)] = std::min(q, k - 1);
    }
  return f;
}

ModelConfig synth_preset(int N) {
  ModelConfig cfg;
  cfg.state_dim_N = N;
  cfg.w1 = N + 20.0;
  cfg.Psi1_scale = 1.0 / cfg.w1;
  cfg.w3 = N + 20.0;
  cfg.Psi3_scale = 1.0 / cfg.w3;
  cfg.sigma_A = 1.0;
  cfg.sigma_C = 0.0002;
  cfg.m2 = 0.5;
  cfg.lambda2 = 0.0625;
  cfg.w2 = 20.0;
  cfg.Psi2 = 20.0;
  return cfg;
}

GroundTruth synthesize_scene(const SceneSpec& spec) {
  if (spec.textures < 1) throw Error("synth: texture count must be positive");
  if (spec.rows < 1 || spec.cols < 1 || spec.frames < 1 || spec.state_dim < 1)
    throw Error("synth: rows, cols, frames and state dimension must be positive");
  LabelField field;
  if (spec.layout == "stripes")
    field = stripes_layout(spec.rows, spec.cols, spec.textures);
  else if (spec.layout == "quadrants")
    field = quadrants_layout(spec.rows, spec.cols, spec.textures);
  else
    throw Error("synth: unknown layout '" + spec.layout + "' (expected stripes or quadrants)");

  const ModelConfig preset = synth_preset(spec.state_dim);
  Rng rng(spec.seed);
  std::vector<LdsParams> comps;
  for (int j = 0; j < spec.textures; ++j) {
    comps.push_back(sample_lds_params(rng, spec.state_dim, field.size(), preset));
    comps.back().mu = spec.textures == 1 ? 0.5 : 0.3 + 0.4 * j / (spec.textures - 1);
  }
  return generate_video(comps, field, spec.frames, rng);
}

}  // namespace igdtm
