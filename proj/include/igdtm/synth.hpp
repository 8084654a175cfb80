#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "igdtm/config.hpp"
#include "igdtm/tensor_io.hpp"

namespace igdtm {

using Rng = std::mt19937_64;

/// One generative dynamic texture. Q, r and S are precisions.
struct LdsParams {
  Eigen::MatrixXd A;
  Eigen::MatrixXd C;  ///< L x N, row i observes pixel i
  Eigen::MatrixXd Q;
  double mu = 0.0;
  double r = 1.0;
  Eigen::VectorXd delta;
  Eigen::MatrixXd S;

  int N() const noexcept { return static_cast<int>(A.rows()); }
};

struct GroundTruth {
  std::vector<LdsParams> components;
  LabelField field;
  VideoTensor tensor;
  std::vector<Eigen::MatrixXd> states;  ///< N x T trajectory per component
  long clip_count = 0;                  ///< samples clipped into [0, 1]
};

inline constexpr double kStableRadius = 0.9;

/// Entries drawn i.i.d. N(0, sigma_A); sigma_A is a variance.
Eigen::MatrixXd sample_transition_raw(Rng& rng, int N, double sigma_A);
/// Rescales A to the given spectral radius; the zero matrix is left alone.
void stabilize(Eigen::MatrixXd& A, double radius = kStableRadius);

/// Bartlett draw from Wishart(w, Psi), E[X] = w Psi.
Eigen::MatrixXd sample_wishart(Rng& rng, double w, const Eigen::MatrixXd& Psi);

LdsParams sample_lds_params(Rng& rng, int N, int L, const ModelConfig& cfg);

struct GenerateOptions {
  bool state_noise = true;        ///< false: x_1 = delta and x_t = A x_{t-1}
  bool observation_noise = true;  ///< false: y = C x + mu
};

/// Simulates one chain per component from its own RNG stream (seeded from
/// `rng`) and renders every pixel from the chain of its label.
GroundTruth generate_video(const std::vector<LdsParams>& components, const LabelField& field, int T, Rng& rng,
                           const GenerateOptions& opts = {});

/// Vertical bands: column c belongs to band floor(c * k / cols).
LabelField stripes_layout(int rows, int cols, int k);
/// Quadrant q = 2 * (bottom) + (right), merged as min(q, k - 1); k = 3 keeps
/// the two top quadrants and joins the bottom half.
LabelField quadrants_layout(int rows, int cols, int k = 4);

/// Priors that render textures inside [0, 1] with visible dynamics: Q and S
/// concentrated near I, observation noise sd about 0.05, C x with sd about 0.06.
ModelConfig synth_preset(int N);

/// A complete test scene as produced by `igdtm synth`.
struct SceneSpec {
  int textures = 2;
  std::string layout = "stripes";  ///< "stripes" or "quadrants"
  int rows = 40;
  int cols = 40;
  int frames = 30;
  int state_dim = 4;
  std::uint64_t seed = 1;
};

/// Draws one LDS per texture from synth_preset, then overrides the means with
/// evenly spaced levels in [0.3, 0.7] (0.5 for a single texture) so textures
/// differ in brightness as well as dynamics.
GroundTruth synthesize_scene(const SceneSpec& spec);

}  // namespace igdtm
