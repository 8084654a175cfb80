#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

#include "igdtm/config.hpp"
#include "igdtm/conjugate.hpp"
#include "igdtm/dp.hpp"
#include "igdtm/mrf.hpp"
#include "igdtm/rtss.hpp"
#include "igdtm/tensor_io.hpp"

namespace igdtm {

/// Prior hyperparameters in posterior form, so an untouched posterior equals its prior.
struct Priors {
  WishartPosterior<double> Q;
  NormalGammaPosterior<double> obs;
  NormalWishartPosterior<double> init;
  double sigma_A;
  double sigma_C;
  double eta1;
  double eta2;
};

Priors make_priors(const ModelConfig& cfg);

/// Variational posterior of one component. `C[i]` is the posterior of pixel
/// i's observation row given that the pixel belongs to this component.
struct ComponentPosterior {
  WishartPosterior<double> Q;
  NormalGammaPosterior<double> obs;
  NormalWishartPosterior<double> init;
  MatrixRowsPosterior<double> A;
  std::vector<RowPosterior<double>> C;
};

ComponentPosterior prior_posterior(const Priors& priors, int L);

struct Responsibilities {
  Eigen::MatrixXd q;  ///< L x K, rows sum to one
  LabelField hard;
};

struct ComponentExpectations {
  Eigen::MatrixXd Q;
  double ln_det_Q = 0;
  double r = 0;
  double r_mu = 0;
  double r_mu2 = 0;  ///< E[r mu^2]
  double ln_r = 0;
  Eigen::MatrixXd S;
  Eigen::VectorXd S_delta;
  double delta_S_delta = 0;  ///< E[delta^T S delta]
  double ln_det_S = 0;
  Eigen::MatrixXd A;
  Eigen::MatrixXd AtQA;
};

struct ExpectationSet {
  std::vector<ComponentExpectations> comp;
  double alpha = 0;
  double ln_alpha = 0;
  Eigen::VectorXd ln_nu;
  Eigen::VectorXd ln_1m_nu;
  Eigen::VectorXd ln_pi;
};

ComponentExpectations component_expectations(const ComponentPosterior& post);
ExpectationSet vbe_expectations(const std::vector<ComponentPosterior>& post, const StickState<double>& stick,
                                const AlphaState<double>& alpha);

/// Smoother evidence for component j from every pixel, weighted by q(z_i = j),
/// each projected through its own row posterior.
ObservationInfo<double> component_observation_info(const Eigen::VectorXd& q, const Eigen::MatrixXd& y,
                                                   const ComponentPosterior& post, const ComponentExpectations& e);

/// Pseudo-observation view of the same component (mean row and weighted trace).
ExpectedLds<double> expected_lds(const ComponentExpectations& e, const Eigen::VectorXd& q,
                                 const std::vector<RowPosterior<double>>& C);

/// Row-wise argmax, ties to the lowest index.
LabelField hard_labels(const Eigen::MatrixXd& q, int rows, int cols);

/// Labels with nonzero hard occupancy of at least threshold * L.
int effective_components(const LabelField& hard, int K, double threshold);

/// L x K matrix of pointwise Potts priors evaluated against `hard`.
Eigen::MatrixXd mrf_prior_matrix(const LabelField& hard, const MrfConfig<double>& cfg, int K);

/// Expected log-likelihood of pixel i's trace under component j, with the
/// row posterior for (i, j): sum_t E[ln N(y_it | C x_t + mu, r^-1)].
double expected_pixel_loglik(const Eigen::VectorXd& y, const SmootherStats<double>& st, const RowPosterior<double>& C,
                             const ComponentExpectations& e);

/// E[ln p(x_{1:T} | delta, S, A, Q)] under q.
double expected_chain_logdensity(const SmootherStats<double>& st, const ComponentPosterior& post,
                                 const ComponentExpectations& e);

/// Unnormalized label log-scores (L x K). With `full`, each component's
/// expected chain log-density is added to its column.
Eigen::MatrixXd label_scores(const Eigen::MatrixXd& y, const std::vector<SmootherStats<double>>& stats,
                             const std::vector<ComponentPosterior>& post, const ExpectationSet& expect,
                             const Eigen::MatrixXd& mrf_prior, double sigma_C, bool full);

/// Row-wise log-sum-exp normalization of label scores.
Eigen::MatrixXd normalize_scores(const Eigen::MatrixXd& scores);

Responsibilities update_labels(const Eigen::MatrixXd& y, int rows, int cols,
                               const std::vector<SmootherStats<double>>& stats,
                               const std::vector<ComponentPosterior>& post, const ExpectationSet& expect,
                               const Eigen::MatrixXd& mrf_prior, double sigma_C, bool full);

/// Everything the sweep loop owns.
struct VbemState {
  ModelConfig cfg;
  Priors priors;
  int rows = 0;
  int cols = 0;
  Eigen::MatrixXd y;  ///< L x T
  std::vector<ComponentPosterior> post;
  StickState<double> stick;
  AlphaState<double> alpha{1.0, 1.0};
  Responsibilities resp;
  std::vector<SmootherStats<double>> stats;
  ExpectationSet expect;
  Eigen::MatrixXd mrf;  ///< prior weights used by the latest label update
  int threads = 1;

  int K() const noexcept { return cfg.truncation_K; }
  int N() const noexcept { return cfg.state_dim_N; }
  int L() const noexcept { return static_cast<int>(y.rows()); }
  int T() const noexcept { return static_cast<int>(y.cols()); }
};

struct RunOptions {
  int threads = 1;
  /// Replaces the k-means initialization of q (L x K).
  std::optional<Eigen::MatrixXd> initial_q;
  /// Called after every sweep with the updated state.
  std::function<void(const VbemState&)> on_sweep;
};

/// Seeded k-means on per-pixel (temporal mean, temporal sd), clusters ordered
/// by decreasing size, mixed with the uniform distribution at weight eps.
Eigen::MatrixXd kmeans_responsibilities(const Eigen::MatrixXd& y, int K, std::uint64_t seed, int iterations = 20,
                                        double eps = 0.05);

/// Builds the initial state from q: priors everywhere except the observation
/// rows, which start on the principal directions of each cluster's traces.
VbemState initialize_state(const Eigen::MatrixXd& y, int rows, int cols, const ModelConfig& cfg,
                           const Eigen::MatrixXd& q0, int threads = 1);

/// One full sweep: smoother and conjugate updates per component, sticks and
/// concentration, then labels.
void vbem_sweep(VbemState& state);

/// Evidence lower bound at the current state. The label prior enters through
/// the Potts weights stored in `state.mrf`.
double elbo(const VbemState& state);

struct ElboTerms {
  double Q = 0;
  double obs_prior = 0;
  double init_prior = 0;
  double A = 0;
  double C = 0;
  double chain = 0;
  double likelihood = 0;
  double labels = 0;
  double sticks = 0;
  double alpha = 0;

  double total() const { return Q + obs_prior + init_prior + A + C + chain + likelihood + labels + sticks + alpha; }
};
ElboTerms elbo_terms(const VbemState& state);

struct SegmentationResult {
  LabelField labels;
  int seg_count = 0;
  std::vector<double> elbo_trace;  ///< one entry per sweep and per accepted merge
  int iterations = 0;              ///< sweeps of the main loop
  bool converged = false;
  std::vector<ComponentPosterior> posterior;
  Responsibilities responsibilities;
  StickState<double> stick;
  AlphaState<double> alpha{1.0, 1.0};
};

/// Sweeps until convergence or max_iters. Every merge_interval sweeps, at
/// convergence and at the last sweep, greedy merges of occupied components are
/// tried and kept when they raise the bound.
SegmentationResult run_vbem(const VideoTensor& tensor, const ModelConfig& cfg, const RunOptions& opts = {});

}  // namespace igdtm
