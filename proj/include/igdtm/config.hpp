#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace igdtm {

/// Model hyperparameters and run controls. Wishart scales are given as
/// multiples of the identity; m3 is broadcast to every state coordinate.
struct ModelConfig {
  int truncation_K = 7;
  int state_dim_N = 4;

  // State-noise precision Q ~ Wishart(w1, Psi1_scale * I).
  double w1 = 6.0;
  double Psi1_scale = 1.0 / 6.0;
  // Observation mean and precision (mu, r) ~ Normal-Gamma(m2, lambda2, w2, Psi2).
  double m2 = 0.5;
  double lambda2 = 0.01;
  double w2 = 1.0;
  double Psi2 = 100.0;
  // Initial state (delta, S) ~ Normal-Wishart(m3, lambda3, w3, Psi3_scale * I).
  double m3 = 0.0;
  double lambda3 = 1.0;
  double w3 = 6.0;
  double Psi3_scale = 1.0 / 6.0;
  // DP concentration alpha ~ Gamma(eta1, eta2) (shape, rate).
  double eta1 = 1.0;
  double eta2 = 1.0;
  // Entry variances of A and of the rows of C.
  double sigma_A = 1.0;
  double sigma_C = 0.01;

  // Potts prior on the label field.
  double beta = 0.8;
  double gamma1 = -1.0;
  double gamma2 = 1.0;
  /// Empty means all zero; a single value is broadcast to every label.
  std::vector<double> sigma_singletons;

  int max_iters = 100;
  double tol_elbo = 1e-5;
  double tol_labels = 1e-3;
  double prune_threshold = 0.02;
  /// Sweeps between merge attempts (also tried at convergence); 0 disables merges.
  int merge_interval = 25;
  /// Sweeps a merge candidate runs before its bound is compared.
  int merge_sweeps = 5;
  std::uint64_t seed = 1;
  /// Adds each component's expected chain log-density to the label scores.
  bool label_update_full = false;

  /// Throws ConfigError naming the first key that violates an invariant.
  void validate() const;

  /// Singleton potentials expanded to length K.
  std::vector<double> singletons() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// `key = value` lines; `#` starts a comment. Absent keys keep their defaults.
ModelConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
ModelConfig parse_config(const std::filesystem::path& path);

/// Emits every key so that parse_config_text(write_config(c)) == c.
std::string write_config(const ModelConfig& cfg);

}  // namespace igdtm
