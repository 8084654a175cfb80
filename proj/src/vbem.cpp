#include "igdtm/vbem.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>

#include "igdtm/error.hpp"

namespace igdtm {

namespace {

constexpr double kLn2Pi = 1.8378770664093454835606594728112;
constexpr double kProbFloor = 1e-300;

// Runs body(j) for j in [0, n) on up to `threads` workers. Each j writes only
// its own slot, so the result does not depend on scheduling.
template <typename Body>
void parallel_for(int n, int threads, Body&& body) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int j = 0; j < n; ++j) body(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int j = next++; j < n; j = next++) {
        try {
          body(j);
        } catch (...) {
          errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

MrfConfig<double> mrf_config(const ModelConfig& cfg) {
  return {cfg.beta, cfg.gamma1, cfg.gamma2, cfg.singletons()};
}

Eigen::MatrixXd sum_second(const SmootherStats<double>& st) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(st.N(), st.N());
  for (const auto& m : st.second) s += m;
  return s;
}

// Observation rows of every pixel under component j. With unit evidence
// weight the posterior covariance is shared by all pixels.
std::vector<RowPosterior<double>> update_rows(const Eigen::MatrixXd& y, const SmootherStats<double>& st, double E_r,
                                              double E_r_mu, double sigma_C) {
  const int N = st.N();
  const Eigen::Index L = y.rows();
  Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(N, N) / sigma_C + E_r * sum_second(st);
  const auto llt = spd_factor<double>(prec, "observation row precision");
  const Eigen::MatrixXd cov = symmetrized(llt.solve(Eigen::MatrixXd::Identity(N, N)));
  // Column i of rhs is sum_t E[x_t] (E[r] y_it - E[r mu]).
  const Eigen::MatrixXd rhs = st.mean * (E_r * y.transpose() - Eigen::MatrixXd::Constant(y.cols(), L, E_r_mu));
  const Eigen::MatrixXd means = llt.solve(rhs);
  std::vector<RowPosterior<double>> rows(static_cast<std::size_t>(L));
  for (Eigen::Index i = 0; i < L; ++i) rows[static_cast<std::size_t>(i)] = {means.col(i), cov};
  return rows;
}

// E_q ln W(X | w, Psi) given E[X] and E[ln|X|] under q.
double wishart_cross(double w, const Eigen::MatrixXd& Psi, const Eigen::MatrixXd& E_X, double E_ln_det) {
  const int N = static_cast<int>(Psi.rows());
  if (N == 0) return 0.0;
  const Eigen::MatrixXd Psi_inv = spd_inverse<double>(Psi, "Wishart scale");
  return 0.5 * (w - N - 1) * E_ln_det - 0.5 * (Psi_inv.cwiseProduct(E_X)).sum() - 0.5 * w * N * std::numbers::ln2 -
         0.5 * w * log_det_spd<double>(Psi, "Wishart scale") - mv_lgamma(0.5 * w, N);
}

// E_q ln NG(mu, r | p) with q's moments.
double normal_gamma_cross(const NormalGammaPosterior<double>& p, const NormalGammaPosterior<double>& q) {
  const double a = 0.5 * p.w, b = 0.5 / p.Psi;
  const double gamma = a * std::log(b) - std::lgamma(a) + (a - 1.0) * q.E_ln_r() - b * q.E_r();
  const double dm = q.m - p.m;
  const double normal =
      0.5 * (std::log(p.lambda) - kLn2Pi) + 0.5 * q.E_ln_r() - 0.5 * p.lambda * (1.0 / q.lambda + q.E_r() * dm * dm);
  return gamma + normal;
}

// E_q ln NW(delta, S | p) with q's moments.
double normal_wishart_cross(const NormalWishartPosterior<double>& p, const NormalWishartPosterior<double>& q) {
  const int N = q.N();
  const double E_ln_det = q.precision().expected_log_det();
  const Eigen::VectorXd dm = q.m - p.m;
  const double normal = 0.5 * N * (std::log(p.lambda) - kLn2Pi) + 0.5 * E_ln_det -
                        0.5 * p.lambda * (N / q.lambda + dm.dot(q.E_S() * dm));
  return normal + wishart_cross(p.w, p.Psi, q.E_S(), E_ln_det);
}

double gamma_cross(double shape, double rate, const AlphaState<double>& q) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * q.expected_log() - rate * q.mean();
}

void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericError(std::string("ELBO term is not finite: ") + term);
}

}  // namespace

Priors make_priors(const ModelConfig& cfg) {
  const int N = cfg.state_dim_N;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  return {{cfg.w1, cfg.Psi1_scale * I},
          {cfg.m2, cfg.lambda2, cfg.w2, cfg.Psi2},
          {Eigen::VectorXd::Constant(N, cfg.m3), cfg.lambda3, cfg.w3, cfg.Psi3_scale * I},
          cfg.sigma_A,
          cfg.sigma_C,
          cfg.eta1,
          cfg.eta2};
}

ComponentPosterior prior_posterior(const Priors& priors, int L) {
  const int N = priors.Q.N();
  ComponentPosterior p{priors.Q, priors.obs, priors.init,
                       {Eigen::MatrixXd::Zero(N, N), priors.sigma_A * Eigen::MatrixXd::Identity(N * N, N * N)},
                       {}};
  p.C.assign(static_cast<std::size_t>(L), {Eigen::VectorXd::Zero(N), priors.sigma_C * Eigen::MatrixXd::Identity(N, N)});
  return p;
}

ComponentExpectations component_expectations(const ComponentPosterior& post) {
  ComponentExpectations e;
  e.Q = post.Q.mean();
  e.ln_det_Q = post.Q.expected_log_det();
  e.r = post.obs.E_r();
  e.r_mu = post.obs.E_r_mu();
  e.r_mu2 = post.obs.E_r_mu2();
  e.ln_r = post.obs.E_ln_r();
  e.S = post.init.E_S();
  e.S_delta = post.init.E_S_delta();
  e.delta_S_delta = post.init.E_delta_S_delta();
  e.ln_det_S = post.init.precision().expected_log_det();
  e.A = post.A.mean;
  e.AtQA = post.A.expected_AtQA(e.Q);
  return e;
}

ExpectationSet vbe_expectations(const std::vector<ComponentPosterior>& post, const StickState<double>& stick,
                                const AlphaState<double>& alpha) {
  ExpectationSet ex;
  ex.comp.reserve(post.size());
  for (const auto& p : post) ex.comp.push_back(component_expectations(p));
  ex.alpha = alpha.mean();
  ex.ln_alpha = alpha.expected_log();
  const auto ls = expected_log_stick(stick);
  ex.ln_nu = ls.ln_nu;
  ex.ln_1m_nu = ls.ln_1m_nu;
  ex.ln_pi = expected_log_mixture_weight(stick);
  return ex;
}

ObservationInfo<double> component_observation_info(const Eigen::VectorXd& q, const Eigen::MatrixXd& y,
                                                   const ComponentPosterior& post, const ComponentExpectations& e) {
  const int N = static_cast<int>(e.Q.rows());
  const Eigen::Index L = y.rows();
  ObservationInfo<double> info{Eigen::MatrixXd::Zero(N, N), Eigen::MatrixXd::Zero(N, y.cols())};
  Eigen::MatrixXd weighted_means(N, L);
  for (Eigen::Index i = 0; i < L; ++i) {
    const auto& C = post.C[static_cast<std::size_t>(i)];
    weighted_means.col(i) = q(i) * C.mean;
    if (q(i) != 0.0) info.J += q(i) * e.r * C.second_moment();
  }
  info.J = symmetrized(info.J);
  info.h = weighted_means * (e.r * y - Eigen::MatrixXd::Constant(L, y.cols(), e.r_mu));
  return info;
}

ExpectedLds<double> expected_lds(const ComponentExpectations& e, const Eigen::VectorXd& q,
                                 const std::vector<RowPosterior<double>>& C) {
  const int N = static_cast<int>(e.Q.rows());
  const double n = std::max(q.sum(), kWeightFloor);
  Eigen::VectorXd C_bar = Eigen::VectorXd::Zero(N);
  Eigen::MatrixXd C2 = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (q(i) == 0.0) continue;
    C_bar += q(i) * C[static_cast<std::size_t>(i)].mean;
    C2 += q(i) * C[static_cast<std::size_t>(i)].second_moment();
  }
  return {e.A, e.AtQA, e.Q, C_bar / n, e.r, e.r_mu, e.S, e.S_delta, C2 / n};
}

LabelField hard_labels(const Eigen::MatrixXd& q, int rows, int cols) {
  if (q.rows() != static_cast<Eigen::Index>(rows) * cols) throw Error("hard_labels: q rows do not match the grid");
  LabelField f{rows, cols, static_cast<int>(q.cols()), std::vector<int>(static_cast<std::size_t>(q.rows()), 0)};
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < q.cols(); ++j)
      if (q(i, j) > q(i, best)) best = j;
    f.labels[static_cast<std::size_t>(i)] = best;
  }
  return f;
}

int effective_components(const LabelField& hard, int K, double threshold) {
  std::vector<long> counts(static_cast<std::size_t>(K), 0);
  for (int l : hard.labels)
    if (l >= 0 && l < K) ++counts[static_cast<std::size_t>(l)];
  const double min_count = threshold * static_cast<double>(hard.labels.size());
  return static_cast<int>(
      std::count_if(counts.begin(), counts.end(), [&](long c) { return c > 0 && static_cast<double>(c) >= min_count; }));
}

Eigen::MatrixXd mrf_prior_matrix(const LabelField& hard, const MrfConfig<double>& cfg, int K) {
  Eigen::MatrixXd m(hard.size(), K);
  for (int i = 0; i < hard.size(); ++i) m.row(i) = pointwise_prior(hard, i, cfg, K).transpose();
  return m;
}

double expected_pixel_loglik(const Eigen::VectorXd& y, const SmootherStats<double>& st, const RowPosterior<double>& C,
                             const ComponentExpectations& e) {
  const auto [s1, s2] = residual_moments<double>(y, st, C);
  const double T = st.T();
  const double quad = e.r * s2 - 2.0 * e.r_mu * s1 + T * e.r_mu2;
  return 0.5 * T * (e.ln_r - kLn2Pi) - 0.5 * quad;
}

double expected_chain_logdensity(const SmootherStats<double>& st, const ComponentPosterior& post,
                                 const ComponentExpectations& e) {
  const int N = st.N(), T = st.T();
  if (N == 0) return 0.0;
  const Eigen::VectorXd m1 = st.mean.col(0);
  const Eigen::VectorXd& mh = post.init.m;
  const Eigen::MatrixXd D = st.second[0] - m1 * mh.transpose() - mh * m1.transpose() + mh * mh.transpose();
  double out = -0.5 * N * kLn2Pi + 0.5 * e.ln_det_S - 0.5 * ((e.S.cwiseProduct(D)).sum() + N / post.init.lambda);
  if (T > 1) {
    const Eigen::MatrixXd R = transition_scatter(st, post.A);
    out += -0.5 * (T - 1) * N * kLn2Pi + 0.5 * (T - 1) * e.ln_det_Q - 0.5 * (e.Q.cwiseProduct(R)).sum();
  }
  return out;
}

Eigen::MatrixXd label_scores(const Eigen::MatrixXd& y, const std::vector<SmootherStats<double>>& stats,
                             const std::vector<ComponentPosterior>& post, const ExpectationSet& expect,
                             const Eigen::MatrixXd& mrf_prior, double sigma_C, bool full) {
  const Eigen::Index L = y.rows();
  const int K = static_cast<int>(post.size());
  const double T = static_cast<double>(y.cols());
  Eigen::MatrixXd s(L, K);
  const Eigen::VectorXd y_sq = y.rowwise().squaredNorm();
  for (int j = 0; j < K; ++j) {
    const auto& st = stats[static_cast<std::size_t>(j)];
    const auto& p = post[static_cast<std::size_t>(j)];
    const auto& e = expect.comp[static_cast<std::size_t>(j)];
    const Eigen::MatrixXd X = sum_second(st);
    const Eigen::VectorXd m_sum = st.mean.rowwise().sum();
    // y M^T: row i is sum_t y_it E[x_t]^T.
    const Eigen::MatrixXd yM = y * st.mean.transpose();
    const double base = expect.ln_pi(j) + 0.5 * T * (e.ln_r - kLn2Pi) - 0.5 * T * e.r_mu2 +
                        (full ? expected_chain_logdensity(st, p, e) : 0.0);
    for (Eigen::Index i = 0; i < L; ++i) {
      const auto& C = p.C[static_cast<std::size_t>(i)];
      const double cy = C.mean.dot(yM.row(i));
      const double s1 = y.row(i).sum() - C.mean.dot(m_sum);
      const double s2 = y_sq(i) - 2.0 * cy + (C.second_moment().cwiseProduct(X)).sum();
      s(i, j) = base + std::log(std::max(mrf_prior(i, j), kProbFloor)) - 0.5 * (e.r * s2 - 2.0 * e.r_mu * s1) -
                row_kl(C, sigma_C);
    }
  }
  return s;
}

Eigen::MatrixXd normalize_scores(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd q(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double top = scores.row(i).maxCoeff();
    q.row(i) = (scores.row(i).array() - top).exp();
    q.row(i) /= q.row(i).sum();
  }
  return q;
}

Responsibilities update_labels(const Eigen::MatrixXd& y, int rows, int cols,
                               const std::vector<SmootherStats<double>>& stats,
                               const std::vector<ComponentPosterior>& post, const ExpectationSet& expect,
                               const Eigen::MatrixXd& mrf_prior, double sigma_C, bool full) {
  Responsibilities r;
  r.q = normalize_scores(label_scores(y, stats, post, expect, mrf_prior, sigma_C, full));
  r.hard = hard_labels(r.q, rows, cols);
  return r;
}

VbemState initialize_state(const Eigen::MatrixXd& y, int rows, int cols, const ModelConfig& cfg,
                           const Eigen::MatrixXd& q0, int threads) {
  const int K = cfg.truncation_K, N = cfg.state_dim_N;
  const Eigen::Index L = y.rows(), T = y.cols();
  if (L != static_cast<Eigen::Index>(rows) * cols) throw Error("initialize_state: pixel count does not match the grid");
  if (q0.rows() != L || q0.cols() != K) throw Error("initialize_state: initial responsibilities must be L x K");

  VbemState s;
  s.cfg = cfg;
  s.priors = make_priors(cfg);
  s.rows = rows;
  s.cols = cols;
  s.y = y;
  s.threads = std::max(1, threads);
  s.post.assign(static_cast<std::size_t>(K), prior_posterior(s.priors, static_cast<int>(L)));
  s.stick = update_nu(Eigen::MatrixXd(0, K), cfg.eta1 / cfg.eta2);
  s.alpha = {cfg.eta1, cfg.eta2};
  s.resp.q = q0;
  s.resp.hard = hard_labels(q0, rows, cols);
  s.mrf = mrf_prior_matrix(s.resp.hard, mrf_config(cfg), K);

  // Start each component's observation rows on the leading principal
  // directions of its cluster's centered traces; with C = 0 and a zero-mean
  // chain the first smoother pass would carry no signal.
  if (N > 0) {
    const Eigen::MatrixXd centered = y.colwise() - y.rowwise().mean();
    const double scale = 1.0 / std::sqrt(static_cast<double>(T));
    for (int j = 0; j < K; ++j) {
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(T, T);
      long members = 0;
      for (Eigen::Index i = 0; i < L; ++i)
        if (s.resp.hard.labels[static_cast<std::size_t>(i)] == j) {
          G.noalias() += centered.row(i).transpose() * centered.row(i);
          ++members;
        }
      if (members == 0) continue;
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
      Eigen::MatrixXd V = Eigen::MatrixXd::Zero(T, N);
      for (int n = 0; n < N && n < T; ++n) V.col(n) = es.eigenvectors().col(T - 1 - n);
      const Eigen::MatrixXd means = scale * centered * V;
      auto& C = s.post[static_cast<std::size_t>(j)].C;
      for (Eigen::Index i = 0; i < L; ++i) C[static_cast<std::size_t>(i)].mean = means.row(i).transpose();
    }
  }
  return s;
}

void vbem_sweep(VbemState& s) {
  const int K = s.K();
  s.expect = vbe_expectations(s.post, s.stick, s.alpha);
  s.stats.resize(static_cast<std::size_t>(K));
  parallel_for(K, s.threads, [&](int j) {
    auto& p = s.post[static_cast<std::size_t>(j)];
    const auto& e = s.expect.comp[static_cast<std::size_t>(j)];
    const Eigen::VectorXd q = s.resp.q.col(j);
    const ObservationInfo<double> info = component_observation_info(q, s.y, p, e);
    ExpectedLds<double> lds{e.A, e.AtQA, e.Q, Eigen::VectorXd::Zero(s.N()), e.r, e.r_mu, e.S, e.S_delta,
                            Eigen::MatrixXd::Zero(s.N(), s.N())};
    SmootherStats<double> st = run_smoother(lds, info);

    p.Q = update_Q(st, p.A, s.priors.Q);
    p.obs = update_mu_r(q, s.y, st, p.C, s.priors.obs);
    // The chain of every component is present once in the model, whatever its occupancy.
    p.init = update_delta_S(1.0, st, s.priors.init);
    p.A = update_A(st, p.Q.mean(), s.priors.sigma_A);
    p.C = update_rows(s.y, st, p.obs.E_r(), p.obs.E_r_mu(), s.priors.sigma_C);
    s.stats[static_cast<std::size_t>(j)] = std::move(st);
  });

  s.stick = update_nu(s.resp.q, s.alpha.mean());
  s.alpha = update_alpha(s.stick, s.priors.eta1, s.priors.eta2);

  s.expect = vbe_expectations(s.post, s.stick, s.alpha);
  s.mrf = mrf_prior_matrix(s.resp.hard, mrf_config(s.cfg), K);
  s.resp = update_labels(s.y, s.rows, s.cols, s.stats, s.post, s.expect, s.mrf, s.priors.sigma_C,
                         s.cfg.label_update_full);
}

ElboTerms elbo_terms(const VbemState& s) {
  const int K = s.K();
  const Eigen::Index L = s.L();
  const double T = s.T();
  const auto& pr = s.priors;
  ElboTerms t;
  for (int j = 0; j < K; ++j) {
    const auto& p = s.post[static_cast<std::size_t>(j)];
    const auto& e = s.expect.comp[static_cast<std::size_t>(j)];
    const auto& st = s.stats[static_cast<std::size_t>(j)];
    const int N = p.Q.N();

    t.Q += wishart_cross(pr.Q.w, pr.Q.Psi, e.Q, e.ln_det_Q) - wishart_cross(p.Q.w, p.Q.Psi, e.Q, e.ln_det_Q);
    t.obs_prior += normal_gamma_cross(pr.obs, p.obs) - normal_gamma_cross(p.obs, p.obs);
    t.init_prior += normal_wishart_cross(pr.init, p.init) - normal_wishart_cross(p.init, p.init);

    if (N > 0) {
      const double nn = static_cast<double>(N) * N;
      t.A += -0.5 * nn * (kLn2Pi + std::log(pr.sigma_A)) -
             (p.A.mean.squaredNorm() + p.A.cov.trace()) / (2.0 * pr.sigma_A) + 0.5 * nn * (1.0 + kLn2Pi) +
             0.5 * log_det_spd<double>(p.A.cov, "transition posterior covariance");
    }

    t.chain += expected_chain_logdensity(st, p, e) + 0.5 * N * T * (1.0 + kLn2Pi) - 0.5 * st.log_det_precision;

    for (Eigen::Index i = 0; i < L; ++i) {
      const double q = s.resp.q(i, j);
      if (q == 0.0) continue;
      const auto& C = p.C[static_cast<std::size_t>(i)];
      t.C -= q * row_kl(C, pr.sigma_C);
      t.likelihood += q * expected_pixel_loglik(s.y.row(i).transpose(), st, C, e);
      t.labels += q * (std::log(std::max(s.mrf(i, j), kProbFloor)) + s.expect.ln_pi(j) - std::log(q));
    }
  }
  for (int j = 0; j + 1 < K; ++j) {
    const double b1 = s.stick.beta1(j), b2 = s.stick.beta2(j);
    const double lp = s.expect.ln_alpha + (s.expect.alpha - 1.0) * s.expect.ln_1m_nu(j);
    const double lq = -log_beta(b1, b2) + (b1 - 1.0) * s.expect.ln_nu(j) + (b2 - 1.0) * s.expect.ln_1m_nu(j);
    t.sticks += lp - lq;
  }
  t.alpha = gamma_cross(pr.eta1, pr.eta2, s.alpha) - gamma_cross(s.alpha.eta1_hat, s.alpha.eta2_hat, s.alpha);

  require_finite(t.Q, "state-noise precision");
  require_finite(t.obs_prior, "observation mean and precision");
  require_finite(t.init_prior, "initial state");
  require_finite(t.A, "transition matrix");
  require_finite(t.C, "observation rows");
  require_finite(t.chain, "state chain");
  require_finite(t.likelihood, "observation likelihood");
  require_finite(t.labels, "labels");
  require_finite(t.sticks, "stick proportions");
  require_finite(t.alpha, "concentration");
  return t;
}

double elbo(const VbemState& state) { return elbo_terms(state).total(); }

namespace {

// Tries folding each occupied component into a larger one, smallest first.
// A candidate runs merge_sweeps sweeps and replaces `s` only if its bound
// ends above the current one.
bool try_merge(VbemState& s, const RunOptions& opts) {
  std::vector<long> counts(static_cast<std::size_t>(s.K()), 0);
  for (int l : s.resp.hard.labels) ++counts[static_cast<std::size_t>(l)];
  std::vector<int> occupied;
  for (int j = 0; j < s.K(); ++j)
    if (counts[static_cast<std::size_t>(j)] > 0) occupied.push_back(j);
  if (occupied.size() < 2) return false;
  std::stable_sort(occupied.begin(), occupied.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });

  const double current = elbo(s);
  for (std::size_t bi = occupied.size() - 1; bi > 0; --bi)
    for (std::size_t ai = 0; ai < bi; ++ai) {
      VbemState c = s;
      const int into = occupied[ai], from = occupied[bi];
      c.resp.q.col(into) += c.resp.q.col(from);
      c.resp.q.col(from).setZero();
      c.resp.hard = hard_labels(c.resp.q, c.rows, c.cols);
      c.mrf = mrf_prior_matrix(c.resp.hard, mrf_config(c.cfg), c.K());
      for (int k = 0; k < c.cfg.merge_sweeps; ++k) {
        vbem_sweep(c);
        if (opts.on_sweep) opts.on_sweep(c);
      }
      if (elbo(c) > current) {
        s = std::move(c);
        return true;
      }
    }
  return false;
}

}  // namespace

SegmentationResult run_vbem(const VideoTensor& tensor, const ModelConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  const Eigen::MatrixXd& y = tensor.pixels();
  const Eigen::MatrixXd q0 =
      opts.initial_q ? *opts.initial_q : kmeans_responsibilities(y, cfg.truncation_K, cfg.seed);
  VbemState s = initialize_state(y, tensor.rows(), tensor.cols(), cfg, q0, opts.threads);

  SegmentationResult res;
  int since_merge = 0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const LabelField before = s.resp.hard;
    vbem_sweep(s);
    const double value = elbo(s);
    res.elbo_trace.push_back(value);
    res.iterations = it;
    if (opts.on_sweep) opts.on_sweep(s);

    long changed = 0;
    for (std::size_t i = 0; i < before.labels.size(); ++i) changed += before.labels[i] != s.resp.hard.labels[i];
    const double change_frac = static_cast<double>(changed) / static_cast<double>(before.labels.size());
    bool done = false;
    if (it >= 2) {
      const double prev = res.elbo_trace[res.elbo_trace.size() - 2];
      const double rel = std::abs(value - prev) / std::max(std::abs(prev), 1e-300);
      done = rel < cfg.tol_elbo && change_frac < cfg.tol_labels;
    }
    // A stalled or converged run gets a chance to join components that
    // split one texture between them.
    ++since_merge;
    if (cfg.merge_interval > 0 && (done || since_merge >= cfg.merge_interval || it == cfg.max_iters)) {
      since_merge = 0;
      if (try_merge(s, opts)) {
        res.elbo_trace.push_back(elbo(s));
        continue;
      }
    }
    if (done) {
      res.converged = true;
      break;
    }
  }
  res.labels = s.resp.hard;
  res.seg_count = effective_components(res.labels, cfg.truncation_K, cfg.prune_threshold);
  res.posterior = std::move(s.post);
  res.responsibilities = std::move(s.resp);
  res.stick = s.stick;
  res.alpha = s.alpha;
  return res;
}

}  // namespace igdtm
