#pragma once

#include "drcusum/core.hpp"

#include <variant>
#include <vector>

namespace drcusum {

// Numeric estimate with its Monte-Carlo standard error (0 for exact/quadrature
// results). Downstream checks compare |a - b| against combined standard errors.
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Multivariate normal with diagonal or full covariance. Full covariances are
// Cholesky-factored once at construction and the factor reused for densities
// and sampling.
class GaussianSpec {
 public:
  static GaussianSpec isotropic(Eigen::VectorXd mean, double variance = 1.0);
  static GaussianSpec diagonal(Eigen::VectorXd mean, Eigen::VectorXd variances);
  static GaussianSpec full(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  bool is_diagonal() const { return diagonal_; }
  const Eigen::VectorXd& variances() const;   // diagonal case only
  Eigen::MatrixXd covariance() const;         // materialized either way

  double log_pdf(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(RandomSource& rng) const;

  bool same_as(const GaussianSpec& other) const;

 private:
  GaussianSpec() = default;

  Eigen::VectorXd mean_;
  bool diagonal_ = true;
  Eigen::VectorXd var_;       // diagonal case
  Eigen::VectorXd inv_sd_;    // diagonal case, 1/sigma per axis
  Eigen::MatrixXd chol_l_;    // full case, lower factor
  double log_det_ = 0.0;
  double log_norm_ = 0.0;     // -(d ln 2pi + log det)/2
};

// Definition-style two-component mixture P(lambda) = lambda P1 + (1-lambda) P2.
struct MixtureSpec {
  double lambda = 0.5;
  GaussianSpec comp1;
  GaussianSpec comp2;

  MixtureSpec(double lam, GaussianSpec c1, GaussianSpec c2);

  int dim() const { return comp1.dim(); }
  double log_pdf(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(RandomSource& rng) const;
};

// General finite mixture; used for oracle ratios when a window spans several
// segments. Weights are normalized at construction.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<GaussianSpec> comps;

  GaussianMixture(std::vector<double> w, std::vector<GaussianSpec> c);

  int dim() const { return comps.front().dim(); }
  double log_pdf(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(RandomSource& rng) const;
};

// Value-type union over the Gaussian families; everything the oracle side of
// the toolkit evaluates or samples from is one of these.
class Density {
 public:
  Density(GaussianSpec g) : v_(std::move(g)) {}
  Density(MixtureSpec m) : v_(std::move(m)) {}
  Density(GaussianMixture m) : v_(std::move(m)) {}

  int dim() const;
  double log_pdf(const Eigen::VectorXd& x) const;
  Eigen::VectorXd sample(RandomSource& rng) const;

  // The Gaussian components, flattened; quadrature uses them to bound the
  // integration range.
  std::vector<GaussianSpec> gaussian_leaves() const;

 private:
  std::variant<GaussianSpec, MixtureSpec, GaussianMixture> v_;
};

double gaussian_log_pdf(const GaussianSpec& spec, const Eigen::VectorXd& x);
double mixture_log_pdf(const MixtureSpec& mix, const Eigen::VectorXd& x);

// Closed-form KL(p || q) for Gaussians; >= 0, zero iff p == q.
double gaussian_kl(const GaussianSpec& p, const GaussianSpec& q);

// (1/n) sum log(p(x_i)/q(x_i)) over x_i ~ p, with its standard error.
// Bitwise reproducible for a given rng seed/state.
McEstimate kl_monte_carlo(const Density& p, const Density& q, int n_samples,
                          RandomSource& rng);

// Adaptive-Simpson evaluation of KL(p || q), d == 1 only. The integration range
// covers mean +/- 12 sigma of every Gaussian component on either side.
double kl_quadrature_1d(const Density& p, const Density& q);

enum class KlEstimator { Quadrature1d, MonteCarlo };

struct EstimatorOptions {
  KlEstimator kind = KlEstimator::MonteCarlo;
  int mc_samples = 200000;
};

// Dispatches to quadrature (std_error 0) or Monte Carlo per the options.
McEstimate kl_estimate(const Density& p, const Density& q,
                       const EstimatorOptions& opts, RandomSource& rng);

// f_i(gamma, lambda) = (1/gamma) KL(P(lambda) || P_i)
//                      + ((1-gamma)/gamma) KL(P_i || P(lambda)),
// with P(lambda) the two-component mixture of p1 and p2. gamma in (0, 1]:
// the expected-slope identities need the gamma == 1 endpoint (where the second
// term vanishes), so the open upper bound would be self-defeating.
McEstimate f_weighted_kl(int i, double gamma, double lambda,
                         const GaussianSpec& p1, const GaussianSpec& p2,
                         const EstimatorOptions& opts, RandomSource& rng);

double oracle_log_ratio(const Density& left, const Density& right,
                        const Eigen::VectorXd& x);

enum class Region { PreChange, PostChange };

// Expected log-ratio E[log(P_left/P_right)] in the given region, in closed
// form up to the KL evaluations:
//   split left of change:  pre = KL(P1 || P(1-a1)),  post = -f1(a1, 1-a1)
//   split right of change: pre = f2(a2, a2),         post = -KL(P2 || P(a2))
// Pre-change values are >= 0 and post-change <= 0 (up to estimator noise).
McEstimate expected_log_ratio(const SplitGeometry& geom, const GaussianSpec& p1,
                              const GaussianSpec& p2, Region region,
                              const EstimatorOptions& opts, RandomSource& rng);

struct AccuracyBound {
  double a_bound = 0.0;
  double c_min = 0.0;
  double beta = 0.0;
  double alpha = 0.0;  // (2 a^2 / c^2) ln(32 / (3 beta))
};

AccuracyBound theorem_alpha(double a_bound, double c_min, double beta);

// min(|pre-change slope|, |post-change slope|) for the geometry; the C that
// feeds theorem_alpha. Degenerate (p1 == p2) is rejected.
McEstimate min_slope_c(const SplitGeometry& geom, const GaussianSpec& p1,
                       const GaussianSpec& p2, const EstimatorOptions& opts,
                       RandomSource& rng);

}  // namespace drcusum
