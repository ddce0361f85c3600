#include "drcusum/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace drcusum {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_dim(int a, int b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a) + " vs " + std::to_string(b) +
                                ")");
  }
}

}  // namespace

GaussianSpec GaussianSpec::isotropic(Eigen::VectorXd mean, double variance) {
  const auto d = mean.size();
  return diagonal(std::move(mean), Eigen::VectorXd::Constant(d, variance));
}

GaussianSpec GaussianSpec::diagonal(Eigen::VectorXd mean,
                                    Eigen::VectorXd variances) {
  if (mean.size() < 1) {
    throw std::invalid_argument("gaussian needs dimension >= 1");
  }
  check_dim(static_cast<int>(mean.size()), static_cast<int>(variances.size()),
            "gaussian");
  if ((variances.array() <= 0.0).any()) {
    throw std::invalid_argument("covariance not positive definite");
  }
  GaussianSpec g;
  g.mean_ = std::move(mean);
  g.diagonal_ = true;
  g.var_ = std::move(variances);
  g.inv_sd_ = g.var_.array().sqrt().inverse().matrix();
  g.log_det_ = g.var_.array().log().sum();
  g.log_norm_ = -0.5 * (g.dim() * kLog2Pi + g.log_det_);
  return g;
}

GaussianSpec GaussianSpec::full(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
  if (mean.size() < 1) {
    throw std::invalid_argument("gaussian needs dimension >= 1");
  }
  check_dim(static_cast<int>(mean.size()), static_cast<int>(covariance.rows()),
            "gaussian");
  check_dim(static_cast<int>(covariance.rows()),
            static_cast<int>(covariance.cols()), "gaussian");
  if (!covariance.isApprox(covariance.transpose(), 1e-12)) {
    throw std::invalid_argument("covariance not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("covariance not positive definite");
  }
  GaussianSpec g;
  g.mean_ = std::move(mean);
  g.diagonal_ = false;
  g.chol_l_ = llt.matrixL();
  g.log_det_ = 2.0 * g.chol_l_.diagonal().array().log().sum();
  g.log_norm_ = -0.5 * (g.dim() * kLog2Pi + g.log_det_);
  return g;
}

const Eigen::VectorXd& GaussianSpec::variances() const {
  if (!diagonal_) {
    throw std::logic_error("variances() on a full-covariance gaussian");
  }
  return var_;
}

Eigen::MatrixXd GaussianSpec::covariance() const {
  if (diagonal_) {
    return var_.asDiagonal();
  }
  return chol_l_ * chol_l_.transpose();
}

double GaussianSpec::log_pdf(const Eigen::VectorXd& x) const {
  check_dim(static_cast<int>(x.size()), dim(), "log_pdf");
  double quad;
  if (diagonal_) {
    quad = ((x - mean_).array() * inv_sd_.array()).square().sum();
  } else {
    quad = chol_l_.triangularView<Eigen::Lower>().solve(x - mean_).squaredNorm();
  }
  return log_norm_ - 0.5 * quad;
}

Eigen::VectorXd GaussianSpec::sample(RandomSource& rng) const {
  Eigen::VectorXd z(dim());
  for (int i = 0; i < dim(); ++i) {
    z[i] = rng.normal();
  }
  if (diagonal_) {
    return (mean_.array() + var_.array().sqrt() * z.array()).matrix();
  }
  return mean_ + chol_l_ * z;
}

bool GaussianSpec::same_as(const GaussianSpec& other) const {
  if (dim() != other.dim()) return false;
  if (!(mean_.array() == other.mean_.array()).all()) return false;
  const Eigen::MatrixXd a = covariance();
  const Eigen::MatrixXd b = other.covariance();
  return (a.array() == b.array()).all();
}

MixtureSpec::MixtureSpec(double lam, GaussianSpec c1, GaussianSpec c2)
    : lambda(lam), comp1(std::move(c1)), comp2(std::move(c2)) {
  if (lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("mixture weight must lie in [0, 1]");
  }
  check_dim(comp1.dim(), comp2.dim(), "mixture");
}

double MixtureSpec::log_pdf(const Eigen::VectorXd& x) const {
  if (lambda == 1.0) return comp1.log_pdf(x);
  if (lambda == 0.0) return comp2.log_pdf(x);
  const double l1 = std::log(lambda) + comp1.log_pdf(x);
  const double l2 = std::log1p(-lambda) + comp2.log_pdf(x);
  const double m = std::max(l1, l2);
  return m + std::log(std::exp(l1 - m) + std::exp(l2 - m));
}

Eigen::VectorXd MixtureSpec::sample(RandomSource& rng) const {
  return rng.uniform01() < lambda ? comp1.sample(rng) : comp2.sample(rng);
}

GaussianMixture::GaussianMixture(std::vector<double> w,
                                 std::vector<GaussianSpec> c)
    : weights(std::move(w)), comps(std::move(c)) {
  if (comps.empty() || weights.size() != comps.size()) {
    throw std::invalid_argument("mixture needs matching weights and components");
  }
  double total = 0.0;
  for (double x : weights) {
    if (x < 0.0) throw std::invalid_argument("negative mixture weight");
    total += x;
  }
  if (total <= 0.0) {
    throw std::invalid_argument("mixture weights sum to zero");
  }
  for (double& x : weights) x /= total;
  for (const auto& g : comps) {
    check_dim(g.dim(), comps.front().dim(), "mixture");
  }
}

double GaussianMixture::log_pdf(const Eigen::VectorXd& x) const {
  double m = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    terms[i] = weights[i] > 0.0
                   ? std::log(weights[i]) + comps[i].log_pdf(x)
                   : -std::numeric_limits<double>::infinity();
    m = std::max(m, terms[i]);
  }
  double acc = 0.0;
  for (double t : terms) {
    acc += std::exp(t - m);
  }
  return m + std::log(acc);
}

Eigen::VectorXd GaussianMixture::sample(RandomSource& rng) const {
  const double u = rng.uniform01();
  double cum = 0.0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    cum += weights[i];
    if (u < cum) return comps[i].sample(rng);
  }
  return comps.back().sample(rng);
}

int Density::dim() const {
  return std::visit([](const auto& d) { return d.dim(); }, v_);
}

double Density::log_pdf(const Eigen::VectorXd& x) const {
  return std::visit([&](const auto& d) { return d.log_pdf(x); }, v_);
}

Eigen::VectorXd Density::sample(RandomSource& rng) const {
  return std::visit([&](auto& d) { return d.sample(rng); }, v_);
}

std::vector<GaussianSpec> Density::gaussian_leaves() const {
  struct Visitor {
    std::vector<GaussianSpec> operator()(const GaussianSpec& g) const {
      return {g};
    }
    std::vector<GaussianSpec> operator()(const MixtureSpec& m) const {
      return {m.comp1, m.comp2};
    }
    std::vector<GaussianSpec> operator()(const GaussianMixture& m) const {
      return m.comps;
    }
  };
  return std::visit(Visitor{}, v_);
}

double gaussian_log_pdf(const GaussianSpec& spec, const Eigen::VectorXd& x) {
  return spec.log_pdf(x);
}

double mixture_log_pdf(const MixtureSpec& mix, const Eigen::VectorXd& x) {
  return mix.log_pdf(x);
}

double gaussian_kl(const GaussianSpec& p, const GaussianSpec& q) {
  check_dim(p.dim(), q.dim(), "gaussian_kl");
  const int d = p.dim();
  if (p.is_diagonal() && q.is_diagonal()) {
    const auto& vp = p.variances().array();
    const auto& vq = q.variances().array();
    const auto dm = (q.mean() - p.mean()).array();
    return 0.5 * ((vp / vq).sum() + (dm.square() / vq).sum() - d +
                  vq.log().sum() - vp.log().sum());
  }
  const Eigen::MatrixXd sp = p.covariance();
  const Eigen::MatrixXd sq = q.covariance();
  Eigen::LLT<Eigen::MatrixXd> llt(sq);
  const Eigen::MatrixXd qi_sp = llt.solve(sp);
  const Eigen::VectorXd dm = q.mean() - p.mean();
  const double quad = dm.dot(llt.solve(dm));
  const double log_det_q =
      2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  Eigen::LLT<Eigen::MatrixXd> lltp(sp);
  const double log_det_p =
      2.0 * Eigen::MatrixXd(lltp.matrixL()).diagonal().array().log().sum();
  return 0.5 * (qi_sp.trace() + quad - d + log_det_q - log_det_p);
}

McEstimate kl_monte_carlo(const Density& p, const Density& q, int n_samples,
                          RandomSource& rng) {
  check_dim(p.dim(), q.dim(), "kl_monte_carlo");
  if (n_samples < 1) {
    throw std::invalid_argument("kl_monte_carlo needs n_samples >= 1");
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const Eigen::VectorXd x = p.sample(rng);
    const double r = p.log_pdf(x) - q.log_pdf(x);
    sum += r;
    sum_sq += r * r;
  }
  McEstimate est;
  est.value = sum / n_samples;
  if (n_samples > 1) {
    const double var =
        std::max(0.0, (sum_sq - sum * sum / n_samples) / (n_samples - 1));
    est.std_error = std::sqrt(var / n_samples);
  }
  return est;
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double b,
               double fa, double fm, double fb, double whole, double tol,
               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

}  // namespace

double kl_quadrature_1d(const Density& p, const Density& q) {
  if (p.dim() != 1 || q.dim() != 1) {
    throw std::invalid_argument("kl_quadrature_1d is for d == 1 only");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Density* den : {&p, &q}) {
    for (const GaussianSpec& g : den->gaussian_leaves()) {
      const double sd = std::sqrt(g.covariance()(0, 0));
      lo = std::min(lo, g.mean()[0] - 12.0 * sd);
      hi = std::max(hi, g.mean()[0] + 12.0 * sd);
    }
  }
  Eigen::VectorXd x(1);
  auto integrand = [&](double t) {
    x[0] = t;
    const double lp = p.log_pdf(x);
    return std::exp(lp) * (lp - q.log_pdf(x));
  };
  return adaptive_simpson(integrand, lo, hi, 1e-10);
}

McEstimate kl_estimate(const Density& p, const Density& q,
                       const EstimatorOptions& opts, RandomSource& rng) {
  if (opts.kind == KlEstimator::Quadrature1d) {
    return {kl_quadrature_1d(p, q), 0.0};
  }
  return kl_monte_carlo(p, q, opts.mc_samples, rng);
}

McEstimate f_weighted_kl(int i, double gamma, double lambda,
                         const GaussianSpec& p1, const GaussianSpec& p2,
                         const EstimatorOptions& opts, RandomSource& rng) {
  if (i != 1 && i != 2) {
    throw std::invalid_argument("f_weighted_kl: i must be 1 or 2");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("f_weighted_kl: gamma must lie in (0, 1]");
  }
  if (lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("f_weighted_kl: lambda must lie in [0, 1]");
  }
  const Density mix = MixtureSpec(lambda, p1, p2);
  const Density target = (i == 1) ? Density(p1) : Density(p2);
  const McEstimate t1 = kl_estimate(mix, target, opts, rng);
  const double w2 = (1.0 - gamma) / gamma;
  McEstimate t2{0.0, 0.0};
  if (w2 > 0.0) {
    t2 = kl_estimate(target, mix, opts, rng);
  }
  McEstimate out;
  out.value = t1.value / gamma + w2 * t2.value;
  out.std_error = std::sqrt((t1.std_error / gamma) * (t1.std_error / gamma) +
                            (w2 * t2.std_error) * (w2 * t2.std_error));
  return out;
}

double oracle_log_ratio(const Density& left, const Density& right,
                        const Eigen::VectorXd& x) {
  check_dim(left.dim(), right.dim(), "oracle_log_ratio");
  return left.log_pdf(x) - right.log_pdf(x);
}

McEstimate expected_log_ratio(const SplitGeometry& geom, const GaussianSpec& p1,
                              const GaussianSpec& p2, Region region,
                              const EstimatorOptions& opts, RandomSource& rng) {
  check_dim(p1.dim(), p2.dim(), "expected_log_ratio");
  if (geom.side == SplitSide::LeftOfChange) {
    if (!geom.alpha1.has_value() || *geom.alpha1 <= 0.0) {
      throw std::invalid_argument(
          "degenerate geometry: alpha1 undefined (change at the series end)");
    }
    const double a1 = *geom.alpha1;
    const double lam = 1.0 - a1;  // P_right = P(1 - alpha1)
    if (region == Region::PreChange) {
      const Density mix = MixtureSpec(lam, p1, p2);
      return kl_estimate(Density(p1), mix, opts, rng);
    }
    McEstimate f = f_weighted_kl(1, a1, lam, p1, p2, opts, rng);
    f.value = -f.value;
    return f;
  }
  if (!geom.alpha2.has_value() || *geom.alpha2 <= 0.0) {
    throw std::invalid_argument("degenerate geometry: alpha2 undefined");
  }
  const double a2 = *geom.alpha2;  // P_left = P(alpha2)
  if (region == Region::PreChange) {
    return f_weighted_kl(2, a2, a2, p1, p2, opts, rng);
  }
  const Density mix = MixtureSpec(a2, p1, p2);
  McEstimate kl = kl_estimate(Density(p2), mix, opts, rng);
  kl.value = -kl.value;
  return kl;
}

AccuracyBound theorem_alpha(double a_bound, double c_min, double beta) {
  if (!(a_bound > 0.0)) {
    throw std::invalid_argument("theorem_alpha: A must be positive");
  }
  if (!(c_min > 0.0)) {
    throw std::invalid_argument("theorem_alpha: C must be positive");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("theorem_alpha: beta must lie in (0, 1)");
  }
  AccuracyBound b;
  b.a_bound = a_bound;
  b.c_min = c_min;
  b.beta = beta;
  b.alpha = (2.0 * a_bound * a_bound / (c_min * c_min)) *
            std::log(32.0 / (3.0 * beta));
  return b;
}

McEstimate min_slope_c(const SplitGeometry& geom, const GaussianSpec& p1,
                       const GaussianSpec& p2, const EstimatorOptions& opts,
                       RandomSource& rng) {
  if (p1.same_as(p2)) {
    throw std::invalid_argument(
        "degenerate problem: p1 == p2, expected slope is zero");
  }
  const McEstimate pre =
      expected_log_ratio(geom, p1, p2, Region::PreChange, opts, rng);
  const McEstimate post =
      expected_log_ratio(geom, p1, p2, Region::PostChange, opts, rng);
  const double a = std::abs(pre.value);
  const double b = std::abs(post.value);
  return a <= b ? McEstimate{a, pre.std_error} : McEstimate{b, post.std_error};
}

}  // namespace drcusum
