#include "drcusum/distributions.hpp"

#include "support.hpp"

#include <cmath>
#include <functional>

using namespace drcusum;

namespace {

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

GaussianSpec normal1(double mean, double variance = 1.0) {
  return GaussianSpec::isotropic(vec1(mean), variance);
}

// Plain Simpson rule on a fixed fine grid; deliberately independent of the
// library's adaptive quadrature.
double simpson(const std::function<double(double)>& f, double lo, double hi,
               int intervals) {
  const double h = (hi - lo) / intervals;
  double sum = f(lo) + f(hi);
  for (int i = 1; i < intervals; ++i) {
    sum += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

double kl_by_simpson(const Density& p, const Density& q, double lo, double hi) {
  return simpson(
      [&](double t) {
        const Eigen::VectorXd x = vec1(t);
        const double lp = p.log_pdf(x);
        return std::exp(lp) * (lp - q.log_pdf(x));
      },
      lo, hi, 20000);
}

}  // namespace

TEST_CASE(standard_normal_log_density_at_zero) {
  const double got = gaussian_log_pdf(normal1(0.0), vec1(0.0));
  CHECK_CLOSE(got, -0.5 * std::log(2.0 * M_PI), 1e-14);
}

TEST_CASE(gaussian_log_density_symmetry) {
  const GaussianSpec g = normal1(0.0);
  CHECK_CLOSE(gaussian_log_pdf(g, vec1(1.0)), gaussian_log_pdf(g, vec1(-1.0)),
              1e-15);
}

TEST_CASE(gaussian_log_density_at_mean_d2) {
  Eigen::VectorXd mu(2);
  mu << 3.0, -1.0;
  const GaussianSpec g = GaussianSpec::isotropic(mu);
  CHECK_CLOSE(gaussian_log_pdf(g, mu), -std::log(2.0 * M_PI), 1e-14);
}

TEST_CASE(full_covariance_agrees_with_diagonal) {
  Eigen::VectorXd mu(2);
  mu << 0.5, -0.5;
  Eigen::VectorXd vars(2);
  vars << 2.0, 0.5;
  const GaussianSpec diag = GaussianSpec::diagonal(mu, vars);
  const GaussianSpec full =
      GaussianSpec::full(mu, vars.asDiagonal().toDenseMatrix());
  Eigen::VectorXd x(2);
  x << 1.25, 0.75;
  CHECK_CLOSE(gaussian_log_pdf(diag, x), gaussian_log_pdf(full, x), 1e-12);
}

TEST_CASE(non_positive_definite_rejected) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd bad_vars(2);
  bad_vars << 1.0, 0.0;
  CHECK_THROWS(std::invalid_argument, GaussianSpec::diagonal(mu, bad_vars));
  Eigen::MatrixXd bad_cov(2, 2);
  bad_cov << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  CHECK_THROWS(std::invalid_argument, GaussianSpec::full(mu, bad_cov));
}

TEST_CASE(mixture_endpoints_equal_components) {
  const GaussianSpec a = normal1(0.0);
  const GaussianSpec b = normal1(3.0);
  for (double t : {-2.0, 0.0, 1.5, 4.0}) {
    const Eigen::VectorXd x = vec1(t);
    CHECK_CLOSE(mixture_log_pdf(MixtureSpec(1.0, a, b), x),
                gaussian_log_pdf(a, x), 1e-14);
    CHECK_CLOSE(mixture_log_pdf(MixtureSpec(0.0, a, b), x),
                gaussian_log_pdf(b, x), 1e-14);
    CHECK_CLOSE(mixture_log_pdf(MixtureSpec(0.5, a, a), x),
                gaussian_log_pdf(a, x), 1e-14);
  }
}

TEST_CASE(gaussian_kl_reference_values) {
  CHECK_CLOSE(gaussian_kl(normal1(0.0), normal1(0.0)), 0.0, 1e-15);
  CHECK_CLOSE(gaussian_kl(normal1(0.0), normal1(1.0)), 0.5, 1e-14);

  Eigen::VectorXd mu1 = Eigen::VectorXd::Zero(10);
  Eigen::VectorXd mu2 = Eigen::VectorXd::Constant(10, 0.5);
  CHECK_CLOSE(gaussian_kl(GaussianSpec::isotropic(mu1),
                          GaussianSpec::isotropic(mu2)),
              1.25, 1e-13);
}

TEST_CASE(gaussian_kl_nonnegative_property) {
  RandomSource rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(rng.uniform_index(5));
    Eigen::VectorXd m1(d), m2(d), v1(d), v2(d);
    for (int j = 0; j < d; ++j) {
      m1[j] = rng.uniform(-3, 3);
      m2[j] = rng.uniform(-3, 3);
      v1[j] = rng.uniform(0.2, 4.0);
      v2[j] = rng.uniform(0.2, 4.0);
    }
    const GaussianSpec p = GaussianSpec::diagonal(m1, v1);
    const GaussianSpec q = GaussianSpec::diagonal(m2, v2);
    CHECK(gaussian_kl(p, q) >= 0.0);
    CHECK_CLOSE(gaussian_kl(p, p), 0.0, 1e-12);
  }
}

TEST_CASE(kl_monte_carlo_identity_and_reference) {
  RandomSource rng(11);
  const McEstimate zero =
      kl_monte_carlo(Density(normal1(0.0)), Density(normal1(0.0)), 1000, rng);
  CHECK_CLOSE(zero.value, 0.0, 1e-12);

  const McEstimate half = kl_monte_carlo(Density(normal1(0.0)),
                                         Density(normal1(1.0)), 100000, rng);
  CHECK(std::abs(half.value - 0.5) <= 0.02);
  CHECK(std::abs(half.value - 0.5) <= 3.0 * half.std_error + 1e-3);
}

TEST_CASE(kl_monte_carlo_is_reproducible) {
  RandomSource r1(77);
  RandomSource r2(77);
  const Density p(MixtureSpec(0.5, normal1(0.0), normal1(3.0)));
  const Density q(normal1(0.0));
  const McEstimate a = kl_monte_carlo(p, q, 5000, r1);
  const McEstimate b = kl_monte_carlo(p, q, 5000, r2);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE(kl_monte_carlo_matches_quadrature_on_mixture) {
  const Density p(MixtureSpec(0.5, normal1(0.0), normal1(3.0)));
  const Density q(normal1(0.0));
  const double quad = kl_quadrature_1d(p, q);
  const double simp = kl_by_simpson(p, q, -12.0, 15.0);
  CHECK_CLOSE(quad, simp, 1e-6);

  RandomSource rng(13);
  const McEstimate mc = kl_monte_carlo(p, q, 200000, rng);
  CHECK(std::abs(mc.value - quad) <= 0.02);
}

TEST_CASE(f_weighted_kl_trivial_zeros) {
  RandomSource rng(3);
  const EstimatorOptions quad{KlEstimator::Quadrature1d, 0};
  const GaussianSpec a = normal1(0.0);
  const GaussianSpec b = normal1(2.0);

  CHECK_CLOSE(f_weighted_kl(1, 0.5, 0.3, a, a, quad, rng).value, 0.0, 1e-10);
  CHECK_CLOSE(f_weighted_kl(1, 0.7, 1.0, a, b, quad, rng).value, 0.0, 1e-10);
  CHECK_CLOSE(f_weighted_kl(2, 0.7, 0.0, a, b, quad, rng).value, 0.0, 1e-10);
}

TEST_CASE(f_weighted_kl_matches_simpson) {
  RandomSource rng(3);
  const EstimatorOptions quad{KlEstimator::Quadrature1d, 0};
  const GaussianSpec a = normal1(0.0);
  const GaussianSpec b = normal1(2.0);

  const double got = f_weighted_kl(1, 0.5, 0.5, a, b, quad, rng).value;
  const Density mix(MixtureSpec(0.5, a, b));
  const double want = (1.0 / 0.5) * kl_by_simpson(mix, Density(a), -12, 14) +
                      (0.5 / 0.5) * kl_by_simpson(Density(a), mix, -12, 14);
  CHECK_CLOSE(got, want, 1e-3);
  CHECK(got >= 0.0);
}

TEST_CASE(f_weighted_kl_rejects_bad_gamma) {
  RandomSource rng(3);
  const EstimatorOptions quad{KlEstimator::Quadrature1d, 0};
  const GaussianSpec a = normal1(0.0);
  CHECK_THROWS(std::invalid_argument, f_weighted_kl(1, 0.0, 0.5, a, a, quad, rng));
  CHECK_THROWS(std::invalid_argument, f_weighted_kl(1, 1.5, 0.5, a, a, quad, rng));
}

TEST_CASE(oracle_log_ratio_reference_points) {
  const Density p(normal1(0.0));
  const Density q(normal1(1.0));
  CHECK_CLOSE(oracle_log_ratio(p, p, vec1(0.7)), 0.0, 1e-15);
  CHECK_CLOSE(oracle_log_ratio(p, q, vec1(0.5)), 0.0, 1e-14);
  CHECK_CLOSE(oracle_log_ratio(p, q, vec1(0.0)), 0.5, 1e-14);
}

TEST_CASE(expected_log_ratio_zero_when_no_change) {
  RandomSource rng(9);
  const EstimatorOptions opts{KlEstimator::MonteCarlo, 2000};
  const GaussianSpec p = normal1(1.0);
  const SplitGeometry geom = split_geometry(500, 150, 250);
  CHECK_CLOSE(expected_log_ratio(geom, p, p, Region::PreChange, opts, rng).value,
              0.0, 1e-10);
  CHECK_CLOSE(
      expected_log_ratio(geom, p, p, Region::PostChange, opts, rng).value, 0.0,
      1e-10);
}

// Direct Monte-Carlo evaluation of the defining expectation: sample the
// region's law, average log(p_left/p_right) under the alpha-weighted window
// mixtures, compare against the closed-form combination of KL terms.
TEST_CASE(expected_log_ratio_matches_direct_mc) {
  RandomSource rng(42);
  const GaussianSpec p1 = normal1(0.0);
  const GaussianSpec p2 = normal1(1.0);
  const EstimatorOptions opts{KlEstimator::Quadrature1d, 0};

  for (int t_split : {100, 250, 400}) {
    const SplitGeometry geom = split_geometry(500, 150, t_split);
    const bool left_side = geom.side == SplitSide::LeftOfChange;
    const double lam_left = left_side ? 1.0 : *geom.alpha2;
    const double lam_right = left_side ? 1.0 - *geom.alpha1 : 0.0;
    auto mix = [&](double lam) {
      if (lam >= 1.0) return Density(p1);
      if (lam <= 0.0) return Density(p2);
      return Density(MixtureSpec(lam, p1, p2));
    };
    const Density left = mix(lam_left);
    const Density right = mix(lam_right);

    for (Region region : {Region::PreChange, Region::PostChange}) {
      const McEstimate closed =
          expected_log_ratio(geom, p1, p2, region, opts, rng);
      const GaussianSpec& law = region == Region::PreChange ? p1 : p2;
      const int samples = 200000;
      double sum = 0.0, sq = 0.0;
      for (int i = 0; i < samples; ++i) {
        const double v = oracle_log_ratio(left, right, law.sample(rng));
        sum += v;
        sq += v * v;
      }
      const double mean = sum / samples;
      const double se =
          std::sqrt(std::max(0.0, sq / samples - mean * mean) / samples);
      CHECK(std::abs(closed.value - mean) <= 3.0 * se + 1e-4);
      if (region == Region::PreChange) CHECK(closed.value > 0.0);
      if (region == Region::PostChange) CHECK(closed.value < 0.0);
    }
  }
}

TEST_CASE(expected_log_ratio_sign_dichotomy_property) {
  RandomSource rng(101);
  const EstimatorOptions opts{KlEstimator::Quadrature1d, 0};
  for (int trial = 0; trial < 12; ++trial) {
    const GaussianSpec p1 = normal1(rng.uniform(-1, 1), rng.uniform(0.4, 2.0));
    const GaussianSpec p2 = normal1(rng.uniform(1.5, 3), rng.uniform(0.4, 2.0));
    const int t_star = 100 + static_cast<int>(rng.uniform_index(200));
    const int t_split = 50 + static_cast<int>(rng.uniform_index(300));
    const SplitGeometry geom = split_geometry(400, t_star, t_split);
    CHECK(expected_log_ratio(geom, p1, p2, Region::PreChange, opts, rng).value >
          0.0);
    CHECK(expected_log_ratio(geom, p1, p2, Region::PostChange, opts, rng).value <
          0.0);
  }
}

TEST_CASE(theorem_alpha_reference_value) {
  const AccuracyBound b = theorem_alpha(2.0, 1.0, 0.1);
  CHECK_CLOSE(b.alpha, 8.0 * std::log(320.0 / 3.0), 1e-12);
  CHECK_CLOSE(b.alpha, 37.35757, 1e-4);
}

TEST_CASE(theorem_alpha_scaling_laws) {
  const double base = theorem_alpha(2.0, 1.0, 0.1).alpha;
  CHECK(theorem_alpha(2.0, 2.0, 0.1).alpha < base);   // larger C shrinks alpha
  CHECK_CLOSE(theorem_alpha(4.0, 1.0, 0.1).alpha, 4.0 * base, 1e-9);
}

TEST_CASE(theorem_alpha_domain) {
  CHECK_THROWS(std::invalid_argument, theorem_alpha(0.0, 1.0, 0.1));
  CHECK_THROWS(std::invalid_argument, theorem_alpha(1.0, 0.0, 0.1));
  CHECK_THROWS(std::invalid_argument, theorem_alpha(1.0, 1.0, 0.0));
  CHECK_THROWS(std::invalid_argument, theorem_alpha(1.0, 1.0, 1.0));
}

TEST_CASE(min_slope_c_degenerate_and_definition) {
  RandomSource rng(5);
  const EstimatorOptions opts{KlEstimator::Quadrature1d, 0};
  const GaussianSpec p = normal1(0.0);
  const GaussianSpec q = normal1(1.5);
  const SplitGeometry geom = split_geometry(500, 150, 250);

  CHECK_THROWS(std::invalid_argument, min_slope_c(geom, p, p, opts, rng));

  const double c = min_slope_c(geom, p, q, opts, rng).value;
  const double pre =
      expected_log_ratio(geom, p, q, Region::PreChange, opts, rng).value;
  const double post =
      expected_log_ratio(geom, p, q, Region::PostChange, opts, rng).value;
  CHECK_CLOSE(c, std::min(std::abs(pre), std::abs(post)), 1e-9);
  CHECK(c > 0.0);
}
