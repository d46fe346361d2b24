#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "ralab/assignment.hpp"
#include "ralab/divergences.hpp"

using namespace ralab;

namespace {

Sampler gaussian_sampler(const GaussianSpec& g) {
  return [g](std::size_t n, std::uint64_t s) { return sample(g, n, s); };
}

GaussianSpec gauss1(double mu, double sd) { return {Vector::Constant(1, mu), Matrix::Constant(1, 1, sd * sd)}; }

GaussianSpec random_gaussian(Rng& rng, Eigen::Index d, double mean_scale, double s_lo, double s_hi) {
  const Matrix u = random_orthogonal(rng, d);
  Vector s(d);
  for (Eigen::Index i = 0; i < d; ++i) s(i) = uniform(rng, s_lo, s_hi);
  Matrix cov = u * s.array().square().matrix().asDiagonal() * u.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return {mean_scale * standard_normal(rng, d, 1), cov};
}

}  // namespace

TEST_CASE("assignment solver is optimal on small instances") {
  Rng rng(1);
  for (int s = 0; s < 50; ++s) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const Matrix c = standard_normal(rng, n, n).cwiseAbs();
    const std::vector<int> a = solve_assignment(c);
    double got = 0.0;
    for (int i = 0; i < n; ++i) got += c(i, a[i]);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
      double t = 0.0;
      for (int i = 0; i < n; ++i) t += c(i, perm[i]);
      best = std::min(best, t);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("w1_exact examples and errors") {
  Rng rng(2);
  const Matrix a = standard_normal(rng, 30, 3);
  CHECK(w1_exact(a, a) == 0.0);
  CHECK(w1_exact(Matrix::Zero(1, 1), Matrix::Ones(1, 1)) == 1.0);
  CHECK_THROWS_AS(w1_exact(a, a.topRows(10)), ShapeError);
  CHECK_THROWS_AS(w1_exact(Matrix::Zero(kMaxW1Batch + 1, 1), Matrix::Zero(kMaxW1Batch + 1, 1)), InvalidArgument);
  for (int s = 0; s < 30; ++s) {
    const Matrix p = standard_normal(rng, 6, 2), q = standard_normal(rng, 6, 2);
    CHECK(w1_exact(p, q) == oracle::w1_brute_force(p, q));
  }
}

TEST_CASE("w1_exact is a metric on batches") {
  Rng rng(3);
  for (int s = 0; s < 50; ++s) {
    const Matrix x = standard_normal(rng, 12, 2), y = standard_normal(rng, 12, 2), z = standard_normal(rng, 12, 2);
    CHECK(w1_exact(x, y) == w1_exact(y, x));
    CHECK(w1_exact(x, z) <= w1_exact(x, y) + w1_exact(y, z) + 1e-9);
    // permuting rows leaves the multiset unchanged
    Matrix xp = x;
    xp.row(0).swap(xp.row(5));
    CHECK(w1_exact(x, xp) == 0.0);
    CHECK(w1_exact(x, y) > 0.0);
  }
}

TEST_CASE("one-dimensional order statistics identity") {
  Rng rng(4);
  for (Eigen::Index n : {1, 7, 64, 512}) {
    const Matrix p = standard_normal(rng, n, 1);
    const Matrix q = standard_normal(rng, n, 1).array() + 0.3;
    CHECK(w1_exact(p, q) == oracle::w1_sorted_1d(p, q));
  }
  const Matrix p = standard_normal(rng, 300, 2), q = standard_normal(rng, 300, 2);
  CHECK(w1_subbatched(p, q, 100) == doctest::Approx((w1_exact(p.topRows(100), q.topRows(100)) + w1_exact(p.middleRows(100, 100), q.middleRows(100, 100)) + w1_exact(p.bottomRows(100), q.bottomRows(100))) / 3.0));
}

TEST_CASE("w2 and kl closed forms") {
  const GaussianSpec a{Vector::Zero(2), (Matrix(2, 2) << 1, 0, 0, 4).finished()};
  const GaussianSpec b{Vector::Zero(2), Matrix::Identity(2, 2)};
  CHECK(std::abs(w2_gaussian(a, b) - 1.0) < 1e-10);
  CHECK(w2_gaussian(a, a) < 1e-7);
  const GaussianSpec c{(Vector(2) << 3, 4).finished(), Matrix::Identity(2, 2)};
  CHECK(std::abs(w2_gaussian(b, c) - 5.0) < 1e-10);
  CHECK(kl_gaussian(a, a) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(kl_gaussian(gauss1(0, 1), gauss1(1, 1)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS(kl_gaussian(a, GaussianSpec{Vector::Zero(2), -Matrix::Identity(2, 2)}));

  Rng rng(5);
  const Matrix m = standard_normal(rng, 3, 3);
  const Matrix psd = m * m.transpose();
  const Matrix r = sqrtm_psd(psd);
  CHECK((r * r - psd).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("kl_empirical") {
  const GaussianSpec p = gauss1(0, 1), q = gauss1(1, 1);
  const LogDensityFn lp = [p](const Matrix& x) { return log_density_batch(p, x); };
  const LogDensityFn lq = [q](const Matrix& x) { return log_density_batch(q, x); };
  const Matrix x = sample(p, 1000000, 1);
  CHECK(kl_empirical(lp, lp, x).value == 0.0);
  CHECK(std::abs(kl_empirical(lp, lq, x).value - 0.5) < 0.005);
  const LogDensityFn broken = [](const Matrix& x) { return Vector::Constant(x.rows(), -INFINITY); };
  CHECK_THROWS_AS(kl_empirical(lp, broken, x.topRows(10)), NonFiniteError);

  Rng rng(6);
  int inside = 0;
  for (int s = 0; s < 20; ++s) {
    const GaussianSpec g1 = random_gaussian(rng, 2, 0.5, 0.7, 1.3), g2 = random_gaussian(rng, 2, 0.5, 0.7, 1.3);
    const Estimate e = kl_empirical([g1](const Matrix& z) { return log_density_batch(g1, z); },
                                    [g2](const Matrix& z) { return log_density_batch(g2, z); }, sample(g1, 200000, s));
    inside += std::abs(e.value - kl_gaussian(g1, g2)) <= 3 * e.stderr_;
    CHECK(e.value >= -3 * e.stderr_);
  }
  CHECK(inside >= 19);
}

TEST_CASE("exponential family identities") {
  const LogPartition a = LogPartition::unit_gaussian();
  Rng rng(7);
  for (int s = 0; s < 20; ++s) {
    const Vector t1 = standard_normal(rng, 3, 1), t2 = standard_normal(rng, 3, 1);
    const double kl = kl_expfamily(t1, t2, a);
    CHECK(kl == doctest::Approx(0.5 * (t1 - t2).squaredNorm()).epsilon(1e-13));
    CHECK(kl == doctest::Approx(kl_gaussian({t1, Matrix::Identity(3, 3)}, {t2, Matrix::Identity(3, 3)})).epsilon(1e-12));
    const double ipm = expfamily_ipm_closed(t1, t2, a);
    CHECK(ipm == doctest::Approx((t1 - t2).norm()).epsilon(1e-13));
    CHECK(std::sqrt(kl) <= ipm * (1 + 1e-12));
    CHECK(ipm <= std::sqrt(2.0 * kl) * (1 + 1e-12) + 1e-15);
  }
  CHECK(kl_expfamily(Vector::Ones(2), Vector::Ones(2), a) == 0.0);
  CHECK(expfamily_ipm_closed(Vector::Ones(2), Vector::Ones(2), a) == 0.0);
}

TEST_CASE("ipm estimate on one-dimensional gaussians") {
  const ReluFamily relu(1, 2.0);
  IpmConfig cfg;
  cfg.steps = 400;
  cfg.step_size = 1e-2;
  cfg.seed = 3;
  const IpmResult r = ipm_estimate(relu, gaussian_sampler(gauss1(0, 1)), gaussian_sampler(gauss1(1, 1)), cfg);
  const double grid = oracle::relu_ipm_grid_1d(0, 1, 1, 1, 2.0);
  CHECK(std::abs(r.value - grid) <= 3 * r.stderr_ + 0.02);

  for (std::uint64_t seed : {1, 2, 3}) {
    IpmConfig c = cfg;
    c.seed = seed;
    const Sampler p = gaussian_sampler(gauss1(0, 1));
    const IpmResult same = ipm_estimate(relu, p, p, c);
    CHECK(same.value <= 2 * same.stderr_);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    IpmConfig c = cfg;
    c.seed = seed;
    c.restarts = 2;
    c.steps = 200;
    const double near = ipm_estimate(relu, gaussian_sampler(gauss1(0, 1)), gaussian_sampler(gauss1(1, 1)), c).value;
    const double far = ipm_estimate(relu, gaussian_sampler(gauss1(0, 1)), gaussian_sampler(gauss1(2, 1)), c).value;
    CHECK(far > near);
  }
  // bit-identical reruns
  const IpmResult again = ipm_estimate(relu, gaussian_sampler(gauss1(0, 1)), gaussian_sampler(gauss1(1, 1)), cfg);
  CHECK(again.value == r.value);

  IpmConfig bad = cfg;
  bad.restarts = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("1-Lipschitz family stays below w1 on large batches") {
  const ReluFamily relu(2, 3.0);
  const GaussianSpec p{Vector::Zero(2), Matrix::Identity(2, 2)};
  const GaussianSpec q{(Vector(2) << 0.8, -0.3).finished(), 1.4 * Matrix::Identity(2, 2)};
  IpmConfig cfg;
  cfg.step_size = 1e-2;
  cfg.seed = 9;
  const IpmResult r = ipm_estimate(relu, gaussian_sampler(p), gaussian_sampler(q), cfg);
  const double w1 = w1_exact(sample(p, 2048, 1), sample(q, 2048, 2));
  CHECK(r.value <= w1 + 3 * r.stderr_);
}

TEST_CASE("gradient penalty regularization also works") {
  const ReluFamily relu(1, 2.0);
  IpmConfig cfg;
  cfg.regularization = Regularization::GradientPenalty;
  cfg.steps = 200;
  cfg.step_size = 1e-2;
  cfg.restarts = 2;
  const IpmResult r = ipm_estimate(relu, gaussian_sampler(gauss1(0, 1)), gaussian_sampler(gauss1(1, 1)), cfg);
  CHECK(r.value > 0.5);
}

TEST_CASE("rademacher complexity") {
  Rng rng(8);
  const Matrix x = standard_normal(rng, 100, 3);
  RademacherConfig cfg;
  cfg.draws = 5;
  CHECK(rademacher_estimate(ZeroFamily(3), x, cfg).value == 0.0);
  CHECK_THROWS_AS(rademacher_estimate(ZeroFamily(3), x, RademacherConfig{1, {}}), InvalidArgument);

  // linear unit-ball functionals: the inner sup is |(1/n) sum eps_i x_i|
  const LinearFamily lin(3);
  IpmConfig inner;
  inner.step_size = 1e-2;
  inner.steps = 300;
  for (int j = 0; j < 5; ++j) {
    Vector eps(100);
    for (Eigen::Index i = 0; i < 100; ++i) eps(i) = (rng() & 1 ? 1.0 : -1.0) / 100.0;
    const double analytic = (x.transpose() * eps).norm();
    CHECK(maximize_weighted_mean(lin, x, eps, inner).value == doctest::Approx(analytic).epsilon(1e-3));
  }

  // ~1/sqrt(n) scaling for the ReLU family
  const ReluFamily relu(3, 2.0);
  RademacherConfig rc;
  rc.draws = 20;
  rc.inner.step_size = 1e-2;
  rc.inner.steps = 200;
  rc.inner.restarts = 3;
  Rng r2(9);
  const double small = rademacher_estimate(relu, standard_normal(r2, 100, 3), rc).value;
  const double large = rademacher_estimate(relu, standard_normal(r2, 400, 3), rc).value;
  CHECK(small / large >= 1.6);
  CHECK(small / large <= 2.4);
}

TEST_CASE("sandwich and transport checks") {
  const GaussianSpec a{Vector::Zero(2), Matrix::Identity(2, 2)};
  const SandwichReport same = check_sandwich_gaussian(a, a, {0.0, 0.0});
  CHECK(same.lower_holds);
  CHECK(same.upper_holds);

  // spherical mean shift: IPM close to half the gap and below W1
  const GaussianSpec b{(Vector(2) << 1.0, 0.0).finished(), Matrix::Identity(2, 2)};
  const ReluFamily relu(2, 3.0);
  IpmConfig cfg;
  cfg.step_size = 1e-2;
  const IpmResult r = ipm_estimate(relu, gaussian_sampler(a), gaussian_sampler(b), cfg);
  const SandwichReport rep = check_sandwich_gaussian(a, b, {r.value, r.stderr_}, 1.0);
  CHECK(rep.lower_holds);
  CHECK(rep.upper_holds);
  CHECK(rep.upper_empirical_holds);
  CHECK(rep.w2 == doctest::Approx(1.0));

  CHECK(check_transport_inequality(0.5 + 0.5, 1.0, 1.0));  // symmetric KL of N(0,1), N(1,1)
  CHECK(check_transport_inequality(0.5, 1.0, 1.0));         // equality case
  CHECK_FALSE(check_transport_inequality(0.5, 1.0 + 1e-6, 1.0));
  CHECK(check_transport_inequality(0.0, 0.0, 1.0));
  CHECK_THROWS_AS(check_transport_inequality(1.0, 1.0, 0.0), InvalidArgument);
}

TEST_CASE("divergence report") {
  DivergenceReport rep;
  rep.ipm = {0.3, 0.01};
  rep.w1_exact = 0.5;
  rep.kl_forward = -0.001;
  CHECK(rep.nonnegative(0.01));
  CHECK_FALSE(rep.nonnegative(1e-4));
  const auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j.at("w1_exact").get<double>() == 0.5);
}
