#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "ralab/laplace.hpp"

using namespace ralab;

namespace {

InjectiveGeneratorSpec linear_generator(const Matrix& a, const Vector& b) {
  InjectiveGeneratorSpec g;
  g.activation = Activation::identity();
  g.activation_on_output = false;
  g.layers.push_back({a, b});
  return g;
}

// log N(x; b, (A A^T + beta^2 I) / 2), written out directly.
double linear_reference(const Matrix& a, const Vector& b, const Vector& x, double beta) {
  const Eigen::Index d = x.size();
  const Matrix cov = 0.5 * (a * a.transpose() + beta * beta * Matrix::Identity(d, d));
  const Vector r = x - b;
  return -0.5 * r.dot(cov.inverse() * r) - 0.5 * std::log(cov.determinant()) - 0.5 * static_cast<double>(d) * kLog2Pi;
}

InjectiveGeneratorSpec random_injective(Rng& rng, Eigen::Index k, Eigen::Index d) {
  InjectiveGeneratorSpec g;
  g.activation = Activation::smooth_leaky(0.5);
  const Eigen::Index mid = (k + d) / 2;
  g.layers.push_back({standard_normal(rng, mid, k) + Matrix::Identity(mid, k), 0.2 * standard_normal(rng, mid, 1)});
  g.layers.push_back({standard_normal(rng, d, mid) + Matrix::Identity(d, mid), 0.2 * standard_normal(rng, d, 1)});
  return g;
}

}  // namespace

TEST_CASE("truncation radii") {
  CHECK(truncation_scale(1) == doctest::Approx(1.0));
  CHECK(truncation_scale(3) == doctest::Approx(std::sqrt(3.0) * std::max(1.0, std::pow(std::log(3.0), 2))));
  CHECK(truncation_scale(20) == doctest::Approx(std::sqrt(20.0) * std::pow(std::log(20.0), 2)));
  const SmoothedDensityQuery q = SmoothedDensityQuery::at(Vector::Zero(3), 0.1);
  CHECK(q.dz_radius > 0.0);
  CHECK(q.dx_slack == doctest::Approx(0.1 * truncation_scale(3)));
}

TEST_CASE("approximate inverse") {
  Rng rng(1);
  for (int s = 0; s < 100; ++s) {
    const InjectiveGeneratorSpec g = random_injective(rng, 2, 4);
    const Vector z = standard_normal(rng, 2, 1);
    const Vector x = injective_forward(g, z);
    CHECK((approximate_inverse(g, x).z - z).norm() < 1e-8);
    Vector r = standard_normal(rng, 4, 1);
    r *= 1e-3 / r.norm();
    const InverseResult noisy = approximate_inverse(g, x + r);
    CHECK((noisy.z - z).norm() <= 1e-3 * inversion_constant(g));
  }

  // tall first layer followed by a square one
  const InjectiveGeneratorSpec fixed = oracle::laplace_instance();
  for (int s = 0; s < 20; ++s) {
    const Vector z = 0.6 * standard_normal(rng, 2, 1);
    const InverseResult r = approximate_inverse(fixed, injective_forward(fixed, z));
    CHECK((r.z - z).norm() < 1e-10);
    CHECK(r.residual < 1e-10);
  }

  const Matrix a = (Matrix(3, 2) << 1, 0, 0, 1, 0.5, -0.5).finished();
  const Vector b = (Vector(3) << 0.1, -0.2, 0.3).finished();
  const Vector x = (Vector(3) << 1.0, 2.0, -1.0).finished();
  const Vector ls = (a.transpose() * a).ldlt().solve(a.transpose() * (x - b));
  CHECK((approximate_inverse(linear_generator(a, b), x).z - ls).norm() < 1e-12);
  CHECK(approximate_inverse(linear_generator(a, b), x, 1e-6).flagged);
}

TEST_CASE("laplace objective and its derivatives") {
  const InjectiveGeneratorSpec g = oracle::laplace_instance();
  const Vector x0 = injective_forward(g, Vector::Zero(2));
  CHECK(laplace_objective(g, x0, 0.1, Vector::Zero(2)) == 0.0);

  Rng rng(2);
  const Vector z = 0.5 * standard_normal(rng, 2, 1);
  const Vector x = injective_forward(g, 0.7 * z) + 0.01 * standard_normal(rng, 3, 1);
  const auto f = [&](const Vector& v) { return laplace_objective(g, x, 0.1, v); };
  const Vector grad = laplace_objective_gradient(g, x, 0.1, z);
  CHECK((grad - oracle::fd_gradient(f, z, 1e-6)).norm() / grad.norm() < 1e-6);

  const Matrix h = laplace_objective_hessian(g, x, 0.1, z);
  Matrix fd(2, 2);
  for (int i = 0; i < 2; ++i) {
    Vector a = z, b = z;
    a(i) += 1e-5;
    b(i) -= 1e-5;
    fd.col(i) = (laplace_objective_gradient(g, x, 0.1, a) - laplace_objective_gradient(g, x, 0.1, b)) / 2e-5;
  }
  CHECK((h - fd).norm() / h.norm() < 1e-4);

  const Vector zs = refine_maximizer(g, x, 0.1, approximate_inverse(g, x).z, 50, 1e-6);
  CHECK(laplace_objective_gradient(g, x, 0.1, zs).norm() < 1e-6);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(laplace_objective_hessian(g, x, 0.1, zs));
  CHECK(eig.eigenvalues().maxCoeff() < 1e-6);
}

TEST_CASE("riemann integrals match adaptive quadrature") {
  Rng rng(3);
  for (int s = 0; s < 50; ++s) {
    const double a = uniform(rng, -20, 20);
    const double lambda = -std::exp(uniform(rng, std::log(0.1), std::log(500.0)));
    const double delta = uniform(rng, 0.05, 2.0);
    const double step = delta / 2000.0;
    const double got = log_riemann_integral(a, lambda, delta, step);
    // shift by the peak of the exponent for a stable reference
    const double cstar = std::clamp(-a / (2 * lambda), -delta, delta);
    const double peak = cstar * a + cstar * cstar * lambda;
    const double ref = std::log(oracle::adaptive_simpson([&](double c) { return std::exp(c * a + c * c * lambda - peak); },
                                                          -delta, delta, 1e-12)) + peak;
    CHECK(std::abs(std::expm1(got - ref)) < 1e-3);
  }
  CHECK_THROWS_AS(log_riemann_integral(0, -1, 1, 0), InvalidArgument);
}

TEST_CASE("linear generator matches the analytic convolution") {
  const Matrix a = (Matrix(2, 1) << 1.0, 0.6).finished();
  const Vector b = (Vector(2) << 0.2, -0.1).finished();
  const InjectiveGeneratorSpec g = linear_generator(a, b);
  Rng rng(4);
  for (int i = 0; i < 5; ++i) {
    const Vector x = b + a * uniform(rng, -1, 1) + 0.02 * standard_normal(rng, 2, 1);
    const double ref = linear_reference(a, b, x, 0.05);
    CHECK(linear_smoothed_log_density(a, b, x, 0.05) == doctest::Approx(ref).epsilon(1e-12));
    LaplaceConfig cfg;
    cfg.beta = 0.05;
    cfg.seed = 5;
    const LaplaceResult r = laplace_log_density(g, SmoothedDensityQuery::at(x, 0.05), cfg);
    CHECK(std::abs(r.log_density - ref) <= 0.05);
    const McResult mc = mc_log_density_oracle(g, SmoothedDensityQuery::at(x, 0.05), 0.05, 100000, 6);
    CHECK(std::abs(mc.value - ref) <= 3 * mc.stderr_);
  }
}

TEST_CASE("laplace error shrinks with beta and stays a lower bound") {
  const InjectiveGeneratorSpec g = oracle::laplace_instance();
  Rng rng(7);
  const Vector x = injective_forward(g, 0.6 * standard_normal(rng, 2, 1));
  std::vector<double> errs, excess;
  for (double beta : {0.1, 0.05, 0.02}) {
    LaplaceConfig cfg;
    cfg.beta = beta;
    cfg.seed = 1;
    const SmoothedDensityQuery q = SmoothedDensityQuery::at(x, beta);
    const double lap = laplace_log_density(g, q, cfg).log_density;
    const McResult mc = mc_log_density_oracle(g, q, beta, 200000, 8);
    REQUIRE(mc.reliable);
    errs.push_back(std::abs(lap - mc.value));
    excess.push_back(lap - mc.value - 3 * mc.stderr_);
  }
  CHECK(errs[2] < errs[0]);
  const double c = errs[0] / (0.1 * std::log(10.0));
  CHECK(errs[1] <= c * 0.05 * std::log(20.0));
  CHECK(errs[2] <= c * 0.02 * std::log(50.0));
  // approximate lower bound with the same constant
  CHECK(excess[0] <= c * 0.1 * std::log(10.0));
  CHECK(excess[1] <= c * 0.05 * std::log(20.0));
  CHECK(excess[2] <= c * 0.02 * std::log(50.0));
}

TEST_CASE("laplace determinism and errors") {
  const InjectiveGeneratorSpec g = oracle::laplace_instance();
  const Vector x = injective_forward(g, (Vector(2) << 0.3, -0.2).finished());
  LaplaceConfig cfg;
  cfg.beta = 0.05;
  cfg.seed = 42;
  const SmoothedDensityQuery q = SmoothedDensityQuery::at(x, 0.05);
  const LaplaceResult a = laplace_log_density(g, q, cfg), b = laplace_log_density(g, q, cfg);
  CHECK(a.log_density == b.log_density);
  CHECK(a.eigengap >= 0.05);
  CHECK(a.perturb_try >= 1);

  LaplaceConfig impossible = cfg;
  impossible.eigengap_target = 1e9;
  CHECK_THROWS_AS(laplace_log_density(g, q, impossible), NumericalError);
  const Vector far = injective_forward(g, (Vector(2) << 40.0, 0.0).finished());
  CHECK_THROWS_AS(laplace_log_density(g, SmoothedDensityQuery::at(far, 0.05), cfg), ConstraintViolation);
  LaplaceConfig bad = cfg;
  bad.beta = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("mc oracle scaling and diffuse limit") {
  const InjectiveGeneratorSpec g = oracle::laplace_instance();
  const Vector x = injective_forward(g, (Vector(2) << 0.1, 0.4).finished());
  const SmoothedDensityQuery q = SmoothedDensityQuery::at(x, 0.1);
  const McResult small = mc_log_density_oracle(g, q, 0.1, 20000, 1);
  const McResult large = mc_log_density_oracle(g, q, 0.1, 40000, 2);
  const double ratio = std::pow(small.stderr_ / large.stderr_, 2);
  CHECK(ratio >= 1.6);
  CHECK(ratio <= 2.4);

  const McResult diffuse = mc_log_density_oracle(g, SmoothedDensityQuery::at(x, 0.5), 0.5, 20000, 3);
  CHECK(std::isfinite(diffuse.value));
  // the smoothed density is bounded by the density of the noise alone, (pi beta^2)^{-d/2}
  CHECK(diffuse.value <= -1.5 * std::log(kPi * 0.25) + 3 * diffuse.stderr_);
  Rng rng(1);
  const InjectiveGeneratorSpec wide = random_injective(rng, 5, 6);
  CHECK_THROWS_AS(mc_log_density_oracle(wide, SmoothedDensityQuery::at(Vector::Zero(6), 0.1), 0.1, 100, 1), InvalidArgument);
}

TEST_CASE("smoothed ipm") {
  const ReluFamily relu(3, 2.0);
  const InjectiveGeneratorSpec g = oracle::laplace_instance();
  const Sampler p = [g](std::size_t n, std::uint64_t s) { return sample(g, n, s); };
  IpmConfig cfg;
  cfg.restarts = 2;
  cfg.steps = 150;
  cfg.step_size = 1e-2;
  cfg.eval_batch = 2048;
  const std::vector<double> grid{0.05, 0.1, 0.2};
  const SmoothedIpmResult same = smoothed_ipm(relu, p, p, grid, cfg);
  double floor = INFINITY;
  for (double b : grid) floor = std::min(floor, b * std::log(1 / b));
  double max_se = 0.0;
  for (const IpmResult& r : same.ipm) max_se = std::max(max_se, r.stderr_);
  CHECK(same.value <= std::sqrt(floor + 2 * max_se));

  const SmoothedIpmResult fewer = smoothed_ipm(relu, p, p, {0.1}, cfg);
  CHECK(same.value <= fewer.value);
  CHECK(same.per_beta[1] == fewer.per_beta[0]);

  const Sampler noisy = smoothed_sampler(p, 0.1);
  const Matrix xs = noisy(500, 3), base = p(500, derive_seed(3, 0));
  CHECK(((xs - base).rowwise().norm().array() <= 0.1 * truncation_scale(3) + 1e-12).all());

  int increasing = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    IpmConfig c = cfg;
    c.seed = seed;
    std::vector<double> vals;
    for (double shift : {0.1, 0.5, 1.0}) {
      const Sampler q = [g, shift](std::size_t n, std::uint64_t s) { return Matrix(sample(g, n, s).array() + shift); };
      vals.push_back(smoothed_ipm(relu, p, q, {0.1}, c).value);
    }
    increasing += vals[0] < vals[1] && vals[1] < vals[2];
  }
  CHECK(increasing == 10);
}
