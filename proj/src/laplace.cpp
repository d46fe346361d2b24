#include "ralab/laplace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "ralab/diffgraph.hpp"

namespace ralab {

using diff::Tape;
using diff::Unary;
using diff::Var;

void LaplaceConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("laplace config: beta must lie in (0, 1)");
  if (max_perturb_tries < 1) throw InvalidArgument("laplace config: max_perturb_tries must be >= 1");
  if (delta_int > 0.0 && riemann_step > 0.0 && !(riemann_step < delta_int))
    throw InvalidArgument("laplace config: riemann_step must be below delta_int");
}

double truncation_scale(Eigen::Index d) {
  const double ld = std::log(static_cast<double>(d));
  return std::sqrt(static_cast<double>(d)) * std::max(ld * ld, 1.0);
}

SmoothedDensityQuery SmoothedDensityQuery::at(const Vector& x, double beta) {
  const double s = truncation_scale(x.size());
  return {x, s, beta * s};
}

namespace {

diff::ScalarProgram objective_program(const InjectiveGeneratorSpec& spec, const Vector& x, double beta) {
  return [&spec, x, beta](Tape& t, Var z) {
    const Eigen::Index k = spec.latent_dim();
    Var h = t.reshape(z, 1, k);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      const Layer& layer = spec.layers[i];
      h = t.add_row(t.matmul_nt(h, t.constant(layer.weight)), t.constant(layer.bias.transpose()));
      if (i + 1 < spec.layers.size() || spec.activation_on_output) h = t.unary(h, Unary::forward(spec.activation));
    }
    const Var r = t.sub_row(h, t.constant(x.transpose()));
    return t.add(t.scale(t.sum(t.square(r)), -1.0 / (beta * beta)), t.scale(t.sum(t.square(z)), -1.0));
  };
}

void check_query(const InjectiveGeneratorSpec& spec, const Vector& x) {
  validate(spec);
  if (x.size() != spec.output_dim()) throw ShapeError("laplace: query dimension does not match generator output");
  if (!x.allFinite()) throw NonFiniteError("laplace: non-finite query point");
}

}  // namespace

InverseResult approximate_inverse(const InjectiveGeneratorSpec& spec, const Vector& x, double slack) {
  check_query(spec, x);
  Vector h = x;
  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    const Layer& layer = spec.layers[i];
    if (i + 1 < spec.layers.size() || spec.activation_on_output)
      h = h.unaryExpr([&](double y) { return spec.activation.inverse(y); });
    Eigen::ColPivHouseholderQR<Matrix> qr(layer.weight);
    if (qr.rank() < layer.weight.cols())
      throw NumericalError("approximate_inverse: layer " + std::to_string(i) + " is rank deficient");
    const Vector rhs = h - layer.bias;
    h = qr.solve(rhs);
  }
  InverseResult out;
  out.z = h;
  out.residual = (injective_forward(spec, h) - x).norm();
  out.flagged = slack > 0.0 && out.residual > slack;
  return out;
}

double laplace_objective(const InjectiveGeneratorSpec& spec, const Vector& x, double beta, const Vector& z) {
  check_query(spec, x);
  return diff::evaluate(objective_program(spec, x, beta), z);
}

Vector laplace_objective_gradient(const InjectiveGeneratorSpec& spec, const Vector& x, double beta, const Vector& z) {
  check_query(spec, x);
  return diff::gradient(objective_program(spec, x, beta), z);
}

Matrix laplace_objective_hessian(const InjectiveGeneratorSpec& spec, const Vector& x, double beta, const Vector& z) {
  check_query(spec, x);
  return diff::hessian(objective_program(spec, x, beta), z);
}

Vector refine_maximizer(const InjectiveGeneratorSpec& spec, const Vector& x, double beta, const Vector& z0,
                        std::size_t max_steps, double tolerance) {
  const auto program = objective_program(spec, x, beta);
  Vector z = z0;
  double fz = diff::evaluate(program, z);
  for (std::size_t s = 0; s < max_steps; ++s) {
    const Vector g = diff::gradient(program, z);
    if (g.norm() < tolerance) break;
    const Matrix h = diff::hessian(program, z);
    // Ascent direction from (-H + mu I) step = g with -H + mu I positive definite.
    Eigen::SelfAdjointEigenSolver<Matrix> es(-h);
    const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
    const double floor = 1e-10 * (1.0 + hi);
    const Vector shifted = es.eigenvalues().array().max(floor);
    const Vector step = es.eigenvectors() * ((es.eigenvectors().transpose() * g).array() / shifted.array()).matrix();
    double t = 1.0;
    Vector cand = z + step;
    double fc = diff::evaluate(program, cand);
    while (!(fc >= fz) && t > 1e-12) {
      t *= 0.5;
      cand = z + t * step;
      fc = diff::evaluate(program, cand);
    }
    if (!(fc >= fz)) break;
    const bool stalled = (cand - z).norm() <= 1e-15 * (1.0 + z.norm());
    z = cand;
    fz = fc;
    if (stalled) break;
  }
  return z;
}

double log_riemann_integral(double a, double lambda, double delta, double step) {
  if (!(delta > 0.0) || !(step > 0.0)) throw InvalidArgument("log_riemann_integral: delta and step must be positive");
  const double cells = std::ceil(2.0 * delta / step);
  if (cells > 5e7) throw InvalidArgument("log_riemann_integral: too many cells");
  const auto n = static_cast<long>(cells);
  const double h = 2.0 * delta / static_cast<double>(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (long j = 0; j < n; ++j) {
    const double c = -delta + (static_cast<double>(j) + 0.5) * h;
    peak = std::max(peak, c * a + c * c * lambda);
  }
  double sum = 0.0;
  for (long j = 0; j < n; ++j) {
    const double c = -delta + (static_cast<double>(j) + 0.5) * h;
    sum += std::exp(c * a + c * c * lambda - peak);
  }
  return peak + std::log(sum * h);
}

double smoothed_normalizer(Eigen::Index k, Eigen::Index d, double beta) {
  return -0.5 * static_cast<double>(k) * std::log(kPi) - 0.5 * static_cast<double>(d) * std::log(kPi * beta * beta);
}

LaplaceResult laplace_log_density(const InjectiveGeneratorSpec& spec, const SmoothedDensityQuery& query,
                                  const LaplaceConfig& config) {
  config.validate();
  check_query(spec, query.x);
  const Eigen::Index k = spec.latent_dim(), d = spec.output_dim();
  if (k > 16 || d > 32) throw InvalidArgument("laplace_log_density: supported up to k = 16, d = 32");
  const double beta = config.beta;

  LaplaceResult out;
  const InverseResult inv = approximate_inverse(spec, query.x, query.dx_slack);
  out.inverse_residual = inv.residual;
  out.z_hat = refine_maximizer(spec, query.x, beta, inv.z, config.newton_steps, config.newton_tolerance);
  if (query.dz_radius > 0.0 && out.z_hat.norm() > query.dz_radius)
    throw ConstraintViolation("laplace_log_density: z_hat outside D_z (|z| = " + std::to_string(out.z_hat.norm()) +
                              ")");

  const auto program = objective_program(spec, query.x, beta);
  out.f_at_z = diff::evaluate(program, out.z_hat);
  const Vector g = diff::gradient(program, out.z_hat);
  const Matrix h = diff::hessian(program, out.z_hat);
  const double b2 = beta * beta;
  const Matrix m = (h / b2).array().round().matrix() * b2;

  const double r = injectivity_constant(spec);
  if (!(r > 0.0)) throw NumericalError("laplace_log_density: generator is not quantitatively injective");
  out.delta_int = config.delta_int > 0.0
                      ? config.delta_int
                      : 100.0 * beta * std::log(1.0 / beta) * std::sqrt(static_cast<double>(d)) / r;
  const double step = config.riemann_step > 0.0 ? config.riemann_step : b2;
  if (!(step < out.delta_int)) throw InvalidArgument("laplace_log_density: riemann_step must be below delta_int");
  const double gap_target = config.eigengap_target > 0.0 ? config.eigengap_target : beta;

  Rng rng(derive_seed(config.seed, 0x1a91ace));
  std::normal_distribution<double> normal(0.0, 1.0 / beta);
  for (std::size_t attempt = 1; attempt <= config.max_perturb_tries; ++attempt) {
    Matrix e(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = i; j < k; ++j) e(i, j) = e(j, i) = normal(rng);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + e));
    if (es.info() != Eigen::Success) continue;
    const Vector& lam = es.eigenvalues();
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i + 1 < k; ++i) gap = std::min(gap, lam(i + 1) - lam(i));
    if (gap < gap_target) continue;
    out.perturb_try = attempt;
    out.eigengap = gap;
    out.eigenvalues = lam;
    out.integrals.resize(k);
    for (Eigen::Index i = 0; i < k; ++i)
      out.integrals(i) = log_riemann_integral(es.eigenvectors().col(i).dot(g), lam(i), out.delta_int, step);
    out.log_density = out.f_at_z + out.integrals.sum() + smoothed_normalizer(k, d, beta);
    return out;
  }
  throw NumericalError("laplace_log_density: eigengap " + std::to_string(gap_target) + " not reached after " +
                       std::to_string(config.max_perturb_tries) + " perturbations");
}

McResult mc_log_density_oracle(const InjectiveGeneratorSpec& spec, const SmoothedDensityQuery& query, double beta,
                               std::size_t n_mc, std::uint64_t seed, double proposal_scale) {
  check_query(spec, query.x);
  if (!(beta > 0.0)) throw InvalidArgument("mc oracle: beta must be positive");
  if (n_mc < 2) throw InvalidArgument("mc oracle: need at least two samples");
  const Eigen::Index k = spec.latent_dim(), d = spec.output_dim();
  if (k > 4) throw InvalidArgument("mc oracle: supported up to k = 4");

  const InverseResult inv = approximate_inverse(spec, query.x);
  const Vector center = refine_maximizer(spec, query.x, beta, inv.z, 50, 1e-6);
  const Matrix h = laplace_objective_hessian(spec, query.x, beta, center);
  Eigen::SelfAdjointEigenSolver<Matrix> es(-h);
  const Vector curv = es.eigenvalues().cwiseAbs().cwiseMax(1.0);
  const Matrix cov = proposal_scale * es.eigenvectors() * curv.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  const Eigen::LLT<Matrix> llt(cov);
  const Matrix lchol = llt.matrixL();
  const double logdet_cov = 2.0 * lchol.diagonal().array().log().sum();
  const double kk = static_cast<double>(k);

  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(n_mc);
  const Matrix noise = standard_normal(rng, n, k);
  Matrix z(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (uniform(rng, 0.0, 1.0) < 0.9)
      z.row(i) = (center + lchol * noise.row(i).transpose()).transpose();
    else
      z.row(i) = std::sqrt(0.5) * noise.row(i);
  }
  const Matrix gz = injective_forward_batch(spec, z);
  Vector logw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector zi = z.row(i).transpose();
    if (query.dz_radius > 0.0 && zi.norm() > query.dz_radius) {
      logw(i) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double f = -zi.squaredNorm() - (gz.row(i).transpose() - query.x).squaredNorm() / (beta * beta);
    const Vector dz = llt.matrixL().solve(zi - center);
    const double log_prop = -0.5 * dz.squaredNorm() - 0.5 * kk * kLog2Pi - 0.5 * logdet_cov;
    const double log_prior = -zi.squaredNorm() - 0.5 * kk * std::log(kPi);
    const double log_q = std::max(std::log(0.9) + log_prop, std::log(0.1) + log_prior) +
                         std::log1p(std::exp(-std::abs(std::log(0.9) + log_prop - std::log(0.1) - log_prior)));
    logw(i) = f - log_q;
  }
  const double peak = logw.maxCoeff();
  if (!std::isfinite(peak)) throw NumericalError("mc oracle: every sample fell outside D_z");
  const Vector w = (logw.array() - peak).exp().matrix();
  const double mw = w.mean();
  const double var = (w.array() - mw).square().sum() / static_cast<double>(n - 1);
  McResult out;
  out.value = peak + std::log(mw) + smoothed_normalizer(k, d, beta);
  out.stderr_ = std::sqrt(var / static_cast<double>(n)) / mw;
  out.ess = w.sum() * w.sum() / w.squaredNorm();
  out.reliable = out.ess >= 100.0;
  return out;
}

double linear_smoothed_log_density(const Matrix& a, const Vector& b, const Vector& x, double beta) {
  const Eigen::Index d = a.rows();
  if (b.size() != d || x.size() != d) throw ShapeError("linear_smoothed_log_density: dimension mismatch");
  GaussianSpec g{b, 0.5 * (a * a.transpose() + beta * beta * Matrix::Identity(d, d))};
  return log_density(g, x);
}

Sampler smoothed_sampler(Sampler base, double beta) {
  return [base = std::move(base), beta](std::size_t n, std::uint64_t seed) {
    Matrix x = base(n, derive_seed(seed, 0));
    const double radius = beta * truncation_scale(x.cols());
    Rng rng(derive_seed(seed, 1));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Vector xi;
      int tries = 0;
      do {
        xi = beta * standard_normal(rng, x.cols(), 1);
      } while (xi.norm() > radius && ++tries < 1000);
      if (xi.norm() > radius) xi *= radius / xi.norm();
      x.row(i) += xi.transpose();
    }
    return x;
  };
}

SmoothedIpmResult smoothed_ipm(const DiscriminatorFamily& family, const Sampler& p, const Sampler& q,
                               const std::vector<double>& beta_grid, const IpmConfig& config) {
  if (beta_grid.empty()) throw InvalidArgument("smoothed_ipm: empty beta grid");
  SmoothedIpmResult out;
  out.value = std::numeric_limits<double>::infinity();
  for (double beta : beta_grid) {
    if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("smoothed_ipm: every beta must lie in (0, 1)");
    IpmConfig cfg = config;
    cfg.seed = derive_seed(config.seed, std::bit_cast<std::uint64_t>(beta));
    IpmResult r = ipm_estimate(family, smoothed_sampler(p, beta), smoothed_sampler(q, beta), cfg);
    const double v = std::sqrt(r.value + beta * std::log(1.0 / beta));
    out.per_beta.push_back(v);
    out.ipm.push_back(std::move(r));
    if (v < out.value) {
      out.value = v;
      out.best_beta = beta;
    }
  }
  return out;
}

}  // namespace ralab
