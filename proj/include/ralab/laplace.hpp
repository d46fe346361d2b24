#pragma once

#include <cstdint>
#include <vector>

#include "ralab/core.hpp"
#include "ralab/discriminators.hpp"
#include "ralab/divergences.hpp"
#include "ralab/generators.hpp"

namespace ralab {

// Smoothed density of an injective generator:
//   p_beta(x) = pi^{-k/2} (pi beta^2)^{-d/2} int exp(-|z|^2 - |G(z) - x|^2 / beta^2) dz,
// i.e. z ~ N(0, I/2) pushed through G and convolved with N(0, beta^2/2 I).
struct LaplaceConfig {
  double beta = 0.1;
  double delta_int = 0.0;          // <= 0 selects 100 beta log(1/beta) sqrt(d) / R
  double riemann_step = 0.0;       // <= 0 selects beta^2
  double eigengap_target = 0.0;    // <= 0 selects beta
  std::size_t max_perturb_tries = 20;
  std::size_t newton_steps = 50;
  double newton_tolerance = 1e-6;  // on |grad f|
  std::uint64_t seed = 0;

  void validate() const;
};

struct SmoothedDensityQuery {
  Vector x;
  double dz_radius = 0.0;  // D_z: |z| <= sqrt(d) log^2 d
  double dx_slack = 0.0;   // D_x: within beta sqrt(d) log^2 d of the image

  // Radii from the ambient dimension; log^2 d is floored at 1 so that small d
  // keeps a usable region.
  static SmoothedDensityQuery at(const Vector& x, double beta);
};

double truncation_scale(Eigen::Index d);  // sqrt(d) * max(log^2 d, 1)

struct InverseResult {
  Vector z;
  double residual = 0.0;  // |G(z) - x|
  bool flagged = false;   // residual above the requested slack
};

// Layerwise least-squares inversion h_{i-1} = W_i^+ (sigma^{-1}(h_i) - b_i).
InverseResult approximate_inverse(const InjectiveGeneratorSpec& spec, const Vector& x, double slack = 0.0);

// f(z) = -|z|^2 - |G(z) - x|^2 / beta^2.
double laplace_objective(const InjectiveGeneratorSpec& spec, const Vector& x, double beta, const Vector& z);
Vector laplace_objective_gradient(const InjectiveGeneratorSpec& spec, const Vector& x, double beta, const Vector& z);
Matrix laplace_objective_hessian(const InjectiveGeneratorSpec& spec, const Vector& x, double beta, const Vector& z);

// Damped Newton ascent on f from z0; stops when |grad f| < tolerance.
Vector refine_maximizer(const InjectiveGeneratorSpec& spec, const Vector& x, double beta, const Vector& z0,
                        std::size_t max_steps, double tolerance);

// log int_{-delta}^{delta} exp(c a + c^2 lambda) dc by a midpoint Riemann sum in log space.
double log_riemann_integral(double a, double lambda, double delta, double step);

// -(k/2) log pi - (d/2) log(pi beta^2).
double smoothed_normalizer(Eigen::Index k, Eigen::Index d, double beta);

struct LaplaceResult {
  double log_density = 0.0;
  Vector z_hat;
  double f_at_z = 0.0;
  Vector integrals;           // I_i
  Vector eigenvalues;         // of the perturbed quadratic form
  double eigengap = 0.0;
  std::size_t perturb_try = 0;  // 1-based try that reached the gap
  double delta_int = 0.0;
  double inverse_residual = 0.0;
};

// f(z_hat) + sum_i I_i + normalizer, with I_i computed in the eigenbasis of
// (1/2)(M + E), M = Hessian rounded to multiples of beta^2, E a random
// symmetric Gaussian matrix with entry variance 1/beta^2, resampled until
// the eigengap target is met.
LaplaceResult laplace_log_density(const InjectiveGeneratorSpec& spec, const SmoothedDensityQuery& query,
                                  const LaplaceConfig& config);

struct McResult {
  double value = 0.0;  // log p_beta(x)
  double stderr_ = 0.0;
  double ess = 0.0;
  bool reliable = true;  // ess >= 100
};

// Importance sampling over D_z with proposal 0.9 N(z*, c (-H)^{-1}) + 0.1 N(0, I/2).
McResult mc_log_density_oracle(const InjectiveGeneratorSpec& spec, const SmoothedDensityQuery& query, double beta,
                               std::size_t n_mc, std::uint64_t seed, double proposal_scale = 1.5);

// Analytic smoothed log density of a linear generator G(z) = A z + b
// (identity activation): log N(x; b, (A A^T + beta^2 I) / 2).
double linear_smoothed_log_density(const Matrix& a, const Vector& b, const Vector& x, double beta);

struct SmoothedIpmResult {
  double value = 0.0;
  double best_beta = 0.0;
  std::vector<double> per_beta;  // sqrt(ipm + beta log(1/beta)) for each grid entry
  std::vector<IpmResult> ipm;
};

// Sampler for p_beta: samples plus N(0, beta^2 I) noise whose norm is kept
// below beta * truncation_scale(d) by rejection.
Sampler smoothed_sampler(Sampler base, double beta);

// min over the grid of sqrt(ipm(p_beta, q_beta) + beta log(1/beta)). The seed
// for each beta depends only on (config.seed, beta), so growing the grid never
// changes the values already computed.
SmoothedIpmResult smoothed_ipm(const DiscriminatorFamily& family, const Sampler& p, const Sampler& q,
                               const std::vector<double>& beta_grid, const IpmConfig& config);

}  // namespace ralab
