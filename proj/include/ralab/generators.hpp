#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ralab/activation.hpp"
#include "ralab/core.hpp"

namespace ralab {

// N(mean, covariance).
struct GaussianSpec {
  Vector mean;
  Matrix covariance;

  Eigen::Index dim() const { return mean.size(); }
};

// Throws InvalidArgument unless covariance is symmetric positive definite and
// sized to match the mean.
void validate(const GaussianSpec& spec);
// Membership of the bounded-mean, well-conditioned class.
bool in_gaussian_class(const GaussianSpec& spec, double mean_bound, double sigma_min, double sigma_max);

double log_density(const GaussianSpec& spec, const Vector& x);
Vector log_density_batch(const GaussianSpec& spec, const Matrix& points);  // rows are points
Matrix sample(const GaussianSpec& spec, std::size_t n, std::uint64_t seed);

// sum_i w_i N(mu_i, I).
struct MixtureSpec {
  Vector weights;  // k
  Matrix means;    // k x d, one component mean per row

  Eigen::Index dim() const { return means.cols(); }
  Eigen::Index components() const { return weights.size(); }
};

// weight_floor_log is B_w: every weight must be >= exp(-B_w). Pass a negative
// value to skip the floor check.
void validate(const MixtureSpec& spec, double weight_floor_log = -1.0, double mean_bound = -1.0);
double log_density_mixture(const MixtureSpec& spec, const Vector& x);
Vector log_density_mixture_batch(const MixtureSpec& spec, const Matrix& points);
Matrix sample(const MixtureSpec& spec, std::size_t n, std::uint64_t seed);

// Unit-covariance Gaussian mean family: T(x) = x, A(theta) = |theta|^2 / 2,
// p_theta(x) = exp(<theta, x> - A(theta)) * N(0, I)(x). Curvature of A is
// exactly the identity, so gamma_curv = beta_curv = 1.
struct UnitGaussianMeanFamily {
  Vector theta;

  Eigen::Index dim() const { return theta.size(); }
  static double log_partition(const Vector& theta) { return 0.5 * theta.squaredNorm(); }
  static Vector log_partition_gradient(const Vector& theta) { return theta; }
  static Vector sufficient_statistic(const Vector& x) { return x; }
  static constexpr double curvature_lower = 1.0;
  static constexpr double curvature_upper = 1.0;

  double log_density(const Vector& x) const;
  Matrix sample(std::size_t n, std::uint64_t seed) const;
};

struct Layer {
  Matrix weight;
  Vector bias;
};

// Parameters of the constraint set Theta for invertible generators.
struct GeneratorConstraints {
  double weight_bound = 2.5;   // R_W: max(|W|_op, |W^{-1}|_op) <= R_W
  double bias_bound = 5.0;     // R_b: |b| <= R_b
  double c_sigma = 2.0;        // sigma' in [1/c_sigma, 1]
  double beta_sigma = 0.5;     // |(sigma^{-1})'' / (sigma^{-1})'| <= beta_sigma
  double min_latent_scale = 0.1;  // gamma_i in [delta, 1]

  friend bool operator==(const GeneratorConstraints&, const GeneratorConstraints&) = default;
};

// x = W_l sigma(W_{l-1} sigma(... sigma(W_1 z + b_1) ...) + b_{l-1}) + b_l,
// z ~ N(0, diag(gamma^2)). No activation after the last affine layer.
struct InvertibleGeneratorSpec {
  std::vector<Layer> layers;
  Vector gamma;
  Activation activation = Activation::exact_leaky(0.5);
  GeneratorConstraints constraints{};

  Eigen::Index dim() const { return gamma.size(); }
  std::size_t depth() const { return layers.size(); }
};

// Structural validity: square layers of matching size, finite, invertible
// (condition number below 1 / machine epsilon), gamma > 0.
void validate(const InvertibleGeneratorSpec& spec);
// Human-readable list of violated Theta constraints; empty when feasible.
std::vector<std::string> constraint_violations(const InvertibleGeneratorSpec& spec);

Vector invertible_forward(const InvertibleGeneratorSpec& spec, const Vector& z);
Matrix invertible_forward_batch(const InvertibleGeneratorSpec& spec, const Matrix& latents);
Vector invertible_inverse(const InvertibleGeneratorSpec& spec, const Vector& x);
Matrix invertible_inverse_batch(const InvertibleGeneratorSpec& spec, const Matrix& points);
double log_density_invertible(const InvertibleGeneratorSpec& spec, const Vector& x);
Vector log_density_invertible_batch(const InvertibleGeneratorSpec& spec, const Matrix& points);
// sum_k log|det W_k^{-1}|: the input-independent part of log|det dG^{-1}/dx|.
double inverse_log_det(const InvertibleGeneratorSpec& spec);
Matrix sample_latent(const InvertibleGeneratorSpec& spec, std::size_t n, std::uint64_t seed);
Matrix sample(const InvertibleGeneratorSpec& spec, std::size_t n, std::uint64_t seed);

// Ground-truth style layer weight: U diag(s) V^T with Haar U, V and
// s_i ~ U[s_lo, s_hi].
Matrix random_well_conditioned(Rng& rng, Eigen::Index d, double s_lo = 0.5, double s_hi = 2.0);

struct InjectiveRegularity {
  double R = 0.0;        // quantitative injectivity constant
  double L_G = 0.0;
  double L_sigma = 2.0;  // Lipschitz constant of sigma^{-1}
  double S = 0.0;
  double T = 0.0;
};

// G(z) = sigma(W_l sigma(... sigma(W_1 z + b_1) ...) + b_l) mapping R^k to R^d,
// each W_i tall (d_i x d_{i-1}, d_i >= d_{i-1}). With activation_on_output
// false the last affine layer is left linear. Latent prior is the e^{-|z|^2}
// law, i.e. N(0, I/2).
struct InjectiveGeneratorSpec {
  std::vector<Layer> layers;
  Activation activation = Activation::exact_leaky(0.5);
  bool activation_on_output = true;
  InjectiveRegularity regularity{};

  Eigen::Index latent_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
};

void validate(const InjectiveGeneratorSpec& spec);
Vector injective_forward(const InjectiveGeneratorSpec& spec, const Vector& z);
Matrix injective_forward_batch(const InjectiveGeneratorSpec& spec, const Matrix& latents);
Matrix sample_latent(const InjectiveGeneratorSpec& spec, std::size_t n, std::uint64_t seed);
Matrix sample(const InjectiveGeneratorSpec& spec, std::size_t n, std::uint64_t seed);
// L_sigma^{-l} * prod_j sigma_min(W_j).
double injectivity_constant(const InjectiveGeneratorSpec& spec);
// 2^l L_sigma^l prod_j 1 / sigma_min(W_j).
double inversion_constant(const InjectiveGeneratorSpec& spec);
// Fills R and L_G from the layer singular values.
InjectiveRegularity measured_regularity(const InjectiveGeneratorSpec& spec);

}  // namespace ralab
