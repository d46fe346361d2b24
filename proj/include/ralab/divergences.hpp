#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "ralab/core.hpp"
#include "ralab/discriminators.hpp"
#include "ralab/generators.hpp"

namespace ralab {

// Draws n samples (rows) from a distribution; must be a pure function of seed.
using Sampler = std::function<Matrix(std::size_t n, std::uint64_t seed)>;
// Log density evaluated on every row of a batch.
using LogDensityFn = std::function<Vector(const Matrix&)>;

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

enum class Regularization { Clip, GradientPenalty };

struct IpmConfig {
  std::size_t restarts = 5;
  std::size_t steps = 500;
  double step_size = 1e-3;
  Regularization regularization = Regularization::Clip;
  double gp_coefficient = 10.0;
  std::size_t batch = 64;         // per-step minibatch from each side
  std::size_t train_pool = 2048;  // training samples drawn once per side
  std::size_t eval_batch = 4096;  // size of the validation and evaluation batches
  std::uint64_t seed = 0;

  void validate() const;
};

struct IpmResult {
  double value = 0.0;       // |E_p f - E_q f| on the held-out evaluation batch
  double stderr_ = 0.0;
  double validation = 0.0;  // contrast of the chosen restart on the validation batch
  std::size_t best_restart = 0;
  ParamSet params;          // maximizing discriminator
};

// sup over the family of |E_p f - E_q f|. Each restart runs projected (or
// penalized) RMSProp ascent on minibatches from a training pool, the restart
// with the largest validation contrast is kept and re-scored on a fresh
// evaluation batch disjoint from both.
IpmResult ipm_estimate(const DiscriminatorFamily& family, const Sampler& p, const Sampler& q, const IpmConfig& config);

// Full-batch maximization of |sum_i w_i f(x_i)| on fixed points by projected
// ascent with normalized gradient steps of length step_size; restarts and steps
// as in config (batch/pool sizes ignored). Returns the best value found.
struct WeightedMaxResult {
  double value = 0.0;
  ParamSet params;
};
WeightedMaxResult maximize_weighted_mean(const DiscriminatorFamily& family, const Matrix& points, const Vector& weights,
                                         const IpmConfig& config);

// Empirical IPM between two fixed samples (train = evaluation); stderr from
// the per-side variances of the maximizing discriminator.
IpmResult ipm_empirical(const DiscriminatorFamily& family, const Matrix& batch_p, const Matrix& batch_q,
                        const IpmConfig& config);

// |mean f(p) - mean f(q)| with stderr sqrt(var_p / n + var_q / m).
Estimate contrast(const Vector& fp, const Vector& fq);

// (1/n) min over permutations of sum ||x_i - y_pi(i)||, exact. Terms are
// summed in ascending order, so the value depends only on the matched set.
double w1_exact(const Matrix& batch_p, const Matrix& batch_q);
inline constexpr Eigen::Index kMaxW1Batch = 2048;
// Average of w1_exact over consecutive sub-batches of at most `cap` rows.
double w1_subbatched(const Matrix& batch_p, const Matrix& batch_q, Eigen::Index cap = 1024);

// Symmetric PSD square root by eigendecomposition; eigenvalues floored at 1e-12.
Matrix sqrtm_psd(const Matrix& a);
double w2_gaussian(const GaussianSpec& g1, const GaussianSpec& g2);
double kl_gaussian(const GaussianSpec& g1, const GaussianSpec& g2);

// mean of logp(x) - logq(x) over samples from p, with stderr.
Estimate kl_empirical(const LogDensityFn& logp, const LogDensityFn& logq, const Matrix& samples_from_p);

// Log-partition of an exponential family together with its gradient.
struct LogPartition {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;

  static LogPartition unit_gaussian();
};
// A(theta2) - A(theta1) - <grad A(theta1), theta2 - theta1>.
double kl_expfamily(const Vector& theta1, const Vector& theta2, const LogPartition& a);
// ||grad A(theta1) - grad A(theta2)||.
double expfamily_ipm_closed(const Vector& theta1, const Vector& theta2, const LogPartition& a);

struct RademacherConfig {
  std::size_t draws = 20;
  IpmConfig inner{};
};
// Average over sign draws of sup_f |(1/n) sum eps_i f(X_i)|.
Estimate rademacher_estimate(const DiscriminatorFamily& family, const Matrix& samples, const RademacherConfig& config);

struct SandwichReport {
  double ipm = 0.0;
  double ipm_stderr = 0.0;
  double w2 = 0.0;
  std::optional<double> w1_empirical;
  double lower_bound = 0.0;  // sigma_min / (2 sqrt(2 pi d) sigma_max) * W2
  double lower_margin = 0.0; // ipm - lower_bound
  double upper_margin = 0.0; // w2 - ipm
  bool lower_holds = false;  // ipm >= lower_bound - 3 stderr
  bool upper_holds = false;  // ipm <= w2 + 3 stderr (W1 <= W2)
  bool upper_empirical_holds = true;
};

// sigma_min / sigma_max are the extreme standard deviations over both covariances.
SandwichReport check_sandwich_gaussian(const GaussianSpec& g1, const GaussianSpec& g2, const Estimate& ipm,
                                       std::optional<double> w1_empirical = std::nullopt);

// w^2 <= 2 sigma2 kl_sym + tolerance.
bool check_transport_inequality(double kl_sym, double w_value, double sigma2, double tolerance = 1e-10);

struct DivergenceReport {
  Estimate ipm;
  double w1_exact = 0.0;
  std::optional<double> w2_closed;
  std::optional<double> kl_forward;
  std::optional<double> kl_backward;
  std::optional<Estimate> rademacher;
  std::size_t batch = 0;
  std::size_t eval_batch = 0;
  std::size_t restarts = 0;
  std::uint64_t seed = 0;

  // True when every reported distance is >= -tolerance.
  bool nonnegative(double tolerance) const;
  std::string to_json() const;
};

}  // namespace ralab
