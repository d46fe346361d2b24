#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ralab/core.hpp"
#include "ralab/diffgraph.hpp"
#include "ralab/discriminators.hpp"
#include "ralab/divergences.hpp"
#include "ralab/generators.hpp"
#include "ralab/optim.hpp"

namespace ralab {

struct PenaltyValue {
  double value = 0.0;
  ParamSet grads;  // d value / d params
};

// mean over interpolates x = t x_p + (1 - t) x_q, t ~ U[0, 1], of
// (|grad_x f(x)| - 1)^2. The parameter gradient is the directional derivative
// of sum_i c_i grad_x f(x_i) along u_i = grad_x f(x_i) / |grad_x f(x_i)|,
// taken as a central difference of parameter gradients with step fd_step.
PenaltyValue gradient_penalty(const DiscriminatorFamily& disc, const ParamSet& params, const Matrix& batch_p,
                              const Matrix& batch_q, std::uint64_t seed, double fd_step = 1e-5);

// A reparameterizable generator x = G_theta(z).
class GeneratorModel {
 public:
  virtual ~GeneratorModel() = default;
  virtual std::string name() const = 0;
  virtual Eigen::Index latent_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual Matrix sample_latent(std::size_t n, Rng& rng) const = 0;
  virtual diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var latent) const = 0;
  virtual void project(ParamSet& params) const = 0;
  // Log density of the generated distribution when it has a closed form.
  virtual std::optional<LogDensityFn> log_density(const ParamSet& params) const;

  Matrix generate(const ParamSet& params, const Matrix& latent) const;
  Matrix sample(const ParamSet& params, std::size_t n, std::uint64_t seed) const;
  Sampler sampler(const ParamSet& params) const;
};

// Invertible generator with trainable layers; projection keeps every layer's
// singular values in [1/R_W, R_W] and biases in the R_b ball.
class InvertibleGeneratorModel final : public GeneratorModel {
 public:
  InvertibleGeneratorModel(Eigen::Index dim, std::size_t depth, Vector gamma, Activation activation,
                           GeneratorConstraints constraints = {});
  std::string name() const override { return "invertible"; }
  Eigen::Index latent_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return dim_; }
  Matrix sample_latent(std::size_t n, Rng& rng) const override;
  diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var latent) const override;
  void project(ParamSet& params) const override;
  std::optional<LogDensityFn> log_density(const ParamSet& params) const override;

  ParamSet to_params(const InvertibleGeneratorSpec& spec) const;
  InvertibleGeneratorSpec to_spec(const ParamSet& params) const;

 private:
  Eigen::Index dim_;
  std::size_t depth_;
  Vector gamma_;
  Activation activation_;
  GeneratorConstraints constraints_;
};

// Fully-connected generator with N(0, I) latent and no density.
class MlpGeneratorModel final : public GeneratorModel {
 public:
  explicit MlpGeneratorModel(std::vector<Eigen::Index> dims, diff::Unary hidden = diff::Unary::relu());
  std::string name() const override { return "mlp"; }
  Eigen::Index latent_dim() const override { return dims_.front(); }
  Eigen::Index output_dim() const override { return dims_.back(); }
  Matrix sample_latent(std::size_t n, Rng& rng) const override;
  diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var latent) const override;
  void project(ParamSet&) const override {}
  ParamSet initialize(std::uint64_t seed) const;

 private:
  std::vector<Eigen::Index> dims_;
  diff::Unary hidden_;
};

// Generator family N(mu, I) in one or more dimensions, trained through mu.
class GaussianMeanModel final : public GeneratorModel {
 public:
  explicit GaussianMeanModel(Eigen::Index dim) : dim_(dim) {}
  std::string name() const override { return "gaussian_mean"; }
  Eigen::Index latent_dim() const override { return dim_; }
  Eigen::Index output_dim() const override { return dim_; }
  Matrix sample_latent(std::size_t n, Rng& rng) const override;
  diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var latent) const override;
  void project(ParamSet&) const override {}
  std::optional<LogDensityFn> log_density(const ParamSet& params) const override;

 private:
  Eigen::Index dim_;
};

struct TrainConfig {
  std::size_t batch = 64;
  std::size_t critic_steps = 10;
  RmsPropConfig critic_optimizer{};
  RmsPropConfig generator_optimizer{};
  Regularization regularization = Regularization::Clip;
  double gp_coefficient = 10.0;
  std::size_t total_gen_steps = 2000;
  std::size_t eval_every = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainRow {
  std::size_t step = 0;
  double ipm_train = 0.0;
  std::optional<double> ipm_eval;
  std::optional<double> kl;
  double wall_ms = 0.0;
};

struct TrainTrace {
  std::vector<TrainRow> rows;
  std::string metadata_json;

  // Header `step,ipm_train,ipm_eval,kl,wall_ms`; missing metrics are empty fields.
  std::string to_csv(bool include_wall = true) const;
  static TrainTrace from_csv(const std::string& csv);
};

// Raised when a loss or gradient turns non-finite; carries the rows logged so far.
class TrainingAborted : public NonFiniteError {
 public:
  TrainingAborted(const std::string& what, TrainTrace trace) : NonFiniteError(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

// Evaluation callbacks run every eval_every generator steps (and at step 0).
struct MetricHooks {
  std::function<std::optional<double>(const GeneratorModel&, const ParamSet&, std::uint64_t seed)> ipm_eval;
  std::function<std::optional<double>(const GeneratorModel&, const ParamSet&, std::uint64_t seed)> kl;
};

// ipm_eval via a cold-start ipm_estimate between target and generator; kl via
// kl_empirical(target || generator) on kl_samples target draws when both
// densities are available.
MetricHooks default_hooks(std::shared_ptr<const DiscriminatorFamily> eval_family, Sampler target,
                          std::optional<LogDensityFn> target_log_density, IpmConfig eval_config,
                          std::size_t kl_samples = 100000);

struct TrainResult {
  TrainTrace trace;
  ParamSet generator;
  ParamSet critic;
};

// Alternating WGAN loop: critic_steps ascent steps on E_p f - E_q f (with the
// family projection, plus the gradient penalty under GP), then one generator
// descent step through x = G(z).
TrainResult wgan_train(const GeneratorModel& model, ParamSet generator_init, const DiscriminatorFamily& critic,
                       const Sampler& target, const TrainConfig& config, const MetricHooks& hooks = {});

}  // namespace ralab
