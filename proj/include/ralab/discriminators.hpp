#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ralab/activation.hpp"
#include "ralab/core.hpp"
#include "ralab/diffgraph.hpp"
#include "ralab/generators.hpp"

namespace ralab {

// Standard normal cdf / pdf via erfc.
double normal_cdf(double a);
double normal_pdf(double a);
// R(a) = E[max(W + a, 0)], W ~ N(0, 1); equals a * Phi(a) + phi(a).
double expected_relu_standard(double a);

// ------------------------------------------------------------ ReLU family

// x -> max(v.x + b, 0) with |v| <= 1, |b| <= D.
struct ReluDiscSpec {
  Vector v;
  double b = 0.0;
};

double eval_relu_disc(const ReluDiscSpec& spec, const Vector& x);
// E_{X ~ N(mu, Sigma)} max(v.X + b, 0) in closed form.
double gaussian_expected_relu(const GaussianSpec& gauss, const Vector& v, double b);
ReluDiscSpec project_constraints(const ReluDiscSpec& spec, double mean_bound);

// ------------------------------------------------- Linear statistic family

// x -> <v, T(x)> with |v| <= 1 (T(x) = x for the shipped family).
struct LinearStatDiscSpec {
  Vector v;
};

double eval_linear_stat_disc(const LinearStatDiscSpec& spec, const Vector& x);

// --------------------------------------------------- Log-density networks

// Elementwise stand-in for log (sigma^{-1})'. Exact uses the closed form;
// Trainable is a one-hidden-layer tanh network y -> sum_j a_j tanh(w_j y + c_j) + e.
struct LogSigmaBranch {
  enum class Kind { Exact, Trainable };
  Kind kind = Kind::Exact;
  RowVector in_weight;   // w, 1 x h
  RowVector in_bias;     // c, 1 x h
  Vector out_weight;     // a, h x 1
  double out_bias = 0.0; // e

  static LogSigmaBranch exact() { return {}; }
  // Least-squares fit of the output layer to the exact branch on [-10, 10].
  static LogSigmaBranch fitted(const Activation& activation, int width = 16);

  double value(const Activation& activation, double y) const;
};

// f(x) = -1/2 <h_1, diag(gamma^-2) h_1> + sum_{k=2..l} <1, logsig(h_k)> + C + c0
// with h_l = W_l (x - b_l), h_k = W_k (sigma^{-1}(h_{k+1}) - b_k), and
// c0 = -(d/2) log 2 pi - sum log gamma_i carried analytically.
// Layers hold inverse-network weights: layer j is (W_j^{-1}, b_j) of the generator.
struct LogDensityNetSpec {
  std::vector<Layer> layers;
  double C = 0.0;
  Vector gamma;
  Activation activation = Activation::exact_leaky(0.5);
  LogSigmaBranch branch{};
  double weight_bound = 2.5;  // R_W
  double bias_bound = 5.0;    // R_b

  Eigen::Index dim() const { return gamma.size(); }
  std::size_t depth() const { return layers.size(); }
  // |C| <= l * d * log R_W.
  double constant_bound() const;
  double gaussian_normalizer() const;
};

LogDensityNetSpec build_logdensity_net(const InvertibleGeneratorSpec& generator,
                                       LogSigmaBranch branch = LogSigmaBranch::exact());
double eval_logdensity_net(const LogDensityNetSpec& spec, const Vector& x);
Vector eval_logdensity_net_batch(const LogDensityNetSpec& spec, const Matrix& points);
double eval_contrast(const LogDensityNetSpec& first, const LogDensityNetSpec& second, const Vector& x);
Vector eval_contrast_batch(const LogDensityNetSpec& first, const LogDensityNetSpec& second, const Matrix& points);
// Operator-norm clamp of every W_j to R_W (SVD), radial rescale of b_j to the
// R_b ball, clamp of C. Idempotent; returns the input unchanged when feasible.
LogDensityNetSpec project_constraints(const LogDensityNetSpec& spec);
bool satisfies_constraints(const LogDensityNetSpec& spec);

// Singular-value clamp; leaves w untouched when |w|_op <= bound.
Matrix clamp_operator_norm(const Matrix& w, double bound);
Vector clamp_norm(const Vector& v, double bound);

// ------------------------------------------------- Mixture of Gaussians

// f(x) = log sum_j w_j exp(mu_j . x + b_j).
struct MogBranch {
  Vector weights;  // k, in [exp(-B_w), 1]
  Matrix means;    // k x d, |mu_j| <= D
  Vector biases;   // k, in [-D^2, 0]

  double eval(const Vector& x) const;
};

// f_1 - f_2.
struct MogDiscSpec {
  MogBranch first;
  MogBranch second;
  double weight_floor_log = 5.0;  // B_w
  double mean_bound = 3.0;        // D
};

double eval_mog_disc(const MogDiscSpec& spec, const Vector& x);
MogDiscSpec project_constraints(const MogDiscSpec& spec);
// Branch with b_j = -|mu_j|^2 / 2: equals log p(x) + |x|^2/2 + (d/2) log 2 pi.
MogBranch mog_branch_from_mixture(const MixtureSpec& mixture);

// ------------------------------------------------------------ Vanilla MLP

// Untyped fully-connected net; used for the 2-50-50-1 and 50-10 variants.
struct MlpSpec {
  std::vector<Layer> layers;  // weight is out x in
  diff::Unary hidden = diff::Unary::relu();

  Vector eval_batch(const Matrix& points) const;
};

// ======================================================== Trainable families

// A discriminator family as seen by the optimizers: parameters are a flat
// list of dense blocks, build() records f(x) for every row of `batch` (n x d)
// and returns an n x 1 node, project() maps parameters back into the
// family's constraint set.
class DiscriminatorFamily {
 public:
  virtual ~DiscriminatorFamily() = default;
  virtual std::string name() const = 0;
  virtual Eigen::Index input_dim() const = 0;
  virtual ParamSet initialize(std::uint64_t seed) const = 0;
  virtual diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var batch) const = 0;
  virtual void project(ParamSet& params) const = 0;
  // Every member is 1-Lipschitz, so the family IPM is bounded by W1.
  virtual bool one_lipschitz() const { return false; }
};

// f(x) for every row of points.
Vector evaluate(const DiscriminatorFamily& family, const ParamSet& params, const Matrix& points);

class ReluFamily final : public DiscriminatorFamily {
 public:
  ReluFamily(Eigen::Index dim, double mean_bound) : dim_(dim), mean_bound_(mean_bound) {}
  std::string name() const override { return "relu"; }
  Eigen::Index input_dim() const override { return dim_; }
  ParamSet initialize(std::uint64_t seed) const override;
  diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var batch) const override;
  void project(ParamSet& params) const override;
  bool one_lipschitz() const override { return true; }

  static ParamSet to_params(const ReluDiscSpec& spec);
  static ReluDiscSpec to_spec(const ParamSet& params);

 private:
  Eigen::Index dim_;
  double mean_bound_;
};

class LinearFamily final : public DiscriminatorFamily {
 public:
  explicit LinearFamily(Eigen::Index dim) : dim_(dim) {}
  std::string name() const override { return "linear"; }
  Eigen::Index input_dim() const override { return dim_; }
  ParamSet initialize(std::uint64_t seed) const override;
  diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var batch) const override;
  void project(ParamSet& params) const override;
  bool one_lipschitz() const override { return true; }

 private:
  Eigen::Index dim_;
};

// The family {0}.
class ZeroFamily final : public DiscriminatorFamily {
 public:
  explicit ZeroFamily(Eigen::Index dim) : dim_(dim) {}
  std::string name() const override { return "zero"; }
  Eigen::Index input_dim() const override { return dim_; }
  ParamSet initialize(std::uint64_t) const override { return {}; }
  diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var batch) const override;
  void project(ParamSet&) const override {}
  bool one_lipschitz() const override { return true; }

 private:
  Eigen::Index dim_;
};

struct LogDensityFamilyOptions {
  Eigen::Index dim = 2;
  std::size_t depth = 2;
  Vector gamma;  // defaults to ones
  Activation activation = Activation::exact_leaky(0.5);
  double weight_bound = 2.5;
  double bias_bound = 5.0;
  LogSigmaBranch::Kind branch = LogSigmaBranch::Kind::Trainable;
  int branch_width = 16;
  // bound on |a|_1 + |e| for a trainable branch; <= 0 picks 2 * log(inverse_lipschitz),
  // widened if needed so the fitted initial branch is feasible
  double branch_bound = 0.0;
};

// { f_phi1 - f_phi2 : phi1, phi2 in Phi }.
class LogDensityContrastFamily final : public DiscriminatorFamily {
 public:
  explicit LogDensityContrastFamily(LogDensityFamilyOptions options);
  std::string name() const override { return "logdensity"; }
  Eigen::Index input_dim() const override { return options_.dim; }
  ParamSet initialize(std::uint64_t seed) const override;
  diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var batch) const override;
  void project(ParamSet& params) const override;

  const LogDensityFamilyOptions& options() const { return options_; }
  std::size_t params_per_net() const;
  ParamSet to_params(const LogDensityNetSpec& first, const LogDensityNetSpec& second) const;
  std::pair<LogDensityNetSpec, LogDensityNetSpec> to_specs(const ParamSet& params) const;

 private:
  diff::Var build_net(diff::Tape& tape, std::span<const diff::Var> params, diff::Var batch) const;
  void append_net(ParamSet& out, const LogDensityNetSpec& spec) const;
  LogDensityNetSpec net_from(std::span<const Matrix> params) const;

  LogDensityFamilyOptions options_;
};

class MogContrastFamily final : public DiscriminatorFamily {
 public:
  MogContrastFamily(Eigen::Index dim, Eigen::Index components, double weight_floor_log, double mean_bound)
      : dim_(dim), k_(components), weight_floor_log_(weight_floor_log), mean_bound_(mean_bound) {}
  std::string name() const override { return "mog"; }
  Eigen::Index input_dim() const override { return dim_; }
  ParamSet initialize(std::uint64_t seed) const override;
  diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var batch) const override;
  void project(ParamSet& params) const override;

  ParamSet to_params(const MogDiscSpec& spec) const;
  MogDiscSpec to_spec(const ParamSet& params) const;

 private:
  Eigen::Index dim_;
  Eigen::Index k_;
  double weight_floor_log_;
  double mean_bound_;
};

// Fully-connected net dims[0] -> ... -> dims.back() with weights kept in an
// operator-norm ball (vanilla WGAN clipping) or left free (bound <= 0).
class MlpFamily final : public DiscriminatorFamily {
 public:
  MlpFamily(std::vector<Eigen::Index> dims, diff::Unary hidden = diff::Unary::relu(), double weight_bound = 0.0);
  std::string name() const override { return "mlp"; }
  Eigen::Index input_dim() const override { return dims_.front(); }
  ParamSet initialize(std::uint64_t seed) const override;
  diff::Var build(diff::Tape& tape, std::span<const diff::Var> params, diff::Var batch) const override;
  void project(ParamSet& params) const override;

  MlpSpec to_spec(const ParamSet& params) const;
  const std::vector<Eigen::Index>& dims() const { return dims_; }

 private:
  std::vector<Eigen::Index> dims_;
  diff::Unary hidden_;
  double weight_bound_;
};

// Records an MLP forward pass (weights out x in, biases 1 x out) on a tape.
diff::Var build_mlp(diff::Tape& tape, std::span<const diff::Var> params, diff::Var batch, const diff::Unary& hidden);
ParamSet init_mlp(const std::vector<Eigen::Index>& dims, Rng& rng);

}  // namespace ralab
