#include "ralab/discriminators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ralab {

using diff::Tape;
using diff::Unary;
using diff::Var;

double normal_cdf(double a) { return 0.5 * std::erfc(-a / std::sqrt(2.0)); }

double normal_pdf(double a) { return std::exp(-0.5 * a * a) / std::sqrt(2.0 * kPi); }

double expected_relu_standard(double a) { return a * normal_cdf(a) + normal_pdf(a); }

// ------------------------------------------------------------------ ReLU

double eval_relu_disc(const ReluDiscSpec& spec, const Vector& x) {
  if (spec.v.size() != x.size()) throw ShapeError("relu discriminator: dimension mismatch");
  return std::max(spec.v.dot(x) + spec.b, 0.0);
}

double gaussian_expected_relu(const GaussianSpec& gauss, const Vector& v, double b) {
  validate(gauss);
  if (v.size() != gauss.dim()) throw ShapeError("gaussian_expected_relu: dimension mismatch");
  const double var = v.dot(gauss.covariance * v);
  if (!(var > 1e-300)) throw InvalidArgument("gaussian_expected_relu: degenerate projection variance");
  const double scale = std::sqrt(var);
  return scale * expected_relu_standard((v.dot(gauss.mean) + b) / scale);
}

Vector clamp_norm(const Vector& v, double bound) {
  const double n = v.norm();
  if (n > bound * (1.0 + 1e-12)) return v * (bound / n);
  return v;
}

ReluDiscSpec project_constraints(const ReluDiscSpec& spec, double mean_bound) {
  return {clamp_norm(spec.v, 1.0), std::clamp(spec.b, -mean_bound, mean_bound)};
}

double eval_linear_stat_disc(const LinearStatDiscSpec& spec, const Vector& x) {
  if (spec.v.size() != x.size()) throw ShapeError("linear discriminator: dimension mismatch");
  return spec.v.dot(x);
}

// ------------------------------------------------------- log-density net

LogSigmaBranch LogSigmaBranch::fitted(const Activation& activation, int width) {
  if (width < 2) throw InvalidArgument("log-sigma branch width must be >= 2");
  LogSigmaBranch br;
  br.kind = Kind::Trainable;
  br.in_weight = RowVector::Constant(width, 2.0);
  br.in_bias.resize(width);
  for (int j = 0; j < width; ++j) {
    const double centre = -10.0 + 20.0 * j / (width - 1);
    br.in_bias(j) = -br.in_weight(j) * centre;
  }
  const int grid = 2001;
  Matrix design(grid, width + 1);
  Vector target(grid);
  for (int i = 0; i < grid; ++i) {
    const double y = -10.0 + 20.0 * i / (grid - 1);
    for (int j = 0; j < width; ++j) design(i, j) = std::tanh(br.in_weight(j) * y + br.in_bias(j));
    design(i, width) = 1.0;
    target(i) = activation.log_inverse_derivative(y);
  }
  const Vector coef = design.colPivHouseholderQr().solve(target);
  br.out_weight = coef.head(width);
  br.out_bias = coef(width);
  return br;
}

double LogSigmaBranch::value(const Activation& activation, double y) const {
  if (kind == Kind::Exact) return activation.log_inverse_derivative(y);
  double out = out_bias;
  for (Eigen::Index j = 0; j < in_weight.size(); ++j) out += out_weight(j) * std::tanh(in_weight(j) * y + in_bias(j));
  return out;
}

double LogDensityNetSpec::constant_bound() const {
  return static_cast<double>(depth()) * static_cast<double>(dim()) * std::log(weight_bound);
}

double LogDensityNetSpec::gaussian_normalizer() const {
  return -0.5 * static_cast<double>(dim()) * kLog2Pi - gamma.array().log().sum();
}

LogDensityNetSpec build_logdensity_net(const InvertibleGeneratorSpec& generator, LogSigmaBranch branch) {
  validate(generator);
  const auto violations = constraint_violations(generator);
  if (!violations.empty()) throw ConstraintViolation("build_logdensity_net: " + violations.front());
  LogDensityNetSpec net;
  net.gamma = generator.gamma;
  net.activation = generator.activation;
  net.branch = std::move(branch);
  net.weight_bound = generator.constraints.weight_bound;
  net.bias_bound = generator.constraints.bias_bound;
  for (const Layer& layer : generator.layers) net.layers.push_back({layer.weight.inverse(), layer.bias});
  net.C = inverse_log_det(generator);
  return net;
}

namespace {

void validate_net(const LogDensityNetSpec& spec) {
  const Eigen::Index d = spec.dim();
  if (spec.layers.empty() || d == 0) throw InvalidArgument("log-density net: empty spec");
  for (const Layer& layer : spec.layers)
    if (layer.weight.rows() != d || layer.weight.cols() != d || layer.bias.size() != d)
      throw ShapeError("log-density net: layer shape mismatch");
}

Matrix branch_values(const LogDensityNetSpec& spec, const Matrix& h) {
  Matrix out(h.rows(), h.cols());
  for (Eigen::Index k = 0; k < h.size(); ++k) out.data()[k] = spec.branch.value(spec.activation, h.data()[k]);
  return out;
}

}  // namespace

Vector eval_logdensity_net_batch(const LogDensityNetSpec& spec, const Matrix& points) {
  validate_net(spec);
  if (points.cols() != spec.dim()) throw ShapeError("log-density net: dimension mismatch");
  const std::size_t l = spec.depth();
  Matrix h = (points.rowwise() - spec.layers[l - 1].bias.transpose()) * spec.layers[l - 1].weight.transpose();
  Vector logsig = Vector::Zero(points.rows());
  for (std::size_t k = l - 1; k-- > 0;) {
    logsig += branch_values(spec, h).rowwise().sum();
    Matrix u(h.rows(), h.cols());
    for (Eigen::Index i = 0; i < h.size(); ++i) u.data()[i] = spec.activation.inverse(h.data()[i]);
    h = (u.rowwise() - spec.layers[k].bias.transpose()) * spec.layers[k].weight.transpose();
  }
  const Vector inv_var = spec.gamma.array().square().inverse();
  const Vector quad = h.array().square().matrix() * inv_var;
  return (-0.5 * quad + logsig).array() + spec.C + spec.gaussian_normalizer();
}

double eval_logdensity_net(const LogDensityNetSpec& spec, const Vector& x) {
  return eval_logdensity_net_batch(spec, x.transpose())(0);
}

Vector eval_contrast_batch(const LogDensityNetSpec& first, const LogDensityNetSpec& second, const Matrix& points) {
  if (!satisfies_constraints(first) || !satisfies_constraints(second))
    throw ConstraintViolation("eval_contrast: parameters outside Phi");
  return eval_logdensity_net_batch(first, points) - eval_logdensity_net_batch(second, points);
}

double eval_contrast(const LogDensityNetSpec& first, const LogDensityNetSpec& second, const Vector& x) {
  return eval_contrast_batch(first, second, x.transpose())(0);
}

Matrix clamp_operator_norm(const Matrix& w, double bound) {
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= bound * (1.0 + 1e-12)) return w;
  const Vector clamped = s.cwiseMin(bound);
  return svd.matrixU() * clamped.asDiagonal() * svd.matrixV().transpose();
}

LogDensityNetSpec project_constraints(const LogDensityNetSpec& spec) {
  validate_net(spec);
  LogDensityNetSpec out = spec;
  for (Layer& layer : out.layers) {
    layer.weight = clamp_operator_norm(layer.weight, spec.weight_bound);
    layer.bias = clamp_norm(layer.bias, spec.bias_bound);
  }
  const double cb = spec.constant_bound();
  out.C = std::clamp(spec.C, -cb, cb);
  return out;
}

bool satisfies_constraints(const LogDensityNetSpec& spec) {
  validate_net(spec);
  const double tol = 1e-9;
  for (const Layer& layer : spec.layers) {
    Eigen::JacobiSVD<Matrix> svd(layer.weight);
    if (svd.singularValues()(0) > spec.weight_bound * (1.0 + tol)) return false;
    if (layer.bias.norm() > spec.bias_bound * (1.0 + tol)) return false;
  }
  return std::abs(spec.C) <= spec.constant_bound() * (1.0 + tol) + tol;
}

// ------------------------------------------------------------------- MoG

double MogBranch::eval(const Vector& x) const {
  if (means.cols() != x.size() || means.rows() != weights.size() || biases.size() != weights.size())
    throw ShapeError("mog discriminator: dimension mismatch");
  const Vector terms = weights.array().log().matrix() + means * x + biases;
  return log_sum_exp(terms);
}

double eval_mog_disc(const MogDiscSpec& spec, const Vector& x) { return spec.first.eval(x) - spec.second.eval(x); }

namespace {
MogBranch project_branch(const MogBranch& br, double weight_floor_log, double mean_bound) {
  MogBranch out = br;
  const double floor = std::exp(-weight_floor_log);
  out.weights = br.weights.cwiseMax(floor).cwiseMin(1.0);
  for (Eigen::Index j = 0; j < br.means.rows(); ++j) out.means.row(j) = clamp_norm(br.means.row(j).transpose(), mean_bound).transpose();
  out.biases = br.biases.cwiseMax(-mean_bound * mean_bound).cwiseMin(0.0);
  return out;
}
}  // namespace

MogDiscSpec project_constraints(const MogDiscSpec& spec) {
  MogDiscSpec out = spec;
  out.first = project_branch(spec.first, spec.weight_floor_log, spec.mean_bound);
  out.second = project_branch(spec.second, spec.weight_floor_log, spec.mean_bound);
  return out;
}

MogBranch mog_branch_from_mixture(const MixtureSpec& mixture) {
  validate(mixture);
  MogBranch br;
  br.weights = mixture.weights;
  br.means = mixture.means;
  br.biases = -0.5 * mixture.means.rowwise().squaredNorm();
  return br;
}

// ------------------------------------------------------------------- MLP

Vector MlpSpec::eval_batch(const Matrix& points) const {
  Matrix h = points;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = (h * layers[i].weight.transpose()).rowwise() + layers[i].bias.transpose();
    if (i + 1 < layers.size())
      for (Eigen::Index k = 0; k < h.size(); ++k) h.data()[k] = hidden.value(h.data()[k]);
  }
  if (h.cols() != 1) throw ShapeError("mlp: output layer must have width 1");
  return h.col(0);
}

// ====================================================== trainable families

Vector evaluate(const DiscriminatorFamily& family, const ParamSet& params, const Matrix& points) {
  Tape tape;
  const Var x = tape.constant(points);
  std::vector<Var> pv;
  pv.reserve(params.size());
  for (const Matrix& p : params) pv.push_back(tape.constant(p));
  return tape.value(family.build(tape, pv, x)).col(0);
}

namespace {
void require_params(std::span<const Var> params, std::size_t n, const std::string& family) {
  if (params.size() != n)
    throw InvalidArgument(family + ": expected " + std::to_string(n) + " parameter blocks, got " +
                          std::to_string(params.size()));
}
void require_params(const ParamSet& params, std::size_t n, const std::string& family) {
  if (params.size() != n)
    throw InvalidArgument(family + ": expected " + std::to_string(n) + " parameter blocks, got " +
                          std::to_string(params.size()));
}
Vector random_in_ball(Rng& rng, Eigen::Index d, double radius) {
  Vector v = standard_normal(rng, d, 1);
  v *= radius * std::pow(uniform(rng, 0.0, 1.0), 1.0 / static_cast<double>(d)) / v.norm();
  return v;
}
}  // namespace

ParamSet ReluFamily::initialize(std::uint64_t seed) const {
  Rng rng(seed);
  Matrix b(1, 1);
  Vector v = standard_normal(rng, dim_, 1);
  v /= v.norm();
  b(0, 0) = uniform(rng, -mean_bound_, mean_bound_);
  return {v, b};
}

Var ReluFamily::build(Tape& tape, std::span<const Var> params, Var batch) const {
  require_params(params, 2, "relu family");
  return tape.relu(tape.add_scalar(tape.matmul(batch, params[0]), params[1]));
}

void ReluFamily::project(ParamSet& params) const {
  require_params(params, 2, "relu family");
  params[0] = clamp_norm(params[0].col(0), 1.0);
  params[1](0, 0) = std::clamp(params[1](0, 0), -mean_bound_, mean_bound_);
}

ParamSet ReluFamily::to_params(const ReluDiscSpec& spec) {
  Matrix b(1, 1);
  b(0, 0) = spec.b;
  return {spec.v, b};
}

ReluDiscSpec ReluFamily::to_spec(const ParamSet& params) {
  require_params(params, 2, "relu family");
  return {params[0].col(0), params[1](0, 0)};
}

ParamSet LinearFamily::initialize(std::uint64_t seed) const {
  Rng rng(seed);
  return {random_in_ball(rng, dim_, 1.0)};
}

Var LinearFamily::build(Tape& tape, std::span<const Var> params, Var batch) const {
  require_params(params, 1, "linear family");
  return tape.matmul(batch, params[0]);
}

void LinearFamily::project(ParamSet& params) const {
  require_params(params, 1, "linear family");
  params[0] = clamp_norm(params[0].col(0), 1.0);
}

Var ZeroFamily::build(Tape& tape, std::span<const Var>, Var batch) const {
  return tape.scale(tape.row_sum(batch), 0.0);
}

// ---------------------------------------------- LogDensityContrastFamily

LogDensityContrastFamily::LogDensityContrastFamily(LogDensityFamilyOptions options) : options_(std::move(options)) {
  if (options_.dim < 1 || options_.depth < 1) throw InvalidArgument("logdensity family: dim and depth must be >= 1");
  if (options_.gamma.size() == 0) options_.gamma = Vector::Ones(options_.dim);
  if (options_.gamma.size() != options_.dim) throw ShapeError("logdensity family: gamma size mismatch");
  if (options_.branch == LogSigmaBranch::Kind::Trainable && !(options_.branch_bound > 0.0)) {
    const LogSigmaBranch fit = LogSigmaBranch::fitted(options_.activation, options_.branch_width);
    const double fitted = fit.out_weight.cwiseAbs().sum() + std::abs(fit.out_bias);
    options_.branch_bound = std::max(2.0 * std::log(options_.activation.inverse_lipschitz()), 1.01 * fitted);
  }
}

std::size_t LogDensityContrastFamily::params_per_net() const {
  return 2 * options_.depth + 1 + (options_.branch == LogSigmaBranch::Kind::Trainable ? 4 : 0);
}

void LogDensityContrastFamily::append_net(ParamSet& out, const LogDensityNetSpec& spec) const {
  if (spec.depth() != options_.depth || spec.dim() != options_.dim)
    throw ShapeError("logdensity family: spec does not match family shape");
  for (const Layer& layer : spec.layers) out.push_back(layer.weight);
  for (const Layer& layer : spec.layers) out.push_back(layer.bias.transpose());
  out.push_back(Matrix::Constant(1, 1, spec.C));
  if (options_.branch == LogSigmaBranch::Kind::Trainable) {
    if (spec.branch.kind != LogSigmaBranch::Kind::Trainable)
      throw InvalidArgument("logdensity family: trainable family needs a trainable branch");
    out.push_back(spec.branch.in_weight);
    out.push_back(spec.branch.in_bias);
    out.push_back(spec.branch.out_weight);
    out.push_back(Matrix::Constant(1, 1, spec.branch.out_bias));
  }
}

ParamSet LogDensityContrastFamily::to_params(const LogDensityNetSpec& first, const LogDensityNetSpec& second) const {
  ParamSet out;
  append_net(out, first);
  append_net(out, second);
  return out;
}

LogDensityNetSpec LogDensityContrastFamily::net_from(std::span<const Matrix> p) const {
  const std::size_t l = options_.depth;
  LogDensityNetSpec net;
  net.gamma = options_.gamma;
  net.activation = options_.activation;
  net.weight_bound = options_.weight_bound;
  net.bias_bound = options_.bias_bound;
  for (std::size_t j = 0; j < l; ++j) net.layers.push_back({p[j], p[l + j].row(0).transpose()});
  net.C = p[2 * l](0, 0);
  if (options_.branch == LogSigmaBranch::Kind::Trainable) {
    net.branch.kind = LogSigmaBranch::Kind::Trainable;
    net.branch.in_weight = p[2 * l + 1].row(0);
    net.branch.in_bias = p[2 * l + 2].row(0);
    net.branch.out_weight = p[2 * l + 3].col(0);
    net.branch.out_bias = p[2 * l + 4](0, 0);
  }
  return net;
}

std::pair<LogDensityNetSpec, LogDensityNetSpec> LogDensityContrastFamily::to_specs(const ParamSet& params) const {
  const std::size_t m = params_per_net();
  require_params(params, 2 * m, "logdensity family");
  const std::span<const Matrix> all(params);
  return {net_from(all.subspan(0, m)), net_from(all.subspan(m, m))};
}

ParamSet LogDensityContrastFamily::initialize(std::uint64_t seed) const {
  Rng rng(seed);
  const Eigen::Index d = options_.dim;
  const LogSigmaBranch branch = options_.branch == LogSigmaBranch::Kind::Trainable
                                    ? LogSigmaBranch::fitted(options_.activation, options_.branch_width)
                                    : LogSigmaBranch::exact();
  ParamSet out;
  for (int net_index = 0; net_index < 2; ++net_index) {
    LogDensityNetSpec net;
    net.gamma = options_.gamma;
    net.activation = options_.activation;
    net.weight_bound = options_.weight_bound;
    net.bias_bound = options_.bias_bound;
    net.branch = branch;
    for (std::size_t j = 0; j < options_.depth; ++j) {
      Matrix w = Matrix::Identity(d, d) + 0.1 * standard_normal(rng, d, d);
      Vector b = 0.1 * standard_normal(rng, d, 1);
      net.layers.push_back({w, b});
    }
    append_net(out, project_constraints(net));
  }
  return out;
}

Var LogDensityContrastFamily::build_net(Tape& tape, std::span<const Var> p, Var batch) const {
  const std::size_t l = options_.depth;
  const Activation& act = options_.activation;
  const Eigen::Index n = tape.value(batch).rows();
  const Eigen::Index d = options_.dim;

  auto logsig_sum = [&](Var h) {
    if (options_.branch == LogSigmaBranch::Kind::Exact)
      return tape.row_sum(tape.unary(h, Unary::log_inverse_derivative(act)));
    const Var flat = tape.reshape(h, n * d, 1);
    const Var hidden = tape.unary(tape.add_row(tape.matmul(flat, p[2 * l + 1]), p[2 * l + 2]), Unary::tanh());
    const Var out = tape.add_scalar(tape.matmul(hidden, p[2 * l + 3]), p[2 * l + 4]);
    return tape.row_sum(tape.reshape(out, n, d));
  };

  Var h = tape.matmul_nt(tape.sub_row(batch, p[2 * l - 1]), p[l - 1]);
  Var logsig{};
  bool have_logsig = false;
  for (std::size_t k = l - 1; k-- > 0;) {
    const Var term = logsig_sum(h);
    logsig = have_logsig ? tape.add(logsig, term) : term;
    have_logsig = true;
    const Var u = tape.unary(h, Unary::inverse(act));
    h = tape.matmul_nt(tape.sub_row(u, p[l + k]), p[k]);
  }
  const Matrix inv_var = options_.gamma.array().square().inverse().matrix();
  const Var quad = tape.matmul(tape.square(h), tape.constant(inv_var));
  Var out = tape.scale(quad, -0.5);
  if (have_logsig) out = tape.add(out, logsig);
  out = tape.add_scalar(out, p[2 * l]);
  const double normalizer = -0.5 * static_cast<double>(d) * kLog2Pi - options_.gamma.array().log().sum();
  return tape.shift(out, normalizer);
}

Var LogDensityContrastFamily::build(Tape& tape, std::span<const Var> params, Var batch) const {
  const std::size_t m = params_per_net();
  require_params(params, 2 * m, "logdensity family");
  const Var first = build_net(tape, params.subspan(0, m), batch);
  const Var second = build_net(tape, params.subspan(m, m), batch);
  return tape.sub(first, second);
}

void LogDensityContrastFamily::project(ParamSet& params) const {
  const std::size_t m = params_per_net();
  require_params(params, 2 * m, "logdensity family");
  const std::size_t l = options_.depth;
  const double cb = static_cast<double>(l) * static_cast<double>(options_.dim) * std::log(options_.weight_bound);
  for (std::size_t net = 0; net < 2; ++net) {
    const std::size_t off = net * m;
    for (std::size_t j = 0; j < l; ++j) {
      params[off + j] = clamp_operator_norm(params[off + j], options_.weight_bound);
      params[off + l + j] = clamp_norm(params[off + l + j].row(0).transpose(), options_.bias_bound).transpose();
    }
    params[off + 2 * l](0, 0) = std::clamp(params[off + 2 * l](0, 0), -cb, cb);
    if (options_.branch == LogSigmaBranch::Kind::Trainable) {
      Matrix& a = params[off + 2 * l + 3];
      Matrix& e = params[off + 2 * l + 4];
      const double total = a.cwiseAbs().sum() + std::abs(e(0, 0));
      if (total > options_.branch_bound) {
        a *= options_.branch_bound / total;
        e *= options_.branch_bound / total;
      }
    }
  }
}

// ----------------------------------------------------- MogContrastFamily

ParamSet MogContrastFamily::initialize(std::uint64_t seed) const {
  Rng rng(seed);
  ParamSet out;
  for (int br = 0; br < 2; ++br) {
    Matrix w = Matrix::Constant(k_, 1, 1.0 / static_cast<double>(k_));
    Matrix mu(k_, dim_);
    for (Eigen::Index j = 0; j < k_; ++j) mu.row(j) = random_in_ball(rng, dim_, mean_bound_).transpose();
    Matrix b = -0.5 * mu.rowwise().squaredNorm();
    out.push_back(w);
    out.push_back(mu);
    out.push_back(b);
  }
  project(out);
  return out;
}

Var MogContrastFamily::build(Tape& tape, std::span<const Var> params, Var batch) const {
  require_params(params, 6, "mog family");
  auto branch = [&](std::size_t off) {
    const Var logits = tape.matmul_nt(batch, params[off + 1]);
    const Var offsets = tape.reshape(tape.add(params[off + 2], tape.log(params[off])), 1, k_);
    return tape.log_sum_exp_rows(tape.add_row(logits, offsets));
  };
  return tape.sub(branch(0), branch(3));
}

void MogContrastFamily::project(ParamSet& params) const {
  require_params(params, 6, "mog family");
  for (std::size_t off : {std::size_t{0}, std::size_t{3}}) {
    MogBranch br{params[off].col(0), params[off + 1], params[off + 2].col(0)};
    br = project_branch(br, weight_floor_log_, mean_bound_);
    params[off] = br.weights;
    params[off + 1] = br.means;
    params[off + 2] = br.biases;
  }
}

ParamSet MogContrastFamily::to_params(const MogDiscSpec& spec) const {
  return {spec.first.weights, spec.first.means, spec.first.biases,
          spec.second.weights, spec.second.means, spec.second.biases};
}

MogDiscSpec MogContrastFamily::to_spec(const ParamSet& params) const {
  require_params(params, 6, "mog family");
  MogDiscSpec spec;
  spec.first = {params[0].col(0), params[1], params[2].col(0)};
  spec.second = {params[3].col(0), params[4], params[5].col(0)};
  spec.weight_floor_log = weight_floor_log_;
  spec.mean_bound = mean_bound_;
  return spec;
}

// ------------------------------------------------------------ MlpFamily

MlpFamily::MlpFamily(std::vector<Eigen::Index> dims, Unary hidden, double weight_bound)
    : dims_(std::move(dims)), hidden_(hidden), weight_bound_(weight_bound) {
  if (dims_.size() < 2) throw InvalidArgument("mlp family: need at least input and output widths");
  if (dims_.back() != 1) throw InvalidArgument("mlp family: discriminator output width must be 1");
}

ParamSet init_mlp(const std::vector<Eigen::Index>& dims, Rng& rng) {
  ParamSet out;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double scale = std::sqrt(2.0 / static_cast<double>(dims[i]));
    out.push_back(scale * standard_normal(rng, dims[i + 1], dims[i]));
    out.push_back(Matrix::Zero(1, dims[i + 1]));
  }
  return out;
}

Var build_mlp(Tape& tape, std::span<const Var> params, Var batch, const Unary& hidden) {
  if (params.size() % 2 != 0 || params.empty()) throw InvalidArgument("mlp: parameter blocks must be (W, b) pairs");
  Var h = batch;
  const std::size_t layers = params.size() / 2;
  for (std::size_t i = 0; i < layers; ++i) {
    h = tape.add_row(tape.matmul_nt(h, params[2 * i]), params[2 * i + 1]);
    if (i + 1 < layers) h = tape.unary(h, hidden);
  }
  return h;
}

ParamSet MlpFamily::initialize(std::uint64_t seed) const {
  Rng rng(seed);
  ParamSet p = init_mlp(dims_, rng);
  project(p);
  return p;
}

Var MlpFamily::build(Tape& tape, std::span<const Var> params, Var batch) const {
  require_params(params, 2 * (dims_.size() - 1), "mlp family");
  return build_mlp(tape, params, batch, hidden_);
}

void MlpFamily::project(ParamSet& params) const {
  if (weight_bound_ <= 0.0) return;
  for (std::size_t i = 0; i < params.size(); i += 2) params[i] = clamp_operator_norm(params[i], weight_bound_);
}

MlpSpec MlpFamily::to_spec(const ParamSet& params) const {
  MlpSpec spec;
  spec.hidden = hidden_;
  for (std::size_t i = 0; i + 1 < params.size(); i += 2)
    spec.layers.push_back({params[i], params[i + 1].row(0).transpose()});
  return spec;
}

}  // namespace ralab
