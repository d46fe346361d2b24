#include "ralab/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace ralab {

using diff::Tape;
using diff::Unary;
using diff::Var;

namespace {

std::vector<Var> leaves_of(Tape& tape, const ParamSet& params, bool differentiable) {
  std::vector<Var> out;
  out.reserve(params.size());
  for (const Matrix& p : params) out.push_back(differentiable ? tape.input(p) : tape.constant(p));
  return out;
}

ParamSet grads_of(const Tape& tape, const std::vector<Var>& leaves) {
  ParamSet out;
  out.reserve(leaves.size());
  for (Var v : leaves) out.push_back(tape.grad(v));
  return out;
}

}  // namespace

// ---------------------------------------------------------- gradient penalty

PenaltyValue gradient_penalty(const DiscriminatorFamily& disc, const ParamSet& params, const Matrix& batch_p,
                              const Matrix& batch_q, std::uint64_t seed, double fd_step) {
  if (batch_p.rows() != batch_q.rows() || batch_p.cols() != batch_q.cols())
    throw ShapeError("gradient_penalty: batches must have equal shape");
  const Eigen::Index n = batch_p.rows();
  if (n < 1) throw InvalidArgument("gradient_penalty: empty batch");
  if (!(fd_step > 0.0)) throw InvalidArgument("gradient_penalty: fd_step must be positive");

  Rng rng(seed);
  Vector t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = uniform(rng, 0.0, 1.0);
  const Matrix xhat = t.asDiagonal() * batch_p + (Vector::Ones(n) - t).asDiagonal() * batch_q;

  Tape tape;
  const std::vector<Var> fixed = leaves_of(tape, params, false);
  const Var x = tape.input(xhat);
  const Var total = tape.sum(disc.build(tape, fixed, x));
  tape.backward(total);
  const Matrix g = tape.grad(x);
  const Vector norms = g.rowwise().norm();

  PenaltyValue out;
  out.value = (norms.array() - 1.0).square().mean();

  Vector c(n);
  Matrix u = Matrix::Zero(n, xhat.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i) = 2.0 * (norms(i) - 1.0) / static_cast<double>(n);
    if (norms(i) > 0.0) u.row(i) = g.row(i) / norms(i);
  }
  auto param_grad = [&](double eps) {
    Tape tp;
    const std::vector<Var> leaves = leaves_of(tp, params, true);
    const Var shifted = tp.constant(xhat + eps * u);
    const Var root = tp.sum(tp.mul(disc.build(tp, leaves, shifted), tp.constant(c)));
    tp.backward(root);
    return grads_of(tp, leaves);
  };
  if (params.empty()) return out;
  const ParamSet plus = param_grad(fd_step);
  const ParamSet minus = param_grad(-fd_step);
  for (std::size_t i = 0; i < params.size(); ++i) out.grads.push_back((plus[i] - minus[i]) / (2.0 * fd_step));
  return out;
}

// ------------------------------------------------------------- generators

std::optional<LogDensityFn> GeneratorModel::log_density(const ParamSet&) const { return std::nullopt; }

Matrix GeneratorModel::generate(const ParamSet& params, const Matrix& latent) const {
  Tape tape;
  const std::vector<Var> leaves = leaves_of(tape, params, false);
  return tape.value(build(tape, leaves, tape.constant(latent)));
}

Matrix GeneratorModel::sample(const ParamSet& params, std::size_t n, std::uint64_t seed) const {
  Rng rng(seed);
  return generate(params, sample_latent(n, rng));
}

Sampler GeneratorModel::sampler(const ParamSet& params) const {
  return [this, params](std::size_t n, std::uint64_t seed) { return sample(params, n, seed); };
}

InvertibleGeneratorModel::InvertibleGeneratorModel(Eigen::Index dim, std::size_t depth, Vector gamma,
                                                   Activation activation, GeneratorConstraints constraints)
    : dim_(dim), depth_(depth), gamma_(std::move(gamma)), activation_(activation), constraints_(constraints) {
  if (dim_ < 1 || depth_ < 1) throw InvalidArgument("invertible model: dim and depth must be >= 1");
  if (gamma_.size() != dim_) throw ShapeError("invertible model: gamma size mismatch");
}

Matrix InvertibleGeneratorModel::sample_latent(std::size_t n, Rng& rng) const {
  return standard_normal(rng, static_cast<Eigen::Index>(n), dim_) * gamma_.asDiagonal();
}

Var InvertibleGeneratorModel::build(Tape& tape, std::span<const Var> params, Var latent) const {
  if (params.size() != 2 * depth_) throw InvalidArgument("invertible model: wrong parameter count");
  Var h = latent;
  for (std::size_t j = 0; j < depth_; ++j) {
    h = tape.add_row(tape.matmul_nt(h, params[j]), params[depth_ + j]);
    if (j + 1 < depth_) h = tape.unary(h, Unary::forward(activation_));
  }
  return h;
}

void InvertibleGeneratorModel::project(ParamSet& params) const {
  if (params.size() != 2 * depth_) throw InvalidArgument("invertible model: wrong parameter count");
  const double hi = constraints_.weight_bound, lo = 1.0 / constraints_.weight_bound;
  for (std::size_t j = 0; j < depth_; ++j) {
    Eigen::JacobiSVD<Matrix> svd(params[j], Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    if (s.maxCoeff() > hi * (1.0 + 1e-12) || s.minCoeff() < lo * (1.0 - 1e-12))
      params[j] = svd.matrixU() * s.cwiseMin(hi).cwiseMax(lo).asDiagonal() * svd.matrixV().transpose();
    params[depth_ + j] = clamp_norm(params[depth_ + j].row(0).transpose(), constraints_.bias_bound).transpose();
  }
}

ParamSet InvertibleGeneratorModel::to_params(const InvertibleGeneratorSpec& spec) const {
  if (spec.depth() != depth_ || spec.dim() != dim_) throw ShapeError("invertible model: spec shape mismatch");
  ParamSet out;
  for (const Layer& l : spec.layers) out.push_back(l.weight);
  for (const Layer& l : spec.layers) out.push_back(l.bias.transpose());
  return out;
}

InvertibleGeneratorSpec InvertibleGeneratorModel::to_spec(const ParamSet& params) const {
  if (params.size() != 2 * depth_) throw InvalidArgument("invertible model: wrong parameter count");
  InvertibleGeneratorSpec spec;
  spec.gamma = gamma_;
  spec.activation = activation_;
  spec.constraints = constraints_;
  for (std::size_t j = 0; j < depth_; ++j) spec.layers.push_back({params[j], params[depth_ + j].row(0).transpose()});
  return spec;
}

std::optional<LogDensityFn> InvertibleGeneratorModel::log_density(const ParamSet& params) const {
  InvertibleGeneratorSpec spec = to_spec(params);
  return LogDensityFn([spec](const Matrix& x) { return log_density_invertible_batch(spec, x); });
}

MlpGeneratorModel::MlpGeneratorModel(std::vector<Eigen::Index> dims, Unary hidden)
    : dims_(std::move(dims)), hidden_(hidden) {
  if (dims_.size() < 2) throw InvalidArgument("mlp generator: need at least input and output widths");
}

Matrix MlpGeneratorModel::sample_latent(std::size_t n, Rng& rng) const {
  return standard_normal(rng, static_cast<Eigen::Index>(n), dims_.front());
}

Var MlpGeneratorModel::build(Tape& tape, std::span<const Var> params, Var latent) const {
  if (params.size() != 2 * (dims_.size() - 1)) throw InvalidArgument("mlp generator: wrong parameter count");
  return build_mlp(tape, params, latent, hidden_);
}

ParamSet MlpGeneratorModel::initialize(std::uint64_t seed) const {
  Rng rng(seed);
  return init_mlp(dims_, rng);
}

Matrix GaussianMeanModel::sample_latent(std::size_t n, Rng& rng) const {
  return standard_normal(rng, static_cast<Eigen::Index>(n), dim_);
}

Var GaussianMeanModel::build(Tape& tape, std::span<const Var> params, Var latent) const {
  if (params.size() != 1) throw InvalidArgument("gaussian mean model: expects one parameter block");
  return tape.add_row(latent, params[0]);
}

std::optional<LogDensityFn> GaussianMeanModel::log_density(const ParamSet& params) const {
  GaussianSpec g{params.at(0).row(0).transpose(), Matrix::Identity(dim_, dim_)};
  return LogDensityFn([g](const Matrix& x) { return log_density_batch(g, x); });
}

// ------------------------------------------------------------------ trace

void TrainConfig::validate() const {
  if (batch < 2) throw InvalidArgument("train config: batch must be >= 2");
  if (critic_steps < 1) throw InvalidArgument("train config: critic_steps must be >= 1");
  if (eval_every < 1) throw InvalidArgument("train config: eval_every must be >= 1");
  if (!(critic_optimizer.lr > 0.0) || !(generator_optimizer.lr > 0.0))
    throw InvalidArgument("train config: learning rates must be positive");
}

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

std::string TrainTrace::to_csv(bool include_wall) const {
  std::ostringstream out;
  out << "step,ipm_train,ipm_eval,kl,wall_ms\n";
  for (const TrainRow& r : rows) {
    out << r.step << ',' << fmt(r.ipm_train) << ',' << (r.ipm_eval ? fmt(*r.ipm_eval) : "") << ','
        << (r.kl ? fmt(*r.kl) : "") << ',' << (include_wall ? fmt(r.wall_ms) : "") << '\n';
  }
  return out.str();
}

TrainTrace TrainTrace::from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "step,ipm_train,ipm_eval,kl,wall_ms")
    throw InvalidArgument("trace csv: unexpected header");
  TrainTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    while (f.size() < 5) f.emplace_back();
    if (f.size() != 5) throw InvalidArgument("trace csv: expected 5 fields in '" + line + "'");
    TrainRow r;
    r.step = std::stoull(f[0]);
    r.ipm_train = std::stod(f[1]);
    if (!f[2].empty()) r.ipm_eval = std::stod(f[2]);
    if (!f[3].empty()) r.kl = std::stod(f[3]);
    if (!f[4].empty()) r.wall_ms = std::stod(f[4]);
    trace.rows.push_back(r);
  }
  return trace;
}

MetricHooks default_hooks(std::shared_ptr<const DiscriminatorFamily> eval_family, Sampler target,
                          std::optional<LogDensityFn> target_log_density, IpmConfig eval_config,
                          std::size_t kl_samples) {
  MetricHooks hooks;
  hooks.ipm_eval = [eval_family, target, eval_config](const GeneratorModel& model, const ParamSet& params,
                                                      std::uint64_t seed) -> std::optional<double> {
    IpmConfig cfg = eval_config;
    cfg.seed = seed;
    return ipm_estimate(*eval_family, target, model.sampler(params), cfg).value;
  };
  if (target_log_density) {
    hooks.kl = [target, ld = *target_log_density, kl_samples](const GeneratorModel& model, const ParamSet& params,
                                                              std::uint64_t seed) -> std::optional<double> {
      const auto gen_ld = model.log_density(params);
      if (!gen_ld) return std::nullopt;
      return kl_empirical(ld, *gen_ld, target(kl_samples, seed)).value;
    };
  }
  return hooks;
}

// ------------------------------------------------------------------- loop

TrainResult wgan_train(const GeneratorModel& model, ParamSet generator_init, const DiscriminatorFamily& critic,
                       const Sampler& target, const TrainConfig& config, const MetricHooks& hooks) {
  config.validate();
  if (model.output_dim() != critic.input_dim()) throw ShapeError("wgan_train: generator/critic dimension mismatch");
  const auto start = std::chrono::steady_clock::now();
  const auto b = static_cast<Eigen::Index>(config.batch);
  const Eigen::Index d = model.output_dim();

  TrainResult result;
  ParamSet& gen = result.generator;
  ParamSet& crit = result.critic;
  gen = std::move(generator_init);
  model.project(gen);
  crit = critic.initialize(derive_seed(config.seed, 1));
  critic.project(crit);
  Rng rng(derive_seed(config.seed, 2));
  std::uint64_t target_draws = 0;

  nlohmann::json meta = {{"generator", model.name()},
                         {"critic", critic.name()},
                         {"batch", config.batch},
                         {"critic_steps", config.critic_steps},
                         {"critic_lr", config.critic_optimizer.lr},
                         {"generator_lr", config.generator_optimizer.lr},
                         {"rmsprop_decay", config.critic_optimizer.decay},
                         {"rmsprop_eps", config.critic_optimizer.eps},
                         {"regularization", config.regularization == Regularization::Clip ? "clip" : "gp"},
                         {"gp_coefficient", config.gp_coefficient},
                         {"total_gen_steps", config.total_gen_steps},
                         {"eval_every", config.eval_every},
                         {"seed", config.seed}};
  result.trace.metadata_json = meta.dump();

  // Critic objective E_p f - E_q f on a stacked batch.
  Tape ctape;
  const std::vector<Var> cleaves = leaves_of(ctape, crit, true);
  const Var cx = ctape.constant(Matrix::Zero(2 * b, d));
  Vector w(2 * b);
  w.head(b).setConstant(1.0 / static_cast<double>(b));
  w.tail(b).setConstant(-1.0 / static_cast<double>(b));
  const Var cobj = ctape.sum(ctape.mul(critic.build(ctape, cleaves, cx), ctape.constant(w)));

  // Generator loss -E_z f(G(z)).
  Tape gtape;
  const std::vector<Var> gleaves = leaves_of(gtape, gen, true);
  const std::vector<Var> gcrit = leaves_of(gtape, crit, false);
  const Var gz = gtape.constant(model.sample_latent(config.batch, rng));
  const Var gx = model.build(gtape, gleaves, gz);
  const Var gloss = gtape.scale(gtape.mean(critic.build(gtape, gcrit, gx)), -1.0);

  RmsPropState cstate, gstate;
  auto fail = [&](const std::string& what, std::size_t step) {
    throw TrainingAborted("wgan_train: non-finite " + what + " at generator step " + std::to_string(step),
                          result.trace);
  };
  auto fill_batch = [&](Matrix& batch) {
    batch.topRows(b) = target(config.batch, derive_seed(config.seed, 1'000'000 + target_draws++));
    batch.bottomRows(b) = model.generate(gen, model.sample_latent(config.batch, rng));
  };
  auto critic_value = [&](const Matrix& batch) {
    for (std::size_t i = 0; i < crit.size(); ++i) ctape.set(cleaves[i], crit[i]);
    ctape.set(cx, batch);
    ctape.forward();
    return ctape.scalar(cobj);
  };
  auto log_row = [&](std::size_t step, double ipm_train) {
    if (!std::isfinite(ipm_train)) fail("critic objective", step);
    TrainRow row;
    row.step = step;
    row.ipm_train = ipm_train;
    const std::uint64_t s = derive_seed(config.seed, 10'000'000 + step);
    if (hooks.ipm_eval) row.ipm_eval = hooks.ipm_eval(model, gen, s);
    if (hooks.kl) row.kl = hooks.kl(model, gen, derive_seed(s, 1));
    if ((row.ipm_eval && !std::isfinite(*row.ipm_eval)) || (row.kl && !std::isfinite(*row.kl)))
      fail("evaluation metric", step);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.trace.rows.push_back(row);
  };

  Matrix batch(2 * b, d);
  try {
    fill_batch(batch);
    log_row(0, critic_value(batch));

    for (std::size_t step = 1; step <= config.total_gen_steps; ++step) {
      double ipm_train = 0.0;
      for (std::size_t c = 0; c < config.critic_steps; ++c) {
        fill_batch(batch);
        ipm_train = critic_value(batch);
        if (!std::isfinite(ipm_train)) fail("critic objective", step);
        ctape.backward(cobj);
        ParamSet grads = grads_of(ctape, cleaves);
        for (Matrix& g : grads) g = -g;
        if (config.regularization == Regularization::GradientPenalty && config.gp_coefficient > 0.0) {
          const PenaltyValue pen = gradient_penalty(critic, crit, batch.topRows(b), batch.bottomRows(b), rng());
          for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += config.gp_coefficient * pen.grads[i];
        }
        for (const Matrix& g : grads)
          if (!g.allFinite()) fail("critic gradient", step);
        rmsprop_step(crit, grads, cstate, config.critic_optimizer);
        critic.project(crit);
      }

      for (std::size_t i = 0; i < gen.size(); ++i) gtape.set(gleaves[i], gen[i]);
      for (std::size_t i = 0; i < crit.size(); ++i) gtape.set(gcrit[i], crit[i]);
      gtape.set(gz, model.sample_latent(config.batch, rng));
      gtape.forward();
      if (!std::isfinite(gtape.scalar(gloss))) fail("generator loss", step);
      gtape.backward(gloss);
      const ParamSet ggrads = grads_of(gtape, gleaves);
      for (const Matrix& g : ggrads)
        if (!g.allFinite()) fail("generator gradient", step);
      rmsprop_step(gen, ggrads, gstate, config.generator_optimizer);
      model.project(gen);

      if (step % config.eval_every == 0 || step == config.total_gen_steps) log_row(step, ipm_train);
    }
  } catch (const TrainingAborted&) {
    throw;
  } catch (const NonFiniteError& e) {
    throw TrainingAborted(e.what(), result.trace);
  }
  return result;
}

}  // namespace ralab
