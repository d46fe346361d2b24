#include "ralab/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "ralab/assignment.hpp"
#include "ralab/optim.hpp"
#include "ralab/training.hpp"

namespace ralab {

using diff::Tape;
using diff::Var;

void IpmConfig::validate() const {
  if (restarts < 1) throw InvalidArgument("ipm config: restarts must be >= 1");
  if (steps < 1) throw InvalidArgument("ipm config: steps must be >= 1");
  if (!(step_size > 0.0)) throw InvalidArgument("ipm config: step_size must be positive");
  if (batch < 1 || train_pool < 1 || eval_batch < 2) throw InvalidArgument("ipm config: batch sizes too small");
  if (regularization == Regularization::GradientPenalty && !(gp_coefficient >= 0.0))
    throw InvalidArgument("ipm config: gp coefficient must be >= 0");
}

Estimate contrast(const Vector& fp, const Vector& fq) {
  if (fp.size() < 2 || fq.size() < 2) throw InvalidArgument("contrast: need at least two values per side");
  const double mp = fp.mean(), mq = fq.mean();
  const double vp = (fp.array() - mp).square().sum() / static_cast<double>(fp.size() - 1);
  const double vq = (fq.array() - mq).square().sum() / static_cast<double>(fq.size() - 1);
  return {std::abs(mp - mq), std::sqrt(vp / static_cast<double>(fp.size()) + vq / static_cast<double>(fq.size()))};
}

namespace {

// One ascent run on |sum w_i f(x_i)|. `next_batch` fills the stacked batch
// (p rows first) for a step; a fixed batch is used when it is empty.
struct AscentRun {
  const DiscriminatorFamily& family;
  const IpmConfig& config;
  Eigen::Index np;  // leading rows of the batch that come from p
  Eigen::Index nq;
  // Euclidean-normalized steps instead of RMSProp. A per-coordinate step
  // followed by projection onto a norm ball stalls at sign(g)/sqrt(d).
  bool normalized = false;

  ParamSet run(ParamSet params, const Matrix& initial_batch, const Vector& weights,
               const std::function<void(Matrix&, Rng&)>& next_batch, Rng& rng, std::size_t restart) const {
    Tape tape;
    std::vector<Var> leaves;
    for (const Matrix& p : params) leaves.push_back(tape.input(p));
    const Var x = tape.constant(initial_batch);
    const Var w = tape.constant(weights);
    const Var f = family.build(tape, leaves, x);
    const Var s = tape.sum(tape.mul(f, w));
    RmsPropState state;
    RmsPropConfig opt{config.step_size, 0.9, 1e-8};
    Matrix batch = initial_batch;
    for (std::size_t step = 0; step < config.steps; ++step) {
      if (next_batch) {
        next_batch(batch, rng);
        tape.set(x, batch);
      }
      for (std::size_t i = 0; i < params.size(); ++i) tape.set(leaves[i], params[i]);
      tape.forward();
      const double value = tape.scalar(s);
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "ipm ascent: non-finite objective at restart " << restart << ", step " << step;
        throw NonFiniteError(msg.str());
      }
      tape.backward(s);
      const double sign = value >= 0.0 ? 1.0 : -1.0;
      ParamSet grads(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) grads[i] = -sign * tape.grad(leaves[i]);
      if (config.regularization == Regularization::GradientPenalty && config.gp_coefficient > 0.0) {
        const PenaltyValue pen = gradient_penalty(family, params, batch.topRows(std::min(np, nq)),
                                                  batch.middleRows(np, std::min(np, nq)), rng());
        for (std::size_t i = 0; i < params.size(); ++i) grads[i] += config.gp_coefficient * pen.grads[i];
      }
      for (const Matrix& g : grads)
        if (!g.allFinite()) {
          std::ostringstream msg;
          msg << "ipm ascent: non-finite gradient at restart " << restart << ", step " << step;
          throw NonFiniteError(msg.str());
        }
      if (normalized) {
        double norm2 = 0.0;
        for (const Matrix& g : grads) norm2 += g.squaredNorm();
        if (norm2 > 0.0)
          for (std::size_t i = 0; i < params.size(); ++i) params[i] -= (config.step_size / std::sqrt(norm2)) * grads[i];
      } else {
        rmsprop_step(params, grads, state, opt);
      }
      family.project(params);
    }
    return params;
  }
};

Vector stacked_weights(Eigen::Index np, Eigen::Index nq) {
  Vector w(np + nq);
  w.head(np).setConstant(1.0 / static_cast<double>(np));
  w.tail(nq).setConstant(-1.0 / static_cast<double>(nq));
  return w;
}

Matrix stack(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("ipm: dimension mismatch between samples");
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

Matrix draw(const Sampler& sampler, std::size_t n, std::uint64_t seed, Eigen::Index dim) {
  Matrix m = sampler(n, seed);
  if (m.rows() != static_cast<Eigen::Index>(n) || m.cols() != dim)
    throw ShapeError("ipm: sampler returned " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     ", expected " + std::to_string(n) + "x" + std::to_string(dim));
  if (!m.allFinite()) throw NonFiniteError("ipm: sampler returned non-finite values");
  return m;
}

}  // namespace

IpmResult ipm_estimate(const DiscriminatorFamily& family, const Sampler& p, const Sampler& q, const IpmConfig& config) {
  config.validate();
  const Eigen::Index d = family.input_dim();
  const std::uint64_t seed = config.seed;
  const Matrix pool_p = draw(p, config.train_pool, derive_seed(seed, 1), d);
  const Matrix pool_q = draw(q, config.train_pool, derive_seed(seed, 2), d);
  const Matrix val_p = draw(p, config.eval_batch, derive_seed(seed, 3), d);
  const Matrix val_q = draw(q, config.eval_batch, derive_seed(seed, 4), d);
  const Matrix eval_p = draw(p, config.eval_batch, derive_seed(seed, 5), d);
  const Matrix eval_q = draw(q, config.eval_batch, derive_seed(seed, 6), d);

  const auto nb = static_cast<Eigen::Index>(config.batch);
  const Vector weights = stacked_weights(nb, nb);
  std::uniform_int_distribution<Eigen::Index> pick_p(0, pool_p.rows() - 1), pick_q(0, pool_q.rows() - 1);
  auto next_batch = [&](Matrix& batch, Rng& rng) {
    for (Eigen::Index i = 0; i < nb; ++i) batch.row(i) = pool_p.row(pick_p(rng));
    for (Eigen::Index i = 0; i < nb; ++i) batch.row(nb + i) = pool_q.row(pick_q(rng));
  };

  const AscentRun ascent{family, config, nb, nb};
  IpmResult best;
  double best_val = -1.0;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    ParamSet params = family.initialize(derive_seed(seed, 100 + r));
    family.project(params);
    Rng rng(derive_seed(seed, 200 + r));
    Matrix batch(2 * nb, d);
    next_batch(batch, rng);
    if (!params.empty()) params = ascent.run(std::move(params), batch, weights, next_batch, rng, r);
    const double val = contrast(evaluate(family, params, val_p), evaluate(family, params, val_q)).value;
    if (val > best_val) {
      best_val = val;
      best.best_restart = r;
      best.params = params;
    }
  }
  const Estimate e = contrast(evaluate(family, best.params, eval_p), evaluate(family, best.params, eval_q));
  best.value = e.value;
  best.stderr_ = e.stderr_;
  best.validation = best_val;
  return best;
}

WeightedMaxResult maximize_weighted_mean(const DiscriminatorFamily& family, const Matrix& points, const Vector& weights,
                                         const IpmConfig& config) {
  config.validate();
  if (points.rows() != weights.size()) throw ShapeError("maximize_weighted_mean: weights/points mismatch");
  if (points.cols() != family.input_dim()) throw ShapeError("maximize_weighted_mean: dimension mismatch");
  IpmConfig no_gp = config;
  no_gp.regularization = Regularization::Clip;
  const AscentRun plain{family, no_gp, points.rows(), 0, true};
  WeightedMaxResult best;
  best.value = -1.0;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    ParamSet params = family.initialize(derive_seed(config.seed, 100 + r));
    family.project(params);
    Rng rng(derive_seed(config.seed, 200 + r));
    if (!params.empty()) params = plain.run(std::move(params), points, weights, {}, rng, r);
    const double value = std::abs(weights.dot(evaluate(family, params, points)));
    if (value > best.value) {
      best.value = value;
      best.params = params;
    }
  }
  return best;
}

IpmResult ipm_empirical(const DiscriminatorFamily& family, const Matrix& batch_p, const Matrix& batch_q,
                        const IpmConfig& config) {
  config.validate();
  if (config.regularization == Regularization::GradientPenalty)
    throw InvalidArgument("ipm_empirical: gradient penalty is not supported on fixed samples");
  const Matrix points = stack(batch_p, batch_q);
  const WeightedMaxResult m =
      maximize_weighted_mean(family, points, stacked_weights(batch_p.rows(), batch_q.rows()), config);
  const Estimate e = contrast(evaluate(family, m.params, batch_p), evaluate(family, m.params, batch_q));
  IpmResult out;
  out.value = e.value;
  out.stderr_ = e.stderr_;
  out.validation = e.value;
  out.params = m.params;
  return out;
}

// ------------------------------------------------------------------ W1

double w1_exact(const Matrix& batch_p, const Matrix& batch_q) {
  if (batch_p.rows() != batch_q.rows() || batch_p.cols() != batch_q.cols())
    throw ShapeError("w1_exact: batches must have equal shape");
  const Eigen::Index n = batch_p.rows();
  if (n == 0) throw InvalidArgument("w1_exact: empty batches");
  if (n > kMaxW1Batch) throw InvalidArgument("w1_exact: batch size above " + std::to_string(kMaxW1Batch));
  if (!batch_p.allFinite() || !batch_q.allFinite()) throw NonFiniteError("w1_exact: non-finite sample");

  std::vector<double> terms(static_cast<std::size_t>(n));
  if (batch_p.cols() == 1) {
    // Monotone matching is optimal on the line.
    std::vector<double> x(batch_p.col(0).data(), batch_p.col(0).data() + n);
    std::vector<double> y(batch_q.col(0).data(), batch_q.col(0).data() + n);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    for (Eigen::Index i = 0; i < n; ++i) terms[i] = std::abs(x[i] - y[i]);
  } else {
    Matrix cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (batch_p.row(i) - batch_q.row(j)).norm();
    const std::vector<int> match = solve_assignment(cost);
    for (Eigen::Index i = 0; i < n; ++i) terms[i] = cost(i, match[i]);
  }
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return total / static_cast<double>(n);
}

double w1_subbatched(const Matrix& batch_p, const Matrix& batch_q, Eigen::Index cap) {
  if (batch_p.rows() != batch_q.rows()) throw ShapeError("w1_subbatched: batches must have equal size");
  if (cap < 1 || cap > kMaxW1Batch) throw InvalidArgument("w1_subbatched: invalid cap");
  const Eigen::Index n = batch_p.rows();
  double total = 0.0;
  int parts = 0;
  for (Eigen::Index start = 0; start < n; start += cap, ++parts) {
    const Eigen::Index len = std::min(cap, n - start);
    total += w1_exact(batch_p.middleRows(start, len), batch_q.middleRows(start, len));
  }
  return total / parts;
}

// ------------------------------------------------------- Gaussian closed forms

Matrix sqrtm_psd(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("sqrtm_psd: eigendecomposition failed");
  const Vector s = es.eigenvalues().cwiseMax(1e-12).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

double w2_gaussian(const GaussianSpec& g1, const GaussianSpec& g2) {
  validate(g1);
  validate(g2);
  if (g1.dim() != g2.dim()) throw ShapeError("w2_gaussian: dimension mismatch");
  const Matrix r1 = sqrtm_psd(g1.covariance);
  const Matrix cross = sqrtm_psd(r1 * g2.covariance * r1);
  const double sq = (g1.mean - g2.mean).squaredNorm() + g1.covariance.trace() + g2.covariance.trace() -
                    2.0 * cross.trace();
  return std::sqrt(std::max(sq, 0.0));
}

double kl_gaussian(const GaussianSpec& g1, const GaussianSpec& g2) {
  validate(g1);
  validate(g2);
  if (g1.dim() != g2.dim()) throw ShapeError("kl_gaussian: dimension mismatch");
  const Eigen::LLT<Matrix> l1(g1.covariance), l2(g2.covariance);
  const Vector dm = g2.mean - g1.mean;
  const double trace = l2.solve(g1.covariance).trace();
  const double quad = dm.dot(l2.solve(dm));
  const double logdet1 = 2.0 * l1.matrixLLT().diagonal().array().log().sum();
  const double logdet2 = 2.0 * l2.matrixLLT().diagonal().array().log().sum();
  return 0.5 * (trace + quad - static_cast<double>(g1.dim()) + logdet2 - logdet1);
}

Estimate kl_empirical(const LogDensityFn& logp, const LogDensityFn& logq, const Matrix& samples_from_p) {
  if (samples_from_p.rows() < 1) throw InvalidArgument("kl_empirical: no samples");
  const Vector lp = logp(samples_from_p);
  const Vector lq = logq(samples_from_p);
  if (lp.size() != samples_from_p.rows() || lq.size() != samples_from_p.rows())
    throw ShapeError("kl_empirical: log density returned wrong length");
  if (!lp.allFinite() || !lq.allFinite()) throw NonFiniteError("kl_empirical: non-finite log density at a sample");
  const Vector diff = lp - lq;
  const double n = static_cast<double>(diff.size());
  const double m = diff.mean();
  const double var = diff.size() > 1 ? (diff.array() - m).square().sum() / (n - 1.0) : 0.0;
  return {m, std::sqrt(var / n)};
}

// --------------------------------------------------- exponential families

LogPartition LogPartition::unit_gaussian() {
  return {[](const Vector& t) { return UnitGaussianMeanFamily::log_partition(t); },
          [](const Vector& t) { return UnitGaussianMeanFamily::log_partition_gradient(t); }};
}

double kl_expfamily(const Vector& theta1, const Vector& theta2, const LogPartition& a) {
  if (theta1.size() != theta2.size()) throw ShapeError("kl_expfamily: dimension mismatch");
  return a.value(theta2) - a.value(theta1) - a.gradient(theta1).dot(theta2 - theta1);
}

double expfamily_ipm_closed(const Vector& theta1, const Vector& theta2, const LogPartition& a) {
  if (theta1.size() != theta2.size()) throw ShapeError("expfamily_ipm_closed: dimension mismatch");
  return (a.gradient(theta1) - a.gradient(theta2)).norm();
}

// ------------------------------------------------------------- Rademacher

Estimate rademacher_estimate(const DiscriminatorFamily& family, const Matrix& samples, const RademacherConfig& config) {
  if (config.draws < 2) throw InvalidArgument("rademacher_estimate: need at least two sign draws");
  const Eigen::Index n = samples.rows();
  if (n < 1) throw InvalidArgument("rademacher_estimate: no samples");
  std::vector<double> values;
  values.reserve(config.draws);
  for (std::size_t j = 0; j < config.draws; ++j) {
    Rng rng(derive_seed(config.inner.seed, 1000 + j));
    std::bernoulli_distribution coin(0.5);
    Vector eps(n);
    for (Eigen::Index i = 0; i < n; ++i) eps(i) = (coin(rng) ? 1.0 : -1.0) / static_cast<double>(n);
    IpmConfig inner = config.inner;
    inner.seed = derive_seed(config.inner.seed, 5000 + j);
    values.push_back(maximize_weighted_mean(family, samples, eps, inner).value);
  }
  const Eigen::Map<const Vector> v(values.data(), static_cast<Eigen::Index>(values.size()));
  const double m = v.mean();
  const double var = (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
  return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

// ----------------------------------------------------------- sandwich checks

SandwichReport check_sandwich_gaussian(const GaussianSpec& g1, const GaussianSpec& g2, const Estimate& ipm,
                                       std::optional<double> w1_empirical) {
  validate(g1);
  validate(g2);
  const Eigen::SelfAdjointEigenSolver<Matrix> e1(g1.covariance, Eigen::EigenvaluesOnly);
  const Eigen::SelfAdjointEigenSolver<Matrix> e2(g2.covariance, Eigen::EigenvaluesOnly);
  const double sigma_min = std::sqrt(std::min(e1.eigenvalues().minCoeff(), e2.eigenvalues().minCoeff()));
  const double sigma_max = std::sqrt(std::max(e1.eigenvalues().maxCoeff(), e2.eigenvalues().maxCoeff()));
  const double d = static_cast<double>(g1.dim());

  SandwichReport r;
  r.ipm = ipm.value;
  r.ipm_stderr = ipm.stderr_;
  r.w2 = w2_gaussian(g1, g2);
  r.w1_empirical = w1_empirical;
  r.lower_bound = sigma_min / (2.0 * std::sqrt(2.0 * kPi * d) * sigma_max) * r.w2;
  r.lower_margin = r.ipm - r.lower_bound;
  r.upper_margin = r.w2 - r.ipm;
  const double slack = 3.0 * ipm.stderr_ + 1e-12;
  r.lower_holds = r.ipm >= r.lower_bound - slack;
  r.upper_holds = r.ipm <= r.w2 + slack;
  if (w1_empirical) r.upper_empirical_holds = r.ipm <= *w1_empirical + slack;
  return r;
}

bool check_transport_inequality(double kl_sym, double w_value, double sigma2, double tolerance) {
  if (!(sigma2 > 0.0)) throw InvalidArgument("check_transport_inequality: sigma2 must be positive");
  return w_value * w_value <= 2.0 * sigma2 * kl_sym + tolerance;
}

// ------------------------------------------------------------------ report

bool DivergenceReport::nonnegative(double tolerance) const {
  bool ok = ipm.value >= -tolerance && w1_exact >= -tolerance;
  if (w2_closed) ok = ok && *w2_closed >= -tolerance;
  if (kl_forward) ok = ok && *kl_forward >= -tolerance;
  if (kl_backward) ok = ok && *kl_backward >= -tolerance;
  if (rademacher) ok = ok && rademacher->value >= -tolerance;
  return ok;
}

std::string DivergenceReport::to_json() const {
  nlohmann::json j;
  j["ipm"] = {{"value", ipm.value}, {"stderr", ipm.stderr_}};
  j["w1_exact"] = w1_exact;
  j["w2_closed"] = w2_closed ? nlohmann::json(*w2_closed) : nlohmann::json();
  j["kl_forward"] = kl_forward ? nlohmann::json(*kl_forward) : nlohmann::json();
  j["kl_backward"] = kl_backward ? nlohmann::json(*kl_backward) : nlohmann::json();
  j["rademacher"] = rademacher ? nlohmann::json{{"value", rademacher->value}, {"stderr", rademacher->stderr_}}
                               : nlohmann::json();
  j["metadata"] = {{"batch", batch}, {"eval_batch", eval_batch}, {"restarts", restarts}, {"seed", seed}};
  return j.dump(2);
}

}  // namespace ralab
