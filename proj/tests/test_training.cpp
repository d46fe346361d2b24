#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "ralab/optim.hpp"
#include "ralab/training.hpp"

using namespace ralab;

namespace {

GaussianSpec gauss1(double mu) { return {Vector::Constant(1, mu), Matrix::Identity(1, 1)}; }

Sampler gaussian_sampler(const GaussianSpec& g) {
  return [g](std::size_t n, std::uint64_t s) { return sample(g, n, s); };
}

}  // namespace

TEST_CASE("rmsprop update rule") {
  ParamSet p{Matrix::Constant(2, 2, 1.5)};
  RmsPropState st;
  RmsPropConfig cfg;
  rmsprop_step(p, {Matrix::Ones(2, 2)}, st, cfg);
  CHECK(p[0](0, 0) == doctest::Approx(1.5 - 1e-4 / std::sqrt(0.1 + 1e-8)).epsilon(1e-15));
  CHECK(st.mean_square[0](1, 1) == doctest::Approx(0.1).epsilon(1e-15));
  const Matrix before = p[0];
  rmsprop_step(p, {Matrix::Zero(2, 2)}, st, cfg);
  CHECK((p[0] - before).norm() == 0.0);
  CHECK(st.mean_square[0](0, 0) == doctest::Approx(0.09).epsilon(1e-15));

  ParamSet a{Matrix::Ones(1, 3)}, b{Matrix::Ones(1, 3)};
  RmsPropState sa, sb;
  for (int i = 0; i < 10; ++i) {
    const ParamSet g{Matrix::Constant(1, 3, std::sin(i))};
    rmsprop_step(a, g, sa, cfg);
    rmsprop_step(b, g, sb, cfg);
  }
  CHECK((a[0] - b[0]).norm() == 0.0);
  CHECK_THROWS_AS(rmsprop_step(a, {Matrix::Ones(2, 2)}, sa, cfg), ShapeError);
}

TEST_CASE("gradient penalty values") {
  Rng rng(1);
  const Matrix bp = standard_normal(rng, 16, 2), bq = standard_normal(rng, 16, 2);
  const LinearFamily lin(2);
  const ParamSet unit{(Matrix(2, 1) << 0.6, 0.8).finished()};
  CHECK(gradient_penalty(lin, unit, bp, bq, 3).value == doctest::Approx(0.0).epsilon(1e-15));

  // f(x) = 2 v.x through a one-layer MLP without hidden units
  const MlpFamily two({2, 1});
  const ParamSet w{(Matrix(1, 2) << 1.2, 1.6).finished(), Matrix::Zero(1, 1)};
  CHECK(gradient_penalty(two, w, bp, bq, 3).value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gradient penalty parameter gradient matches finite differences") {
  const MlpFamily mlp({2, 6, 1}, diff::Unary::tanh());
  Rng rng(2);
  const Matrix bp = standard_normal(rng, 8, 2), bq = standard_normal(rng, 8, 2) + Matrix::Ones(8, 2);
  const ParamSet p = mlp.initialize(4);
  const PenaltyValue pen = gradient_penalty(mlp, p, bp, bq, 9);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    for (Eigen::Index i = 0; i < p[k].size(); ++i) {
      ParamSet a = p, b = p;
      a[k].data()[i] += 1e-5;
      b[k].data()[i] -= 1e-5;
      const double fd = (gradient_penalty(mlp, a, bp, bq, 9).value - gradient_penalty(mlp, b, bp, bq, 9).value) / 2e-5;
      num += std::pow(pen.grads[k].data()[i] - fd, 2);
      den += fd * fd;
    }
  CHECK(std::sqrt(num / den) < 1e-4);
}

TEST_CASE("invertible generator model") {
  Rng rng(3);
  const InvertibleGeneratorSpec spec = oracle::random_invertible(rng, 3, 2);
  InvertibleGeneratorSpec unit = spec;
  unit.gamma = Vector::Ones(3);
  const InvertibleGeneratorModel model(3, 2, Vector::Ones(3), Activation::exact_leaky(0.5));
  const ParamSet params = model.to_params(unit);
  const Matrix z = standard_normal(rng, 10, 3);
  CHECK((model.generate(params, z) - invertible_forward_batch(unit, z)).cwiseAbs().maxCoeff() < 1e-12);
  const Matrix x = model.sample(params, 20, 1);
  const Vector lp = (*model.log_density(params))(x);
  CHECK((lp - log_density_invertible_batch(unit, x)).cwiseAbs().maxCoeff() < 1e-12);

  ParamSet wild = params;
  wild[0] *= 10.0;
  wild[2] *= 100.0;
  model.project(wild);
  const auto sv = Eigen::JacobiSVD<Matrix>(wild[0]).singularValues();
  CHECK(sv(0) <= 2.5 * (1 + 1e-12));
  CHECK(sv(sv.size() - 1) >= 1 / 2.5 * (1 - 1e-12));
  CHECK(wild[2].norm() <= 5.0 * (1 + 1e-12));
  CHECK(constraint_violations(model.to_spec(wild)).empty());
}

TEST_CASE("trace csv round trip") {
  TrainTrace t;
  t.rows.push_back({0, -0.125, 0.5, std::nullopt, 1.0});
  t.rows.push_back({100, 1.0 / 3.0, std::nullopt, 2.0 / 7.0, 2.5});
  const std::string csv = t.to_csv();
  CHECK(csv.rfind("step,ipm_train,ipm_eval,kl,wall_ms\n", 0) == 0);
  const TrainTrace back = TrainTrace::from_csv(csv);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].ipm_train == t.rows[1].ipm_train);
  CHECK(!back.rows[1].ipm_eval);
  CHECK(*back.rows[1].kl == *t.rows[1].kl);
  CHECK(back.to_csv() == csv);
  const std::string bare = t.to_csv(false);
  CHECK(bare.find(",2.5\n") == std::string::npos);
  CHECK(bare.substr(bare.size() - 2) == ",\n");
  CHECK_THROWS_AS(TrainTrace::from_csv("nope\n"), InvalidArgument);
}

TEST_CASE("gaussian mean learning with a linear critic") {
  const GaussianMeanModel model(1);
  const LinearFamily critic(1);
  TrainConfig cfg;
  cfg.critic_optimizer.lr = 1e-2;
  cfg.generator_optimizer.lr = 1e-2;
  cfg.total_gen_steps = 2000;
  cfg.eval_every = 500;
  cfg.seed = 5;
  const TrainResult r = wgan_train(model, {Matrix::Zero(1, 1)}, critic, gaussian_sampler(gauss1(1.5)), cfg);
  CHECK(std::abs(r.generator[0](0, 0) - 1.5) < 0.1);
  for (std::size_t i = 1; i < r.trace.rows.size(); ++i) CHECK(r.trace.rows[i].step > r.trace.rows[i - 1].step);
  CHECK(r.trace.rows.back().step == 2000);
}

TEST_CASE("already converged generator keeps a null eval ipm") {
  const GaussianMeanModel model(1);
  const ReluFamily critic(1, 2.0);
  auto eval_family = std::make_shared<ReluFamily>(1, 2.0);
  const Sampler target = gaussian_sampler(gauss1(0.0));
  IpmConfig ec;
  ec.restarts = 2;
  ec.steps = 150;
  ec.step_size = 1e-2;
  std::vector<double> stderrs;
  MetricHooks hooks;
  hooks.ipm_eval = [&](const GeneratorModel& m, const ParamSet& p, std::uint64_t s) -> std::optional<double> {
    IpmConfig c = ec;
    c.seed = s;
    const IpmResult r = ipm_estimate(*eval_family, target, m.sampler(p), c);
    stderrs.push_back(r.stderr_);
    return r.value;
  };
  TrainConfig cfg;
  cfg.total_gen_steps = 200;
  cfg.eval_every = 50;
  const TrainResult r = wgan_train(model, {Matrix::Zero(1, 1)}, critic, target, cfg, hooks);
  REQUIRE(r.trace.rows.size() == stderrs.size());
  for (std::size_t i = 0; i < stderrs.size(); ++i) CHECK(*r.trace.rows[i].ipm_eval <= 3 * stderrs[i]);
}

TEST_CASE("training is deterministic and respects constraints under clipping") {
  Rng rng(6);
  const InvertibleGeneratorSpec truth = oracle::random_invertible(rng, 2, 2);
  const Sampler target = [truth](std::size_t n, std::uint64_t s) { return sample(truth, n, s); };
  const InvertibleGeneratorModel model(2, 2, Vector::Ones(2), Activation::exact_leaky(0.5));
  LogDensityFamilyOptions o;
  o.dim = 2;
  const LogDensityContrastFamily critic(o);
  const auto eval = std::make_shared<LogDensityContrastFamily>(o);
  IpmConfig ec;
  ec.restarts = 1;
  ec.steps = 20;
  ec.eval_batch = 256;
  ec.train_pool = 256;
  const MetricHooks hooks = default_hooks(eval, target, std::optional<LogDensityFn>(
      [truth](const Matrix& x) { return log_density_invertible_batch(truth, x); }), ec, 2000);
  TrainConfig cfg;
  cfg.total_gen_steps = 30;
  cfg.eval_every = 10;
  cfg.critic_steps = 3;
  cfg.critic_optimizer.lr = 1e-2;
  const ParamSet init = model.to_params(oracle::random_invertible(rng, 2, 2));
  const TrainResult a = wgan_train(model, init, critic, target, cfg, hooks);
  const TrainResult b = wgan_train(model, init, critic, target, cfg, hooks);
  CHECK(a.trace.to_csv(false) == b.trace.to_csv(false));
  CHECK(a.trace.rows.size() == 4);
  for (const TrainRow& row : a.trace.rows) {
    CHECK(row.kl);
    CHECK(row.ipm_eval);
    CHECK(std::isfinite(row.ipm_train));
  }
  // critic parameters are a fixpoint of the projection
  ParamSet c = a.critic;
  critic.project(c);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK((c[i] - a.critic[i]).norm() == 0.0);

  TrainConfig gp = cfg;
  gp.regularization = Regularization::GradientPenalty;
  const TrainResult g = wgan_train(model, init, critic, target, gp);
  CHECK(g.trace.rows.size() == 4);
}

TEST_CASE("non-finite values abort with the partial trace") {
  const GaussianMeanModel model(1);
  const LinearFamily critic(1);
  TrainConfig cfg;
  cfg.total_gen_steps = 50;
  cfg.eval_every = 10;
  MetricHooks hooks;
  hooks.ipm_eval = [](const GeneratorModel&, const ParamSet&, std::uint64_t) -> std::optional<double> { return 0.0; };
  hooks.kl = [n = 0](const GeneratorModel&, const ParamSet&, std::uint64_t) mutable -> std::optional<double> {
    return ++n == 3 ? std::nan("") : 1.0;
  };
  try {
    wgan_train(model, {Matrix::Zero(1, 1)}, critic, gaussian_sampler(gauss1(0.0)), cfg, hooks);
    FAIL("expected an abort");
  } catch (const TrainingAborted& e) {
    CHECK(e.trace().rows.size() == 2);
  }

  std::size_t calls = 0;
  const Sampler poisoned = [&calls](std::size_t n, std::uint64_t) {
    return Matrix::Constant(static_cast<Eigen::Index>(n), 1, ++calls > 30 ? INFINITY : 0.0);
  };
  CHECK_THROWS_AS(wgan_train(model, {Matrix::Zero(1, 1)}, critic, poisoned, cfg), TrainingAborted);

  TrainConfig bad = cfg;
  bad.batch = 1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
