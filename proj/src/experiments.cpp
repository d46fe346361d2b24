#include "ralab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ralab/serialization.hpp"
#include "ralab/stats.hpp"
#include "ralab/svg.hpp"

namespace ralab {

using nlohmann::json;

// ------------------------------------------------------------- datasets

Matrix make_circle(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("make_circle: n must be >= 1");
  Rng rng(seed);
  Matrix out(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double t = uniform(rng, 0.0, 2.0 * kPi);
    out(i, 0) = std::cos(t);
    out(i, 1) = std::sin(t);
  }
  return out;
}

Matrix make_swissroll(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("make_swissroll: n must be >= 1");
  Rng rng(seed);
  Matrix out(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double z = uniform(rng, 0.25, 1.0);
    out(i, 0) = z * std::cos(4.0 * kPi * z);
    out(i, 1) = z * std::sin(4.0 * kPi * z);
  }
  return out;
}

InvertibleGeneratorSpec make_ground_truth_generator(Eigen::Index d, std::size_t layers, std::uint64_t seed) {
  if (d < 1 || layers < 1) throw InvalidArgument("make_ground_truth_generator: d and layers must be >= 1");
  Rng rng(seed);
  InvertibleGeneratorSpec spec;
  spec.gamma = Vector::Ones(d);
  spec.activation = Activation::exact_leaky(0.5);
  for (std::size_t j = 0; j < layers; ++j) spec.layers.push_back({random_well_conditioned(rng, d, 0.5, 2.0), Vector::Zero(d)});
  return spec;
}

PerturbedGenerator perturb_generator(const InvertibleGeneratorSpec& spec, double noise_scale, std::uint64_t seed) {
  validate(spec);
  if (!(noise_scale >= 0.0)) throw InvalidArgument("perturb_generator: noise_scale must be >= 0");
  PerturbedGenerator out;
  out.spec = spec;
  if (noise_scale > 0.0) {
    Rng rng(seed);
    const double d = static_cast<double>(spec.dim());
    for (Layer& layer : out.spec.layers) {
      layer.weight += noise_scale * standard_normal(rng, spec.dim(), spec.dim()) / std::sqrt(d);
      layer.bias += noise_scale * standard_normal(rng, spec.dim(), 1);
    }
  }
  out.violations = constraint_violations(out.spec);
  out.flagged = !out.violations.empty();
  return out;
}

// ---------------------------------------------------------------- config

namespace {

json ipm_to_json(const IpmConfig& c) {
  return {{"restarts", c.restarts},
          {"steps", c.steps},
          {"step_size", c.step_size},
          {"regularization", c.regularization == Regularization::Clip ? "clip" : "gp"},
          {"gp_coefficient", c.gp_coefficient},
          {"batch", c.batch},
          {"train_pool", c.train_pool},
          {"eval_batch", c.eval_batch}};
}

Regularization regularization_from(const std::string& s) {
  if (s == "clip") return Regularization::Clip;
  if (s == "gp") return Regularization::GradientPenalty;
  throw InvalidArgument("config: regularization must be 'clip' or 'gp', got '" + s + "'");
}

void ipm_from_json(const json& j, IpmConfig& c) {
  c.restarts = j.value("restarts", c.restarts);
  c.steps = j.value("steps", c.steps);
  c.step_size = j.value("step_size", c.step_size);
  if (j.contains("regularization")) c.regularization = regularization_from(j.at("regularization"));
  c.gp_coefficient = j.value("gp_coefficient", c.gp_coefficient);
  c.batch = j.value("batch", c.batch);
  c.train_pool = j.value("train_pool", c.train_pool);
  c.eval_batch = j.value("eval_batch", c.eval_batch);
}

json train_to_json(const TrainConfig& c) {
  return {{"batch", c.batch},
          {"critic_steps", c.critic_steps},
          {"critic_lr", c.critic_optimizer.lr},
          {"generator_lr", c.generator_optimizer.lr},
          {"decay", c.critic_optimizer.decay},
          {"eps", c.critic_optimizer.eps},
          {"regularization", c.regularization == Regularization::Clip ? "clip" : "gp"},
          {"gp_coefficient", c.gp_coefficient},
          {"total_gen_steps", c.total_gen_steps},
          {"eval_every", c.eval_every}};
}

void train_from_json(const json& j, TrainConfig& c) {
  c.batch = j.value("batch", c.batch);
  c.critic_steps = j.value("critic_steps", c.critic_steps);
  if (j.contains("lr")) c.critic_optimizer.lr = c.generator_optimizer.lr = j.at("lr").get<double>();
  c.critic_optimizer.lr = j.value("critic_lr", c.critic_optimizer.lr);
  c.generator_optimizer.lr = j.value("generator_lr", c.generator_optimizer.lr);
  c.critic_optimizer.decay = c.generator_optimizer.decay = j.value("decay", c.critic_optimizer.decay);
  c.critic_optimizer.eps = c.generator_optimizer.eps = j.value("eps", c.critic_optimizer.eps);
  if (j.contains("regularization")) c.regularization = regularization_from(j.at("regularization"));
  c.gp_coefficient = j.value("gp_coefficient", c.gp_coefficient);
  c.total_gen_steps = j.value("total_gen_steps", c.total_gen_steps);
  c.eval_every = j.value("eval_every", c.eval_every);
}

json disc_to_json(const DiscriminatorConfig& c) {
  return {{"type", c.type},
          {"branch", c.branch},
          {"branch_width", c.branch_width},
          {"weight_bound", c.weight_bound},
          {"bias_bound", c.bias_bound},
          {"hidden", c.hidden},
          {"mlp_weight_bound", c.mlp_weight_bound}};
}

void disc_from_json(const json& j, DiscriminatorConfig& c) {
  c.type = j.value("type", c.type);
  c.branch = j.value("branch", c.branch);
  c.branch_width = j.value("branch_width", c.branch_width);
  c.weight_bound = j.value("weight_bound", c.weight_bound);
  c.bias_bound = j.value("bias_bound", c.bias_bound);
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<Eigen::Index>>();
  c.mlp_weight_bound = j.value("mlp_weight_bound", c.mlp_weight_bound);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (kind != "circle" && kind != "swissroll" && kind != "invertible" && kind != "perturbation")
    throw InvalidArgument("config: unknown experiment kind '" + kind + "'");
  if (scale != "desk" && scale != "paper") throw InvalidArgument("config: scale must be 'desk' or 'paper'");
  if (seeds.empty()) throw InvalidArgument("config: seeds must be nonempty");
  if (dim < 1 || layers < 1) throw InvalidArgument("config: dim and layers must be >= 1");
  if (kind == "perturbation") {
    if (pairs < 1) throw InvalidArgument("config: pairs must be >= 1");
    if (!(noise_min >= 0.0 && noise_max >= noise_min)) throw InvalidArgument("config: invalid noise range");
  }
  const DiscriminatorConfig& dc = discriminator;
  if (dc.type != "logdensity" && dc.type != "mlp")
    throw InvalidArgument("config: discriminator type must be 'logdensity' or 'mlp'");
  if (dc.branch != "trainable" && dc.branch != "exact")
    throw InvalidArgument("config: discriminator branch must be 'trainable' or 'exact'");
  if (dc.branch_width < 1 || !(dc.weight_bound > 1.0) || !(dc.bias_bound > 0.0) || dc.mlp_weight_bound < 0.0)
    throw InvalidArgument("config: invalid discriminator bounds");
  if (w1_batch < 1 || static_cast<Eigen::Index>(w1_batch) > kMaxW1Batch)
    throw InvalidArgument("config: w1_batch must lie in [1, " + std::to_string(kMaxW1Batch) + "]");
  ipm.validate();
  eval_ipm.validate();
  train.validate();
}

ExperimentConfig ExperimentConfig::defaults(const std::string& kind, const std::string& scale) {
  ExperimentConfig c;
  c.kind = kind;
  c.scale = scale;
  const bool paper = scale == "paper";
  if (kind == "perturbation") {
    c.dim = paper ? 10 : 6;
    c.pairs = paper ? 100 : 30;
  } else if (kind == "invertible") {
    c.dim = paper ? 10 : 4;
    c.seeds = {0, 1, 2, 3, 4, 5};
    c.train.regularization = Regularization::GradientPenalty;
    c.train.total_gen_steps = paper ? 10000 : 2000;
    c.train.eval_every = paper ? 500 : 200;
    if (!paper) {
      c.train.generator_optimizer.lr = 1e-3;
      c.train.critic_optimizer.lr = 1e-2;
    }
    // the quadratic terms make the family sup slow to reach at small steps
    c.eval_ipm.steps = 250;
    c.eval_ipm.step_size = 0.03;
  } else if (kind == "circle" || kind == "swissroll") {
    c.dim = 2;
    c.seeds = {0, 1, 2};
    c.discriminator.type = "mlp";
    c.discriminator.hidden = {50, 50};
    c.discriminator.mlp_weight_bound = 1.0;
    c.train.total_gen_steps = paper ? 10000 : 2000;
    c.train.eval_every = paper ? 500 : 100;
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& kind, const std::string& scale) {
  const std::string k = !kind.empty() ? kind : j.value("kind", std::string("perturbation"));
  const std::string s = !scale.empty() ? scale : j.value("scale", std::string("desk"));
  ExperimentConfig c = defaults(k, s);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.dim = j.value("dim", c.dim);
  c.layers = j.value("layers", c.layers);
  c.ground_truth_seed = j.value("ground_truth_seed", c.ground_truth_seed);
  c.pairs = j.value("pairs", c.pairs);
  c.noise_min = j.value("noise_min", c.noise_min);
  c.noise_max = j.value("noise_max", c.noise_max);
  c.kl_samples = j.value("kl_samples", c.kl_samples);
  if (j.contains("ipm")) ipm_from_json(j.at("ipm"), c.ipm);
  if (j.contains("discriminator")) disc_from_json(j.at("discriminator"), c.discriminator);
  if (j.contains("train")) train_from_json(j.at("train"), c.train);
  if (j.contains("eval_ipm")) ipm_from_json(j.at("eval_ipm"), c.eval_ipm);
  c.w1_batch = j.value("w1_batch", c.w1_batch);
  if (j.contains("generator_hidden")) c.generator_hidden = j.at("generator_hidden").get<std::vector<Eigen::Index>>();
  if (j.contains("critic_hidden")) c.critic_hidden = j.at("critic_hidden").get<std::vector<Eigen::Index>>();
  c.write_svg = j.value("write_svg", c.write_svg);
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  return {{"kind", kind},
          {"scale", scale},
          {"seeds", seeds},
          {"dim", dim},
          {"layers", layers},
          {"ground_truth_seed", ground_truth_seed},
          {"pairs", pairs},
          {"noise_min", noise_min},
          {"noise_max", noise_max},
          {"kl_samples", kl_samples},
          {"ipm", ipm_to_json(ipm)},
          {"discriminator", disc_to_json(discriminator)},
          {"train", train_to_json(train)},
          {"eval_ipm", ipm_to_json(eval_ipm)},
          {"w1_batch", w1_batch},
          {"generator_hidden", generator_hidden},
          {"critic_hidden", critic_hidden},
          {"write_svg", write_svg}};
}

std::shared_ptr<DiscriminatorFamily> make_discriminator(const DiscriminatorConfig& config, Eigen::Index dim,
                                                        std::size_t layers) {
  if (config.type == "logdensity") {
    LogDensityFamilyOptions o;
    o.dim = dim;
    o.depth = layers;
    o.gamma = Vector::Ones(dim);
    o.activation = Activation::exact_leaky(0.5);
    o.weight_bound = config.weight_bound;
    o.bias_bound = config.bias_bound;
    if (config.branch == "trainable")
      o.branch = LogSigmaBranch::Kind::Trainable;
    else if (config.branch == "exact")
      o.branch = LogSigmaBranch::Kind::Exact;
    else
      throw InvalidArgument("config: branch must be 'trainable' or 'exact'");
    o.branch_width = config.branch_width;
    return std::make_shared<LogDensityContrastFamily>(o);
  }
  if (config.type == "mlp") {
    std::vector<Eigen::Index> dims{dim};
    dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
    dims.push_back(1);
    return std::make_shared<MlpFamily>(dims, diff::Unary::relu(), config.mlp_weight_bound);
  }
  throw InvalidArgument("config: unknown discriminator type '" + config.type + "'");
}

// ----------------------------------------------------------- perturbation

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::pair<double, double> least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  return {my - slope * mx, slope};
}

}  // namespace

CorrelationResult correlate(const std::vector<PerturbationRow>& rows) {
  CorrelationResult out;
  std::vector<double> lk, li, lk_all, li_all;
  for (const PerturbationRow& r : rows) {
    if (!(r.kl_sym > 0.0) || !(r.ipm > 0.0)) {
      ++out.n_degenerate;
      continue;
    }
    lk_all.push_back(std::log(r.kl_sym));
    li_all.push_back(std::log(r.ipm));
    if (r.flagged) {
      ++out.n_outliers_dropped;
      continue;
    }
    out.pairs.emplace_back(r.kl_sym, r.ipm);
    lk.push_back(std::log(r.kl_sym));
    li.push_back(std::log(r.ipm));
  }
  if (lk.size() < 3) throw InvalidArgument("correlate: fewer than three usable pairs");
  out.pearson_log = pearson(lk, li);
  out.pearson_log_all = pearson(lk_all, li_all);
  out.jackknife_min = 1.0;
  out.jackknife_max = -1.0;
  for (std::size_t leave = 0; leave < lk.size(); ++leave) {
    std::vector<double> a, b;
    for (std::size_t i = 0; i < lk.size(); ++i)
      if (i != leave) a.push_back(lk[i]), b.push_back(li[i]);
    const double r = pearson(a, b);
    out.jackknife_min = std::min(out.jackknife_min, r);
    out.jackknife_max = std::max(out.jackknife_max, r);
  }
  std::tie(out.fitted_intercept, out.fitted_slope) = least_squares(lk, li);
  return out;
}

PerturbationResult run_perturbation_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.pairs < 20 && config.scale == "paper") throw InvalidArgument("perturbation: need at least 20 pairs");
  const std::uint64_t seed = config.seeds.front();
  const auto family = make_discriminator(config.discriminator, config.dim, config.layers);
  PerturbationResult out;
  for (std::size_t i = 0; i < config.pairs; ++i) {
    const std::uint64_t unit = derive_seed(seed, i);
    Rng rng(derive_seed(unit, 0));
    const double lo = std::log(std::max(config.noise_min, 1e-300)), hi = std::log(std::max(config.noise_max, 1e-300));
    const double scale = config.noise_min <= 0.0 && config.noise_max <= 0.0 ? 0.0 : std::exp(uniform(rng, lo, hi));
    const InvertibleGeneratorSpec p = make_ground_truth_generator(config.dim, config.layers, derive_seed(unit, 1));
    const PerturbedGenerator q = perturb_generator(p, scale, derive_seed(unit, 2));
    const LogDensityFn logp = [&p](const Matrix& x) { return log_density_invertible_batch(p, x); };
    const LogDensityFn logq = [&q](const Matrix& x) { return log_density_invertible_batch(q.spec, x); };

    PerturbationRow row;
    row.pair_id = i;
    row.flagged = q.flagged;
    row.kl_pq = kl_empirical(logp, logq, sample(p, config.kl_samples, derive_seed(unit, 3))).value;
    row.kl_qp = kl_empirical(logq, logp, sample(q.spec, config.kl_samples, derive_seed(unit, 4))).value;
    row.kl_sym = row.kl_pq + row.kl_qp;
    IpmConfig ipm = config.ipm;
    ipm.seed = derive_seed(unit, 5);
    const Sampler sp = [&p](std::size_t n, std::uint64_t s) { return sample(p, n, s); };
    const Sampler sq = [&q](std::size_t n, std::uint64_t s) { return sample(q.spec, n, s); };
    row.ipm = ipm_estimate(*family, sp, sq, ipm).value;
    out.rows.push_back(row);
    out.noise_scales.push_back(scale);
  }
  out.correlation = correlate(out.rows);
  return out;
}

std::string perturbation_csv(const std::vector<PerturbationRow>& rows) {
  std::ostringstream out;
  out << "pair_id,kl_pq,kl_qp,kl_sym,ipm,flagged\n";
  for (const PerturbationRow& r : rows)
    out << r.pair_id << ',' << fmt(r.kl_pq) << ',' << fmt(r.kl_qp) << ',' << fmt(r.kl_sym) << ',' << fmt(r.ipm) << ','
        << (r.flagged ? 1 : 0) << '\n';
  return out.str();
}

std::vector<PerturbationRow> parse_perturbation_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "pair_id,kl_pq,kl_qp,kl_sym,ipm,flagged")
    throw InvalidArgument("perturbation csv: unexpected header");
  std::vector<PerturbationRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 6) throw InvalidArgument("perturbation csv: expected 6 fields in '" + line + "'");
    rows.push_back({std::stoull(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), f[5] == "1"});
  }
  return rows;
}

// --------------------------------------------------------------- training

TrainingExperimentResult run_training_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.kind != "invertible") throw InvalidArgument("training experiment: kind must be 'invertible'");
  const InvertibleGeneratorSpec truth = make_ground_truth_generator(config.dim, config.layers, config.ground_truth_seed);
  const Sampler target = [truth](std::size_t n, std::uint64_t s) { return sample(truth, n, s); };
  const LogDensityFn target_ld = [truth](const Matrix& x) { return log_density_invertible_batch(truth, x); };
  const InvertibleGeneratorModel model(config.dim, config.layers, Vector::Ones(config.dim), Activation::exact_leaky(0.5));
  const auto critic = make_discriminator(config.discriminator, config.dim, config.layers);
  const auto eval_family = make_discriminator(config.discriminator, config.dim, config.layers);
  IpmConfig eval = config.eval_ipm;
  eval.regularization = Regularization::Clip;
  const MetricHooks hooks = default_hooks(eval_family, target, target_ld, eval, config.kl_samples);

  TrainingExperimentResult out;
  json runs = json::array();
  for (std::uint64_t seed : config.seeds) {
    TrainConfig tc = config.train;
    tc.seed = seed;
    const ParamSet init = model.to_params(make_ground_truth_generator(config.dim, config.layers, derive_seed(seed, 77)));
    TrainingRun run;
    run.seed = seed;
    run.trace = wgan_train(model, init, *critic, target, tc, hooks).trace;
    std::vector<double> kl, ipm;
    for (const TrainRow& r : run.trace.rows)
      if (r.kl && r.ipm_eval) kl.push_back(*r.kl), ipm.push_back(*r.ipm_eval);
    if (kl.empty()) throw NumericalError("training experiment: no evaluated checkpoints");
    run.initial_kl = kl.front();
    run.final_kl = kl.back();
    run.spearman = kl.size() >= 2 ? spearman(kl, ipm) : 0.0;
    runs.push_back({{"seed", seed}, {"initial_kl", run.initial_kl}, {"final_kl", run.final_kl}, {"spearman", run.spearman}});
    out.runs.push_back(std::move(run));
  }
  std::vector<double> ik, fk, sp;
  for (const TrainingRun& r : out.runs) ik.push_back(r.initial_kl), fk.push_back(r.final_kl), sp.push_back(r.spearman);
  out.median_initial_kl = median(ik);
  out.median_final_kl = median(fk);
  out.median_spearman = median(sp);
  out.summary = {{"kind", config.kind},
                 {"runs", runs},
                 {"median_initial_kl", out.median_initial_kl},
                 {"median_final_kl", out.median_final_kl},
                 {"median_spearman", out.median_spearman},
                 {"ground_truth", to_json(truth)},
                 {"config", config.to_json()}};
  return out;
}

// ------------------------------------------------------------ W1 tracking

W1TrackingResult run_w1_tracking_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.kind != "circle" && config.kind != "swissroll")
    throw InvalidArgument("w1 tracking: kind must be 'circle' or 'swissroll'");
  const bool circle = config.kind == "circle";
  const Sampler target = [circle](std::size_t n, std::uint64_t s) { return circle ? make_circle(n, s) : make_swissroll(n, s); };

  std::vector<Eigen::Index> gdims{2};
  gdims.insert(gdims.end(), config.generator_hidden.begin(), config.generator_hidden.end());
  gdims.push_back(2);
  const MlpGeneratorModel model(gdims);
  DiscriminatorConfig dc = config.discriminator;
  dc.type = "mlp";
  dc.hidden = config.critic_hidden;
  const auto critic = make_discriminator(dc, 2, config.layers);
  const auto eval_family = make_discriminator(dc, 2, config.layers);
  IpmConfig eval = config.eval_ipm;
  eval.regularization = Regularization::Clip;
  const MetricHooks base = default_hooks(eval_family, target, std::nullopt, eval);

  W1TrackingResult out;
  json runs = json::array();
  for (std::uint64_t seed : config.seeds) {
    std::vector<double> w1s;
    MetricHooks hooks;
    hooks.ipm_eval = [&](const GeneratorModel& m, const ParamSet& params, std::uint64_t s) {
      w1s.push_back(w1_exact(target(config.w1_batch, derive_seed(s, 11)), m.sample(params, config.w1_batch, derive_seed(s, 12))));
      return base.ipm_eval(m, params, s);
    };
    TrainConfig tc = config.train;
    tc.seed = seed;
    const TrainTrace trace = wgan_train(model, model.initialize(derive_seed(seed, 5)), *critic, target, tc, hooks).trace;
    W1Run run;
    run.seed = seed;
    std::vector<double> ipm;
    for (std::size_t i = 0; i < trace.rows.size(); ++i) {
      run.rows.push_back({trace.rows[i].step, *trace.rows[i].ipm_eval, w1s.at(i)});
      ipm.push_back(*trace.rows[i].ipm_eval);
    }
    run.pearson = ipm.size() >= 2 ? pearson(ipm, w1s) : 0.0;
    runs.push_back({{"seed", seed},
                    {"pearson", run.pearson},
                    {"w1_initial", run.rows.front().w1},
                    {"w1_final", run.rows.back().w1}});
    out.runs.push_back(std::move(run));
  }
  std::vector<double> pr;
  for (const W1Run& r : out.runs) pr.push_back(r.pearson);
  out.median_pearson = median(pr);
  out.summary = {{"kind", config.kind}, {"runs", runs}, {"median_pearson", out.median_pearson}, {"config", config.to_json()}};
  return out;
}

std::string w1_csv(const std::vector<W1Row>& rows) {
  std::ostringstream out;
  out << "step,ipm,w1\n";
  for (const W1Row& r : rows) out << r.step << ',' << fmt(r.ipm) << ',' << fmt(r.w1) << '\n';
  return out.str();
}

std::vector<W1Row> parse_w1_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "step,ipm,w1") throw InvalidArgument("w1 csv: unexpected header");
  std::vector<W1Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 3) throw InvalidArgument("w1 csv: expected 3 fields in '" + line + "'");
    rows.push_back({std::stoull(f[0]), std::stod(f[1]), std::stod(f[2])});
  }
  return rows;
}

// ------------------------------------------------------------------ driver

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot write " + path.string());
  f << text;
}

}  // namespace

json run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  json summary;
  if (config.kind == "perturbation") {
    const PerturbationResult r = run_perturbation_experiment(config);
    write_file(dir / "pairs.csv", perturbation_csv(r.rows));
    const CorrelationResult& c = r.correlation;
    summary = {{"kind", config.kind},
               {"pearson_log", c.pearson_log},
               {"pearson_log_with_outliers", c.pearson_log_all},
               {"n_pairs", r.rows.size()},
               {"n_outliers_dropped", c.n_outliers_dropped},
               {"n_degenerate", c.n_degenerate},
               {"jackknife_min", c.jackknife_min},
               {"jackknife_max", c.jackknife_max},
               {"fitted_slope", c.fitted_slope},
               {"fitted_intercept", c.fitted_intercept},
               {"noise_scales", r.noise_scales},
               {"config", config.to_json()}};
    if (config.write_svg) {
      PlotSeries s{"pairs", {}, {}};
      for (const auto& [k, v] : c.pairs) s.x.push_back(k), s.y.push_back(v);
      write_file(dir / "scatter.svg", svg_scatter({s}, {"KL vs IPM on perturbed pairs", "KL(p||q) + KL(q||p)", "IPM", true, true}));
    }
  } else if (config.kind == "invertible") {
    const TrainingExperimentResult r = run_training_experiment(config);
    std::vector<PlotSeries> kl, ipm;
    for (const TrainingRun& run : r.runs) {
      write_file(dir / ("trace_seed" + std::to_string(run.seed) + ".csv"), run.trace.to_csv());
      PlotSeries a{"seed " + std::to_string(run.seed), {}, {}}, b = a;
      for (const TrainRow& row : run.trace.rows) {
        if (row.kl) a.x.push_back(static_cast<double>(row.step)), a.y.push_back(*row.kl);
        if (row.ipm_eval) b.x.push_back(static_cast<double>(row.step)), b.y.push_back(*row.ipm_eval);
      }
      kl.push_back(a);
      ipm.push_back(b);
    }
    summary = r.summary;
    if (config.write_svg) {
      write_file(dir / "kl.svg", svg_line_chart(kl, {"KL divergence", "step", "KL", false, true}));
      write_file(dir / "ipm_eval.svg", svg_line_chart(ipm, {"IPM (eval)", "step", "IPM", false, false}));
    }
  } else {
    const W1TrackingResult r = run_w1_tracking_experiment(config);
    std::vector<PlotSeries> series;
    for (const W1Run& run : r.runs) {
      write_file(dir / ("w1_seed" + std::to_string(run.seed) + ".csv"), w1_csv(run.rows));
      PlotSeries a{"ipm seed " + std::to_string(run.seed), {}, {}}, b{"w1 seed " + std::to_string(run.seed), {}, {}};
      for (const W1Row& row : run.rows) {
        a.x.push_back(static_cast<double>(row.step)), a.y.push_back(row.ipm);
        b.x.push_back(static_cast<double>(row.step)), b.y.push_back(row.w1);
      }
      series.push_back(a);
      series.push_back(b);
    }
    summary = r.summary;
    if (config.write_svg) write_file(dir / "curves.svg", svg_line_chart(series, {"IPM and W1", "step", "value", false, false}));
  }
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace ralab
