#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ralab/experiments.hpp"
#include "ralab/stats.hpp"
#include "ralab/svg.hpp"

using namespace ralab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ralab_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("circle samples lie on the circle with uniform angle") {
  const Matrix x = make_circle(20000, 1);
  CHECK((x.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  std::vector<double> theta;
  for (Eigen::Index i = 0; i < x.rows(); ++i) theta.push_back(std::atan2(x(i, 1), x(i, 0)));
  const KsResult ks = ks_test(theta, [](double t) { return (t + M_PI) / (2 * M_PI); });
  CHECK(ks.p_value > 1e-3);
  CHECK((make_circle(50, 7) - make_circle(50, 7)).norm() == 0.0);
}

TEST_CASE("swiss roll radius is uniform on [0.25, 1]") {
  const Matrix x = make_swissroll(20000, 2);
  std::vector<double> r;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double z = x.row(i).norm();
    r.push_back(z);
    // the point sits at angle 4 pi z
    CHECK(std::abs(x(i, 0) - z * std::cos(4 * M_PI * z)) < 1e-12);
  }
  CHECK(*std::min_element(r.begin(), r.end()) >= 0.25);
  CHECK(*std::max_element(r.begin(), r.end()) <= 1.0);
  CHECK(ks_test(r, [](double z) { return (z - 0.25) / 0.75; }).p_value > 1e-3);
}

TEST_CASE("ground truth generator and perturbations") {
  const InvertibleGeneratorSpec g = make_ground_truth_generator(6, 2, 11);
  REQUIRE(g.depth() == 2);
  for (const Layer& l : g.layers) {
    const Vector s = Eigen::JacobiSVD<Matrix>(l.weight).singularValues();
    CHECK(s.maxCoeff() <= 2.0 + 1e-12);
    CHECK(s.minCoeff() >= 0.5 - 1e-12);
    CHECK(l.bias.norm() == 0.0);
  }
  CHECK(constraint_violations(g).empty());

  const PerturbedGenerator same = perturb_generator(g, 0.0, 3);
  CHECK(!same.flagged);
  for (std::size_t i = 0; i < g.depth(); ++i) CHECK((same.spec.layers[i].weight - g.layers[i].weight).norm() == 0.0);

  const PerturbedGenerator near = perturb_generator(g, 0.05, 3);
  const Matrix x = sample(g, 20000, 4);
  const double kl = (log_density_invertible_batch(g, x) - log_density_invertible_batch(near.spec, x)).mean();
  CHECK(kl > 0.0);

  const PerturbedGenerator far = perturb_generator(g, 50.0, 3);
  CHECK(far.flagged);
  CHECK(!far.violations.empty());
}

TEST_CASE("perturbation csv round trip") {
  std::vector<PerturbationRow> rows{{0, 0.1, 0.2, 0.3, 1.0 / 3.0, false}, {1, 1e-9, 2.5, 2.5, 7.25, true}};
  const std::string csv = perturbation_csv(rows);
  CHECK(csv.rfind("pair_id,kl_pq,kl_qp,kl_sym,ipm,flagged\n", 0) == 0);
  const auto back = parse_perturbation_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0].ipm == rows[0].ipm);
  CHECK(back[1].flagged);
  CHECK(perturbation_csv(back) == csv);
  CHECK_THROWS_AS(parse_perturbation_csv("a,b\n1,2\n"), InvalidArgument);

  std::vector<W1Row> w{{0, 0.5, 1.25}, {100, 1.0 / 7.0, 0.0}};
  const std::string wc = w1_csv(w);
  CHECK(wc.rfind("step,ipm,w1\n", 0) == 0);
  CHECK(w1_csv(parse_w1_csv(wc)) == wc);
}

TEST_CASE("correlate drops degenerate and flagged rows") {
  std::vector<PerturbationRow> rows;
  for (std::size_t i = 0; i < 10; ++i) {
    const double k = std::pow(2.0, static_cast<double>(i));
    rows.push_back({i, k / 2, k / 2, k, 3.0 * std::sqrt(k), false});
  }
  rows.push_back({10, 0.0, 0.0, 0.0, 1.0, false});
  rows.push_back({11, 1.0, 1.0, 2.0, -1.0, false});
  rows.push_back({12, 1.0, 1.0, 2.0, 1e6, true});
  const CorrelationResult c = correlate(rows);
  CHECK(c.n_degenerate == 2);
  CHECK(c.n_outliers_dropped == 1);
  CHECK(c.pairs.size() == 10);
  CHECK(c.pearson_log == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.fitted_slope == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c.fitted_intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(c.jackknife_min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.pearson_log_all < c.pearson_log);
}

TEST_CASE("config json round trip and validation") {
  for (const char* kind : {"perturbation", "invertible", "circle", "swissroll"}) {
    for (const char* scale : {"desk", "paper"}) {
      const ExperimentConfig c = ExperimentConfig::defaults(kind, scale);
      c.validate();
      const nlohmann::json j = c.to_json();
      CHECK(ExperimentConfig::from_json(j).to_json() == j);
    }
  }
  const ExperimentConfig inv = ExperimentConfig::defaults("invertible");
  CHECK(inv.dim == 4);
  CHECK(inv.seeds.size() == 6);
  CHECK(ExperimentConfig::defaults("perturbation", "paper").dim == 10);
  CHECK(ExperimentConfig::defaults("perturbation").pairs == 30);

  const ExperimentConfig partial = ExperimentConfig::from_json({{"kind", "invertible"}, {"train", {{"lr", 0.5}}}});
  CHECK(partial.train.critic_optimizer.lr == 0.5);
  CHECK(partial.train.generator_optimizer.lr == 0.5);
  CHECK(partial.dim == 4);

  CHECK_THROWS_AS(ExperimentConfig::from_json({{"kind", "nope"}}), InvalidArgument);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"kind", "perturbation"}, {"noise_min", 0.5}, {"noise_max", 0.1}}),
                  InvalidArgument);
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"kind", "invertible"}, {"discriminator", {{"type", "x"}}}}),
                  InvalidArgument);
}

TEST_CASE("stats helpers") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(stddev({1.0, 2.0, 3.0}) == doctest::Approx(1.0));
  CHECK(pearson({1, 2, 3}, {2, 4, 7}) == doctest::Approx(0.9933992677987828));
  CHECK(spearman({1, 2, 3, 4}, {1, 8, 27, 1000}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3}, {3, 3, 1}) == doctest::Approx(-0.8660254037844387));
  CHECK(kolmogorov_tail(1.3580986393225505) == doctest::Approx(0.05).epsilon(1e-3));
}

TEST_CASE("svg output") {
  const std::string s = svg_line_chart({{"a", {1, 2, 3}, {1, NAN, 2}}}, {"t & <x>", "x", "y"});
  CHECK(s.rfind("<svg", 0) == 0);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(s.find("t &amp; &lt;x&gt;") != std::string::npos);
  CHECK(s.find("nan") == std::string::npos);
  const std::string l = svg_scatter({{"p", {0.0, 1.0, 10.0}, {1.0, 2.0, 3.0}}}, {"s", "x", "y", true, true});
  CHECK(l.find("</svg>") != std::string::npos);
}

TEST_CASE("small perturbation run is reproducible") {
  ExperimentConfig c = ExperimentConfig::defaults("perturbation");
  c.dim = 3;
  c.pairs = 4;
  c.kl_samples = 2000;
  c.ipm.restarts = 1;
  c.ipm.steps = 20;
  c.ipm.train_pool = 256;
  c.ipm.eval_batch = 256;
  const fs::path a = scratch("pert_a"), b = scratch("pert_b");
  const nlohmann::json sa = run_experiment(c, a.string());
  run_experiment(c, b.string());
  CHECK(slurp(a / "pairs.csv") == slurp(b / "pairs.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
  CHECK(fs::exists(a / "scatter.svg"));
  const auto rows = parse_perturbation_csv(slurp(a / "pairs.csv"));
  CHECK(rows.size() == 4);
  for (const auto& r : rows) CHECK(r.kl_sym == doctest::Approx(r.kl_pq + r.kl_qp));
  CHECK(sa.contains("pearson_log"));
}

TEST_CASE("small training runs are reproducible") {
  ExperimentConfig c = ExperimentConfig::defaults("invertible");
  c.dim = 2;
  c.seeds = {0, 1};
  c.kl_samples = 2000;
  c.train.total_gen_steps = 20;
  c.train.eval_every = 10;
  c.train.critic_steps = 2;
  c.eval_ipm.restarts = 1;
  c.eval_ipm.steps = 10;
  c.eval_ipm.train_pool = 256;
  c.eval_ipm.eval_batch = 256;
  c.write_svg = false;
  const fs::path a = scratch("inv_a"), b = scratch("inv_b");
  const nlohmann::json sa = run_experiment(c, a.string());
  run_experiment(c, b.string());
  for (const char* f : {"trace_seed0.csv", "trace_seed1.csv"}) {
    const TrainTrace ta = TrainTrace::from_csv(slurp(a / f)), tb = TrainTrace::from_csv(slurp(b / f));
    CHECK(ta.to_csv(false) == tb.to_csv(false));
    CHECK(ta.rows.size() == 3);
  }
  CHECK(!fs::exists(a / "kl.svg"));
  CHECK(sa.at("median_initial_kl").get<double>() > 0.0);

  for (const char* kind : {"circle", "swissroll"}) {
    ExperimentConfig w = ExperimentConfig::defaults(kind);
    w.seeds = {3};
    w.generator_hidden = {8};
    w.critic_hidden = {8};
    w.w1_batch = 64;
    w.train.total_gen_steps = 10;
    w.train.eval_every = 5;
    w.train.critic_steps = 2;
    w.eval_ipm.restarts = 1;
    w.eval_ipm.steps = 10;
    w.eval_ipm.train_pool = 128;
    w.eval_ipm.eval_batch = 128;
    const fs::path wa = scratch(std::string(kind) + "_a"), wb = scratch(std::string(kind) + "_b");
    run_experiment(w, wa.string());
    run_experiment(w, wb.string());
    CHECK(slurp(wa / "w1_seed3.csv") == slurp(wb / "w1_seed3.csv"));
    CHECK(parse_w1_csv(slurp(wa / "w1_seed3.csv")).size() == 3);
    CHECK(fs::exists(wa / "curves.svg"));
  }
}
