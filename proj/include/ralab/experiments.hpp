#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "ralab/core.hpp"
#include "ralab/discriminators.hpp"
#include "ralab/divergences.hpp"
#include "ralab/generators.hpp"
#include "ralab/training.hpp"

namespace ralab {

// ------------------------------------------------------------- datasets

// Uniform on the unit circle.
Matrix make_circle(std::size_t n, std::uint64_t seed);
// (z cos 4 pi z, z sin 4 pi z), z ~ U[0.25, 1].
Matrix make_swissroll(std::size_t n, std::uint64_t seed);

// W = U diag(s) V^T with s ~ U[0.5, 2], b = 0, exact leaky ReLU (0.5), gamma = 1.
InvertibleGeneratorSpec make_ground_truth_generator(Eigen::Index d, std::size_t layers, std::uint64_t seed);

struct PerturbedGenerator {
  InvertibleGeneratorSpec spec;
  bool flagged = false;  // left the constraint set
  std::vector<std::string> violations;
};

// W' = W + s N(0, 1) / sqrt(d), b' = b + s N(0, 1).
PerturbedGenerator perturb_generator(const InvertibleGeneratorSpec& spec, double noise_scale, std::uint64_t seed);

// ---------------------------------------------------------------- config

struct DiscriminatorConfig {
  std::string type = "logdensity";  // logdensity | mlp
  std::string branch = "trainable";  // trainable | exact
  int branch_width = 16;
  double weight_bound = 2.5;
  double bias_bound = 5.0;
  std::vector<Eigen::Index> hidden{50, 10};  // mlp only
  double mlp_weight_bound = 0.0;             // operator-norm ball per layer; 0 leaves weights free
};

struct ExperimentConfig {
  std::string kind = "perturbation";  // circle | swissroll | invertible | perturbation
  std::string scale = "desk";         // desk | paper
  std::vector<std::uint64_t> seeds{0};
  Eigen::Index dim = 6;
  std::size_t layers = 2;
  std::uint64_t ground_truth_seed = 2019;

  // perturbation
  std::size_t pairs = 30;
  double noise_min = 0.02;
  double noise_max = 0.3;
  std::size_t kl_samples = 100000;
  IpmConfig ipm{};

  // training
  DiscriminatorConfig discriminator{};
  TrainConfig train{};
  IpmConfig eval_ipm{};

  // w1 tracking
  std::size_t w1_batch = 512;
  std::vector<Eigen::Index> generator_hidden{50, 50};
  std::vector<Eigen::Index> critic_hidden{50, 50};

  bool write_svg = true;

  void validate() const;
  static ExperimentConfig defaults(const std::string& kind, const std::string& scale = "desk");
  // Unspecified keys fall back to defaults(kind, scale).
  static ExperimentConfig from_json(const nlohmann::json& j, const std::string& kind = "",
                                    const std::string& scale = "");
  nlohmann::json to_json() const;
};

std::shared_ptr<DiscriminatorFamily> make_discriminator(const DiscriminatorConfig& config, Eigen::Index dim,
                                                        std::size_t layers);

// ----------------------------------------------------------- perturbation

struct PerturbationRow {
  std::size_t pair_id = 0;
  double kl_pq = 0.0;
  double kl_qp = 0.0;
  double kl_sym = 0.0;
  double ipm = 0.0;
  bool flagged = false;
};

struct CorrelationResult {
  std::vector<std::pair<double, double>> pairs;  // (kl_sym, ipm) entering the correlation
  double pearson_log = 0.0;
  std::size_t n_outliers_dropped = 0;
  std::size_t n_degenerate = 0;     // kl_sym or ipm not positive
  double pearson_log_all = 0.0;     // flagged pairs kept
  double jackknife_min = 0.0;
  double jackknife_max = 0.0;
  double fitted_slope = 0.0;        // log ipm = intercept + slope log kl_sym
  double fitted_intercept = 0.0;
};

// Correlation of (log kl_sym, log ipm) over unflagged rows with positive values.
CorrelationResult correlate(const std::vector<PerturbationRow>& rows);

struct PerturbationResult {
  std::vector<PerturbationRow> rows;
  std::vector<double> noise_scales;
  CorrelationResult correlation;
};

PerturbationResult run_perturbation_experiment(const ExperimentConfig& config);
// Header `pair_id,kl_pq,kl_qp,kl_sym,ipm,flagged`.
std::string perturbation_csv(const std::vector<PerturbationRow>& rows);
std::vector<PerturbationRow> parse_perturbation_csv(const std::string& text);

// --------------------------------------------------------------- training

struct TrainingRun {
  std::uint64_t seed = 0;
  TrainTrace trace;
  double initial_kl = 0.0;
  double final_kl = 0.0;
  double spearman = 0.0;  // Spearman(kl, ipm_eval) over checkpoints
};

struct TrainingExperimentResult {
  std::vector<TrainingRun> runs;
  double median_initial_kl = 0.0;
  double median_final_kl = 0.0;
  double median_spearman = 0.0;
  nlohmann::json summary;
};

TrainingExperimentResult run_training_experiment(const ExperimentConfig& config);

// ------------------------------------------------------------ W1 tracking

struct W1Row {
  std::size_t step = 0;
  double ipm = 0.0;
  double w1 = 0.0;
};

struct W1Run {
  std::uint64_t seed = 0;
  std::vector<W1Row> rows;
  double pearson = 0.0;  // corr(ipm, w1) over checkpoints
};

struct W1TrackingResult {
  std::vector<W1Run> runs;
  double median_pearson = 0.0;
  nlohmann::json summary;
};

W1TrackingResult run_w1_tracking_experiment(const ExperimentConfig& config);
// Header `step,ipm,w1`.
std::string w1_csv(const std::vector<W1Row>& rows);
std::vector<W1Row> parse_w1_csv(const std::string& text);

// Runs config.kind, writes CSV / JSON (and SVG when enabled) into out_dir and
// returns the summary document.
nlohmann::json run_experiment(const ExperimentConfig& config, const std::string& out_dir);

}  // namespace ralab
