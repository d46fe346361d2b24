#include "ralab/generators.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace ralab {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

Matrix apply(const Matrix& m, double (Activation::*fn)(double) const, const Activation& act) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index k = 0; k < m.size(); ++k) out.data()[k] = (act.*fn)(m.data()[k]);
  return out;
}

Eigen::VectorXd singular_values(const Matrix& w) {
  Eigen::JacobiSVD<Matrix> svd(w);
  return svd.singularValues();
}

// Inverse of a layer weight; throws when numerically singular.
Matrix checked_inverse(const Matrix& w, std::size_t layer) {
  const Vector s = singular_values(w);
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || s(0) / smin > 1.0 / kEps) {
    std::ostringstream msg;
    msg << "layer " << layer << " weight is singular (condition number "
        << (smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity()) << ")";
    throw NumericalError(msg.str());
  }
  return w.partialPivLu().inverse();
}

void require_rows(const Matrix& points, Eigen::Index d, const char* what) {
  if (points.cols() != d) {
    std::ostringstream msg;
    msg << what << ": expected " << d << " columns, got " << points.cols();
    throw ShapeError(msg.str());
  }
}

}  // namespace

// ---------------------------------------------------------------- Gaussian

void validate(const GaussianSpec& spec) {
  const Eigen::Index d = spec.mean.size();
  if (d == 0) throw InvalidArgument("gaussian: empty mean");
  if (spec.covariance.rows() != d || spec.covariance.cols() != d)
    throw ShapeError("gaussian: covariance must be d x d");
  if (!spec.mean.allFinite() || !spec.covariance.allFinite()) throw NonFiniteError("gaussian: non-finite parameters");
  if ((spec.covariance - spec.covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, spec.covariance.cwiseAbs().maxCoeff()))
    throw InvalidArgument("gaussian: covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(spec.covariance, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues()(0) > 0.0)) throw InvalidArgument("gaussian: covariance is not positive definite");
}

bool in_gaussian_class(const GaussianSpec& spec, double mean_bound, double sigma_min, double sigma_max) {
  validate(spec);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(spec.covariance, Eigen::EigenvaluesOnly);
  const double tol = 1e-12;
  return spec.mean.norm() <= mean_bound + tol && eig.eigenvalues()(0) >= sigma_min * sigma_min - tol &&
         eig.eigenvalues()(spec.dim() - 1) <= sigma_max * sigma_max + tol;
}

Vector log_density_batch(const GaussianSpec& spec, const Matrix& points) {
  validate(spec);
  require_rows(points, spec.dim(), "gaussian log density");
  Eigen::LLT<Matrix> llt(spec.covariance);
  const Matrix centered = (points.rowwise() - spec.mean.transpose()).transpose();
  const Matrix solved = llt.matrixL().solve(centered);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double d = static_cast<double>(spec.dim());
  return (-0.5 * solved.colwise().squaredNorm().array() - 0.5 * (d * kLog2Pi + log_det)).transpose();
}

double log_density(const GaussianSpec& spec, const Vector& x) {
  return log_density_batch(spec, x.transpose())(0);
}

Matrix sample(const GaussianSpec& spec, std::size_t n, std::uint64_t seed) {
  validate(spec);
  if (n == 0) throw InvalidArgument("sample: n must be >= 1");
  Rng rng(seed);
  Eigen::LLT<Matrix> llt(spec.covariance);
  const Matrix noise = standard_normal(rng, static_cast<Eigen::Index>(n), spec.dim());
  return (noise * llt.matrixL().transpose()).rowwise() + spec.mean.transpose();
}

// ----------------------------------------------------------------- Mixture

void validate(const MixtureSpec& spec, double weight_floor_log, double mean_bound) {
  const Eigen::Index k = spec.weights.size();
  if (k == 0) throw InvalidArgument("mixture: no components");
  if (spec.means.rows() != k) throw ShapeError("mixture: means must have one row per component");
  if (spec.means.cols() == 0) throw ShapeError("mixture: zero dimension");
  if (!spec.weights.allFinite() || !spec.means.allFinite()) throw NonFiniteError("mixture: non-finite parameters");
  if ((spec.weights.array() <= 0.0).any()) throw InvalidArgument("mixture: weights must be positive");
  if (std::abs(spec.weights.sum() - 1.0) > 1e-9) throw InvalidArgument("mixture: weights must sum to 1");
  if (weight_floor_log >= 0.0 && (spec.weights.array() < std::exp(-weight_floor_log) - 1e-15).any())
    throw ConstraintViolation("mixture: weight below exp(-B_w)");
  if (mean_bound >= 0.0 && (spec.means.rowwise().norm().array() > mean_bound + 1e-12).any())
    throw ConstraintViolation("mixture: component mean outside the D-ball");
}

Vector log_density_mixture_batch(const MixtureSpec& spec, const Matrix& points) {
  validate(spec);
  require_rows(points, spec.dim(), "mixture log density");
  const Eigen::Index n = points.rows();
  const Eigen::Index k = spec.components();
  const Vector log_w = spec.weights.array().log();
  Vector out(n);
  Vector terms(k);
  const double norm = 0.5 * static_cast<double>(spec.dim()) * kLog2Pi;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j)
      terms(j) = log_w(j) - 0.5 * (points.row(i) - spec.means.row(j)).squaredNorm();
    out(i) = log_sum_exp(terms) - norm;
  }
  return out;
}

double log_density_mixture(const MixtureSpec& spec, const Vector& x) {
  return log_density_mixture_batch(spec, x.transpose())(0);
}

Matrix sample(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  validate(spec);
  if (n == 0) throw InvalidArgument("sample: n must be >= 1");
  Rng rng(seed);
  std::discrete_distribution<Eigen::Index> pick(spec.weights.data(), spec.weights.data() + spec.weights.size());
  Matrix out = standard_normal(rng, static_cast<Eigen::Index>(n), spec.dim());
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) += spec.means.row(pick(rng));
  return out;
}

// ------------------------------------------------------ Exponential family

double UnitGaussianMeanFamily::log_density(const Vector& x) const {
  if (x.size() != theta.size()) throw ShapeError("exp family: dimension mismatch");
  return theta.dot(sufficient_statistic(x)) - log_partition(theta) - 0.5 * x.squaredNorm() -
         0.5 * static_cast<double>(x.size()) * kLog2Pi;
}

Matrix UnitGaussianMeanFamily::sample(std::size_t n, std::uint64_t seed) const {
  if (n == 0) throw InvalidArgument("sample: n must be >= 1");
  Rng rng(seed);
  return standard_normal(rng, static_cast<Eigen::Index>(n), theta.size()).rowwise() + theta.transpose();
}

// ------------------------------------------------------------- Invertible

void validate(const InvertibleGeneratorSpec& spec) {
  const Eigen::Index d = spec.gamma.size();
  if (spec.layers.empty()) throw InvalidArgument("invertible generator: no layers");
  if (d == 0) throw InvalidArgument("invertible generator: empty gamma");
  if ((spec.gamma.array() <= 0.0).any() || !spec.gamma.allFinite())
    throw InvalidArgument("invertible generator: latent scales must be positive");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& layer = spec.layers[i];
    if (layer.weight.rows() != d || layer.weight.cols() != d || layer.bias.size() != d)
      throw ShapeError("invertible generator: layer " + std::to_string(i) + " is not " + std::to_string(d) + "x" +
                       std::to_string(d));
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw NonFiniteError("invertible generator: non-finite layer " + std::to_string(i));
  }
}

std::vector<std::string> constraint_violations(const InvertibleGeneratorSpec& spec) {
  validate(spec);
  std::vector<std::string> out;
  const GeneratorConstraints& c = spec.constraints;
  const double tol = 1e-12;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Vector s = singular_values(spec.layers[i].weight);
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    const double inv = smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
    if (std::max(smax, inv) > c.weight_bound + tol) {
      std::ostringstream msg;
      msg << "layer " << i << ": max(|W|_op, |W^-1|_op) = " << std::max(smax, inv) << " > R_W = " << c.weight_bound;
      out.push_back(msg.str());
    }
    if (spec.layers[i].bias.norm() > c.bias_bound + tol) {
      std::ostringstream msg;
      msg << "layer " << i << ": |b| = " << spec.layers[i].bias.norm() << " > R_b = " << c.bias_bound;
      out.push_back(msg.str());
    }
  }
  if ((spec.gamma.array() < c.min_latent_scale - tol).any() || (spec.gamma.array() > 1.0 + tol).any())
    out.push_back("gamma outside [delta, 1]");
  if (spec.activation.kind != Activation::Kind::Identity && spec.activation.slope < 1.0 / c.c_sigma - tol)
    out.push_back("activation slope below 1 / c_sigma");
  return out;
}

Matrix invertible_forward_batch(const InvertibleGeneratorSpec& spec, const Matrix& latents) {
  validate(spec);
  require_rows(latents, spec.dim(), "invertible_forward");
  Matrix h = latents;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    h = (h * spec.layers[i].weight.transpose()).rowwise() + spec.layers[i].bias.transpose();
    if (i + 1 < spec.layers.size()) h = apply(h, &Activation::value, spec.activation);
  }
  return h;
}

Vector invertible_forward(const InvertibleGeneratorSpec& spec, const Vector& z) {
  return invertible_forward_batch(spec, z.transpose()).row(0).transpose();
}

namespace {

// Runs the inverse network; accumulates sum_k <1, log sigma^{-1}'(h_k)> per
// row when log_jac is non-null.
Matrix inverse_pass(const InvertibleGeneratorSpec& spec, const Matrix& points, Vector* log_jac) {
  validate(spec);
  require_rows(points, spec.dim(), "invertible_inverse");
  Matrix h = points;
  if (log_jac) log_jac->setZero(points.rows());
  for (std::size_t idx = spec.layers.size(); idx-- > 0;) {
    const Layer& layer = spec.layers[idx];
    const Matrix inv = checked_inverse(layer.weight, idx);
    h = (h.rowwise() - layer.bias.transpose()) * inv.transpose();
    if (idx > 0) {
      if (log_jac) *log_jac += apply(h, &Activation::log_inverse_derivative, spec.activation).rowwise().sum();
      h = apply(h, &Activation::inverse, spec.activation);
    }
  }
  return h;
}

}  // namespace

Matrix invertible_inverse_batch(const InvertibleGeneratorSpec& spec, const Matrix& points) {
  return inverse_pass(spec, points, nullptr);
}

Vector invertible_inverse(const InvertibleGeneratorSpec& spec, const Vector& x) {
  return invertible_inverse_batch(spec, x.transpose()).row(0).transpose();
}

double inverse_log_det(const InvertibleGeneratorSpec& spec) {
  validate(spec);
  double total = 0.0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    checked_inverse(spec.layers[i].weight, i);
    total -= spec.layers[i].weight.partialPivLu().matrixLU().diagonal().cwiseAbs().array().log().sum();
  }
  return total;
}

Vector log_density_invertible_batch(const InvertibleGeneratorSpec& spec, const Matrix& points) {
  Vector log_jac;
  const Matrix z = inverse_pass(spec, points, &log_jac);
  const Vector inv_var = spec.gamma.array().square().inverse();
  const double d = static_cast<double>(spec.dim());
  const double norm = -0.5 * d * kLog2Pi - spec.gamma.array().log().sum() + inverse_log_det(spec);
  return (-0.5 * (z.array().square().matrix() * inv_var)).array() + norm + log_jac.array();
}

double log_density_invertible(const InvertibleGeneratorSpec& spec, const Vector& x) {
  return log_density_invertible_batch(spec, x.transpose())(0);
}

Matrix sample_latent(const InvertibleGeneratorSpec& spec, std::size_t n, std::uint64_t seed) {
  validate(spec);
  if (n == 0) throw InvalidArgument("sample: n must be >= 1");
  Rng rng(seed);
  Matrix z = standard_normal(rng, static_cast<Eigen::Index>(n), spec.dim());
  return z * spec.gamma.asDiagonal();
}

Matrix sample(const InvertibleGeneratorSpec& spec, std::size_t n, std::uint64_t seed) {
  return invertible_forward_batch(spec, sample_latent(spec, n, seed));
}

Matrix random_well_conditioned(Rng& rng, Eigen::Index d, double s_lo, double s_hi) {
  const Matrix u = random_orthogonal(rng, d);
  const Matrix v = random_orthogonal(rng, d);
  Vector s(d);
  for (Eigen::Index i = 0; i < d; ++i) s(i) = uniform(rng, s_lo, s_hi);
  return u * s.asDiagonal() * v.transpose();
}

// -------------------------------------------------------------- Injective

void validate(const InjectiveGeneratorSpec& spec) {
  if (spec.layers.empty()) throw InvalidArgument("injective generator: no layers");
  Eigen::Index prev = spec.layers.front().weight.cols();
  if (prev == 0) throw ShapeError("injective generator: zero latent dimension");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& layer = spec.layers[i];
    if (layer.weight.cols() != prev || layer.bias.size() != layer.weight.rows())
      throw ShapeError("injective generator: layer " + std::to_string(i) + " shape mismatch");
    if (layer.weight.rows() < layer.weight.cols())
      throw ShapeError("injective generator: layer " + std::to_string(i) + " is wider than tall");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw NonFiniteError("injective generator: non-finite layer " + std::to_string(i));
    prev = layer.weight.rows();
  }
}

Matrix injective_forward_batch(const InjectiveGeneratorSpec& spec, const Matrix& latents) {
  validate(spec);
  require_rows(latents, spec.latent_dim(), "injective_forward");
  Matrix h = latents;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    h = (h * spec.layers[i].weight.transpose()).rowwise() + spec.layers[i].bias.transpose();
    if (i + 1 < spec.layers.size() || spec.activation_on_output) h = apply(h, &Activation::value, spec.activation);
  }
  return h;
}

Vector injective_forward(const InjectiveGeneratorSpec& spec, const Vector& z) {
  return injective_forward_batch(spec, z.transpose()).row(0).transpose();
}

Matrix sample_latent(const InjectiveGeneratorSpec& spec, std::size_t n, std::uint64_t seed) {
  validate(spec);
  if (n == 0) throw InvalidArgument("sample: n must be >= 1");
  Rng rng(seed);
  return standard_normal(rng, static_cast<Eigen::Index>(n), spec.latent_dim()) * std::sqrt(0.5);
}

Matrix sample(const InjectiveGeneratorSpec& spec, std::size_t n, std::uint64_t seed) {
  return injective_forward_batch(spec, sample_latent(spec, n, seed));
}

double injectivity_constant(const InjectiveGeneratorSpec& spec) {
  validate(spec);
  const double l_sigma = spec.activation.inverse_lipschitz();
  double r = 1.0;
  std::size_t activated = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Vector s = singular_values(spec.layers[i].weight);
    r *= s(s.size() - 1);
    if (i + 1 < spec.layers.size() || spec.activation_on_output) ++activated;
  }
  return r / std::pow(l_sigma, static_cast<double>(activated));
}

double inversion_constant(const InjectiveGeneratorSpec& spec) {
  validate(spec);
  const double l_sigma = spec.activation.inverse_lipschitz();
  double c = 1.0;
  for (const Layer& layer : spec.layers) {
    const Vector s = singular_values(layer.weight);
    c *= 2.0 * l_sigma / s(s.size() - 1);
  }
  return c;
}

InjectiveRegularity measured_regularity(const InjectiveGeneratorSpec& spec) {
  InjectiveRegularity r = spec.regularity;
  r.L_sigma = spec.activation.inverse_lipschitz();
  r.R = injectivity_constant(spec);
  r.L_G = inversion_constant(spec);
  return r;
}

}  // namespace ralab
