#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ralab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Parameters of a trainable model, one dense block per tensor.
using ParamSet = std::vector<Matrix>;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf showed up where a finite value is required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Parameters left the constraint set a family is defined on.
class ConstraintViolation : public Error {
 public:
  using Error::Error;
};

// Numerical procedure failed to reach its target (singular matrix,
// unresolved eigengap, optimizer divergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// splitmix64 mix of (seed, unit); used for every per-restart / per-pair stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t unit);

Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols);
double uniform(Rng& rng, double lo, double hi);

// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthogonal(Rng& rng, Eigen::Index n);

bool all_finite(const Matrix& m);

// log(sum(exp(v))) without overflow.
double log_sum_exp(const Eigen::Ref<const Vector>& v);

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLog2Pi = 1.83787706640934548356;

}  // namespace ralab
