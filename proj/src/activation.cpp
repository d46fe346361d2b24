#include "ralab/activation.hpp"

#include <algorithm>
#include <cmath>

#include "ralab/core.hpp"

namespace ralab {
namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double Activation::value(double t) const {
  switch (kind) {
    case Kind::ExactLeaky:
      return t >= 0.0 ? t : slope * t;
    case Kind::SmoothLeaky:
      return slope * t + (1.0 - slope) * sharpness * (softplus(t / sharpness) - std::log(2.0));
    case Kind::Identity:
      return t;
  }
  return t;
}

double Activation::derivative(double t) const {
  switch (kind) {
    case Kind::ExactLeaky:
      return t >= 0.0 ? 1.0 : slope;
    case Kind::SmoothLeaky:
      return slope + (1.0 - slope) * sigmoid(t / sharpness);
    case Kind::Identity:
      return 1.0;
  }
  return 1.0;
}

double Activation::second_derivative(double t) const {
  if (kind != Kind::SmoothLeaky) return 0.0;
  const double s = sigmoid(t / sharpness);
  return (1.0 - slope) / sharpness * s * (1.0 - s);
}

double Activation::inverse(double y) const {
  switch (kind) {
    case Kind::ExactLeaky:
      return y >= 0.0 ? y : y / slope;
    case Kind::Identity:
      return y;
    case Kind::SmoothLeaky:
      break;
  }
  if (y == 0.0) return 0.0;
  // sigma' lies in [slope, 1] and sigma(0) = 0, so the root is bracketed by
  // [y, y / slope] (or the mirror image for y < 0).
  double lo = y > 0.0 ? y : y / slope;
  double hi = y > 0.0 ? y / slope : y;
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double r = value(t) - y;
    if (r > 0.0) hi = t; else lo = t;
    double next = t - r / derivative(t);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-16 * std::max(1.0, std::abs(t))) {
      t = next;
      break;
    }
    t = next;
  }
  return t;
}

double Activation::inverse_derivative(double y) const {
  switch (kind) {
    case Kind::ExactLeaky:
      return y >= 0.0 ? 1.0 : 1.0 / slope;
    case Kind::Identity:
      return 1.0;
    case Kind::SmoothLeaky:
      return 1.0 / derivative(inverse(y));
  }
  return 1.0;
}

double Activation::log_inverse_derivative(double y) const {
  switch (kind) {
    case Kind::ExactLeaky:
      return y >= 0.0 ? 0.0 : -std::log(slope);
    case Kind::Identity:
      return 0.0;
    case Kind::SmoothLeaky:
      return -std::log(derivative(inverse(y)));
  }
  return 0.0;
}

double Activation::log_inverse_derivative_slope(double y) const {
  if (kind != Kind::SmoothLeaky) return 0.0;
  const double t = inverse(y);
  const double d = derivative(t);
  return -second_derivative(t) / (d * d);
}

std::string Activation::name() const {
  switch (kind) {
    case Kind::ExactLeaky:
      return "exact_leaky";
    case Kind::SmoothLeaky:
      return "smooth_leaky";
    case Kind::Identity:
      return "identity";
  }
  return "unknown";
}

Activation Activation::from_name(const std::string& name, double slope, double sharpness) {
  if (name == "exact_leaky") return exact_leaky(slope);
  if (name == "smooth_leaky") return smooth_leaky(slope, sharpness);
  if (name == "identity") return identity();
  throw InvalidArgument("unknown activation: " + name);
}

}  // namespace ralab
