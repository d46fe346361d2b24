#pragma once

#include <string>

namespace ralab {

// Scalar activation used by generators and mirrored (inverted) by the
// log-density discriminators.
//
// ExactLeaky:  sigma(t) = t for t >= 0, slope * t otherwise.
// SmoothLeaky: sigma(t) = slope * t + (1 - slope) * s * (softplus(t / s) - log 2),
//              a twice-differentiable blend with sigma(0) = 0 and
//              sigma'(t) in (slope, 1).
// Identity:    sigma(t) = t.
struct Activation {
  enum class Kind { ExactLeaky, SmoothLeaky, Identity };

  Kind kind = Kind::ExactLeaky;
  double slope = 0.5;
  double sharpness = 1.0;

  static Activation exact_leaky(double slope = 0.5) { return {Kind::ExactLeaky, slope, 1.0}; }
  static Activation smooth_leaky(double slope = 0.5, double sharpness = 1.0) {
    return {Kind::SmoothLeaky, slope, sharpness};
  }
  static Activation identity() { return {Kind::Identity, 1.0, 1.0}; }

  double value(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;

  double inverse(double y) const;
  // (sigma^{-1})'(y)
  double inverse_derivative(double y) const;
  // log (sigma^{-1})'(y); piecewise constant {0, -log slope} for ExactLeaky.
  double log_inverse_derivative(double y) const;
  // d/dy log (sigma^{-1})'(y); zero almost everywhere for ExactLeaky.
  double log_inverse_derivative_slope(double y) const;

  // Lipschitz constant of sigma^{-1}.
  double inverse_lipschitz() const { return kind == Kind::Identity ? 1.0 : 1.0 / slope; }

  std::string name() const;
  static Activation from_name(const std::string& name, double slope = 0.5, double sharpness = 1.0);

  friend bool operator==(const Activation&, const Activation&) = default;
};

}  // namespace ralab
