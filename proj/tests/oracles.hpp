// Reference computations used by the tests. Each one is derived independently
// of the library routine it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "ralab/core.hpp"
#include "ralab/discriminators.hpp"
#include "ralab/generators.hpp"

namespace oracle {

using ralab::Matrix;
using ralab::Vector;

// (1/n) min over all permutations, terms summed in ascending order.
inline double w1_brute_force(const Matrix& p, const Matrix& q) {
  const int n = static_cast<int>(p.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    std::vector<double> terms(n);
    for (int i = 0; i < n; ++i) terms[i] = (p.row(i) - q.row(perm[i])).norm();
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / n;
}

// Exact sum of doubles as a nonoverlapping expansion (two-sum growth).
class ExactSum {
 public:
  void add(double x) {
    std::vector<double> out;
    double q = x;
    for (double e : parts_) {
      const double s = q + e;
      const double bv = s - q;
      const double err = (q - (s - bv)) + (e - bv);
      if (err != 0.0) out.push_back(err);
      q = s;
    }
    if (q != 0.0) out.push_back(q);
    parts_ = std::move(out);
  }
  // Sign of the exact value: the largest component dominates.
  int sign() const { return parts_.empty() ? 0 : (parts_.back() > 0 ? 1 : -1); }

 private:
  std::vector<double> parts_;
};

// Exact cost difference of two 1-D matchings, sum |p_i - q_a(i)| - sum |p_i - q_b(i)|.
inline int compare_matchings_1d(const Matrix& p, const Matrix& q, const std::vector<int>& a, const std::vector<int>& b) {
  ExactSum s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = p(static_cast<Eigen::Index>(i), 0);
    const double ya = q(a[i], 0), yb = q(b[i], 0);
    const double sa = x >= ya ? 1.0 : -1.0, sb = x >= yb ? 1.0 : -1.0;
    s.add(sa * x);
    s.add(-sa * ya);
    s.add(-sb * x);
    s.add(sb * yb);
  }
  return s.sign();
}

// Whether matching the order statistics attains the minimum over all
// permutations in exact arithmetic.
inline bool sorted_matching_exactly_optimal(const Matrix& p, const Matrix& q) {
  const int n = static_cast<int>(p.rows());
  std::vector<int> ip(n), iq(n), sorted(n), perm(n);
  std::iota(ip.begin(), ip.end(), 0);
  std::iota(iq.begin(), iq.end(), 0);
  std::sort(ip.begin(), ip.end(), [&](int a, int b) { return p(a, 0) < p(b, 0); });
  std::sort(iq.begin(), iq.end(), [&](int a, int b) { return q(a, 0) < q(b, 0); });
  for (int k = 0; k < n; ++k) sorted[ip[k]] = iq[k];
  std::iota(perm.begin(), perm.end(), 0);
  do {
    if (compare_matchings_1d(p, q, perm, sorted) < 0) return false;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return true;
}

// Mean |sorted difference| in one dimension, ascending summation.
inline double w1_sorted_1d(const Matrix& p, const Matrix& q) {
  std::vector<double> a(p.data(), p.data() + p.rows()), b(q.data(), q.data() + q.rows());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<double> terms(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) terms[i] = std::abs(a[i] - b[i]);
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s / static_cast<double>(a.size());
}

inline double phi(double a) { return std::exp(-0.5 * a * a) / std::sqrt(2.0 * ralab::kPi); }

// E[max(W + a, 0)] by composite Simpson over [-a, a + 40], independent of erfc.
inline double expected_relu_quadrature(double a) {
  const double lo = -a, hi = std::max(-a, 0.0) + 40.0 + std::abs(a);
  const int n = 200000;
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = lo + i * h;
    const double f = (w + a) * phi(w);
    s += (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0)) * f;
  }
  return s * h / 3.0;
}

// sup over v in {+1, -1}, b in [-D, D] (step 1e-3) of |E_p relu(vx+b) - E_q relu(vx+b)|
// for 1-D Gaussians, evaluated with the closed-form expectation.
inline double relu_ipm_grid_1d(double mu1, double s1, double mu2, double s2, double bound) {
  auto er = [](double mu, double s, double v, double b) {
    const double sd = std::abs(v) * s;
    const double a = (v * mu + b) / sd;
    return sd * (a * 0.5 * std::erfc(-a / std::sqrt(2.0)) + phi(a));
  };
  double best = 0.0;
  for (double v : {1.0, -1.0})
    for (int i = 0; i <= static_cast<int>(std::lround(2000 * bound)); ++i) {
      const double b = -bound + i * 1e-3;
      best = std::max(best, std::abs(er(mu1, s1, v, b) - er(mu2, s2, v, b)));
    }
  return best;
}

// Grid oracle for the d-dimensional ReLU family between Gaussians with equal
// covariance direction structure: searches unit directions on a sphere grid
// (d = 2) or along the mean difference and random directions, b on a 1e-2 grid.
inline double relu_ipm_grid(const ralab::GaussianSpec& p, const ralab::GaussianSpec& q, double bound,
                            const std::vector<Vector>& directions) {
  double best = 0.0;
  for (const Vector& v : directions)
    for (int i = 0; i <= static_cast<int>(std::lround(200 * bound)); ++i) {
      const double b = -bound + i * 1e-2;
      best = std::max(best, std::abs(ralab::gaussian_expected_relu(p, v, b) - ralab::gaussian_expected_relu(q, v, b)));
    }
  return best;
}

// Jacobian of the forward network by the chain rule (forward mode).
inline Matrix forward_jacobian(const ralab::InvertibleGeneratorSpec& spec, const Vector& z) {
  Vector h = z;
  Matrix jac = Matrix::Identity(z.size(), z.size());
  for (std::size_t j = 0; j < spec.layers.size(); ++j) {
    const Vector pre = spec.layers[j].weight * h + spec.layers[j].bias;
    jac = spec.layers[j].weight * jac;
    if (j + 1 < spec.layers.size()) {
      Vector out(pre.size());
      for (Eigen::Index i = 0; i < pre.size(); ++i) {
        out(i) = spec.activation.value(pre(i));
        jac.row(i) *= spec.activation.derivative(pre(i));
      }
      h = out;
    } else {
      h = pre;
    }
  }
  return jac;
}

// log N(z; 0, diag gamma^2) - log |det dG/dz| at z.
inline double change_of_variables_log_density(const ralab::InvertibleGeneratorSpec& spec, const Vector& z) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    lp += -0.5 * std::pow(z(i) / spec.gamma(i), 2) - std::log(spec.gamma(i)) - 0.5 * std::log(2.0 * ralab::kPi);
  const Eigen::PartialPivLU<Matrix> lu(forward_jacobian(spec, z));
  double logdet = 0.0;
  const Matrix& m = lu.matrixLU();
  for (Eigen::Index i = 0; i < m.rows(); ++i) logdet += std::log(std::abs(m(i, i)));
  return lp - logdet;
}

// Adaptive Simpson for smooth 1-D integrands.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 50) {
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, int d) {
        const double mid = 0.5 * (lo + hi);
        const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
        const double flm = f(lm), frm = f(rm);
        const double left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi);
        if (d <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, d - 1) + rec(mid, hi, fmid, frm, fhi, right, d - 1);
      };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4 * fm + fb), depth);
}

// Central finite-difference gradient.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

inline ralab::InvertibleGeneratorSpec random_invertible(ralab::Rng& rng, Eigen::Index d, std::size_t layers,
                                                        double bias_scale = 0.5) {
  ralab::InvertibleGeneratorSpec spec;
  spec.gamma = Vector::Ones(d);
  for (Eigen::Index i = 0; i < d; ++i) spec.gamma(i) = ralab::uniform(rng, 0.3, 1.0);
  for (std::size_t j = 0; j < layers; ++j)
    spec.layers.push_back({ralab::random_well_conditioned(rng, d, 0.5, 2.0), bias_scale * ralab::standard_normal(rng, d, 1)});
  return spec;
}

// Fixed nonlinear injective generator R^2 -> R^3 used by the Laplace checks.
inline ralab::InjectiveGeneratorSpec laplace_instance() {
  ralab::Rng rng(2024);
  ralab::InjectiveGeneratorSpec g;
  g.activation = ralab::Activation::smooth_leaky(0.5);
  g.layers.push_back({ralab::random_orthogonal(rng, 3).leftCols(2) * 1.2, 0.1 * ralab::standard_normal(rng, 3, 1)});
  g.layers.push_back({ralab::random_orthogonal(rng, 3), 0.1 * ralab::standard_normal(rng, 3, 1)});
  return g;
}

}  // namespace oracle
