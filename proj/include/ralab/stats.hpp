#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ralab/core.hpp"

namespace ralab {

double mean(const std::vector<double>& x);
double median(std::vector<double> x);
// Sample standard deviation (n - 1 denominator).
double stddev(const std::vector<double>& x);
double pearson(const std::vector<double>& x, const std::vector<double>& y);
// Pearson on average ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov test against a continuous cdf.
template <class Cdf>
KsResult ks_test(std::vector<double> x, Cdf cdf);
// Asymptotic Kolmogorov distribution tail P(K > t).
double kolmogorov_tail(double t);

template <class Cdf>
KsResult ks_test(std::vector<double> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    dmax = std::max({dmax, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {dmax, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * dmax)};
}

}  // namespace ralab
