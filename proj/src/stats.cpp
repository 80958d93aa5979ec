#include "tailrisk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "tailrisk/error.hpp"

namespace tailrisk::stats {

namespace {
const boost::math::normal_distribution<double> kStdNormal{};
}

double norm_cdf(double x) { return boost::math::cdf(kStdNormal, x); }

double norm_pdf(double x) { return boost::math::pdf(kStdNormal, x); }

double norm_ppf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InputError("norm_ppf: probability must lie in (0, 1)");
  }
  return boost::math::quantile(kStdNormal, p);
}

double mean(std::span<const double> x) {
  if (x.empty()) {
    return 0.0;
  }
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) {
    return 0.0;
  }
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) {
    ss += (v - m) * (v - m);
  }
  return ss / static_cast<double>(x.size() - 1);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) {
    throw InputError("quantile of an empty sample");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InputError("quantile probability must lie in [0, 1]");
  }
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> x, double p) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, p);
}

}  // namespace tailrisk::stats
