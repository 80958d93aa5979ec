#pragma once

#include <span>
#include <vector>

namespace tailrisk::stats {

double norm_cdf(double x);
double norm_pdf(double x);
/// Standard normal quantile Φ⁻¹(p), p in (0, 1).
double norm_ppf(double p);

double mean(std::span<const double> x);
/// Sample variance with divisor n - 1 (0 for n < 2).
double variance(std::span<const double> x);

/// Linear-interpolation (type 7) quantile of unsorted data.
double quantile(std::span<const double> x, double p);
/// Type 7 quantile of data already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace tailrisk::stats
