#pragma once

#include <limits>
#include <span>

#include <Eigen/Dense>

#include "tailrisk/model.hpp"

namespace tailrisk {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct LikelihoodResult {
  double al_part = kNegInf;
  double meas_part = 0.0;
  double total = kNegInf;
  Eigen::MatrixXd sigma_hat;
  bool valid = false;
};

/// Asymmetric-Laplace quasi-log-likelihood
///   sum_t log((alpha-1)/ES_t) + (r_t - Q_t)(alpha - 1{r_t <= Q_t}) / (alpha ES_t).
/// Returns -inf if any ES_t >= 0.
double al_logscore_sum(std::span<const double> returns, std::span<const double> Q,
                       std::span<const double> ES, double alpha);

enum class SigmaDivisor {
  T,            // profile (maximum likelihood) solution
  TMinusKMinus1 // sample covariance inside the integrated likelihood
};

/// (1/divisor) * sum_t u_t u_t' for a K x T residual matrix.
Eigen::MatrixXd sigma_hat(const Eigen::MatrixXd& U, SigmaDivisor divisor);

/// log|S| through a Cholesky factorization; nullopt when S is not positive
/// definite or |S| <= 1e-300.
std::optional<double> stable_log_det(const Eigen::MatrixXd& S);

/// Quasi-likelihood with the measurement covariance integrated out under a
/// Jeffreys prior: AL part - 0.5 (T-K-1) log|Sigma_hat|.
LikelihoodResult integrated_loglik(const ModelSpec& spec, const ParamVector& theta,
                                   const FilterData& data, const FilterOptions& options = {});

/// Quasi-likelihood with Sigma replaced by its profile solution (divisor T).
double profile_loglik(const ModelSpec& spec, const ParamVector& theta, const FilterData& data,
                      const FilterOptions& options = {});

/// 0 inside region A, -inf outside.
double log_prior(const ModelSpec& spec, const ParamVector& theta);

/// Log posterior (integrated quasi-likelihood plus flat prior) bound to one
/// data window. Reentrant: evaluations share only immutable state.
class Posterior {
 public:
  Posterior(ModelSpec spec, std::span<const double> returns, const Eigen::MatrixXd& rm_vol,
            FilterOptions options = {});

  double operator()(const ParamVector& theta) const;
  LikelihoodResult evaluate(const ParamVector& theta) const;

  const ModelSpec& spec() const { return spec_; }
  const FilterData& data() const { return data_; }
  const FilterOptions& options() const { return options_; }

 private:
  ModelSpec spec_;
  FilterData data_;
  FilterOptions options_;
};

}  // namespace tailrisk
