#include "tailrisk/likelihood.hpp"

#include <cmath>
#include <numbers>

#include "tailrisk/error.hpp"

namespace tailrisk {

namespace {

constexpr double kMinDet = 1e-300;

bool has_measurement_likelihood(const ModelSpec& spec) {
  return spec.family == Family::REsCaviarM || spec.family == Family::LogREsCaviar ||
         spec.family == Family::REsCaviar;
}

}  // namespace

double al_logscore_sum(std::span<const double> returns, std::span<const double> Q,
                       std::span<const double> ES, double alpha) {
  if (returns.size() != Q.size() || returns.size() != ES.size()) {
    throw InputError("al_logscore_sum: inputs differ in length");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < returns.size(); ++t) {
    const double es = ES[t];
    if (!(es < 0.0)) {
      return kNegInf;
    }
    const double hit = returns[t] <= Q[t] ? 1.0 : 0.0;
    total += std::log((alpha - 1.0) / es) + (returns[t] - Q[t]) * (alpha - hit) / (alpha * es);
  }
  return total;
}

Eigen::MatrixXd sigma_hat(const Eigen::MatrixXd& U, SigmaDivisor divisor) {
  const auto K = U.rows();
  const auto T = U.cols();
  if (T <= K + 1) {
    throw InputError("sigma_hat needs more than K + 1 observations");
  }
  const double d = divisor == SigmaDivisor::T ? static_cast<double>(T)
                                              : static_cast<double>(T - K - 1);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(K, K);
  S.selfadjointView<Eigen::Lower>().rankUpdate(U);
  S = S.selfadjointView<Eigen::Lower>();
  return S / d;
}

std::optional<double> stable_log_det(const Eigen::MatrixXd& S) {
  if (S.size() == 0) {
    return 0.0;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    return std::nullopt;
  }
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  if (!std::isfinite(log_det) || log_det <= std::log(kMinDet)) {
    return std::nullopt;
  }
  return log_det;
}

LikelihoodResult integrated_loglik(const ModelSpec& spec, const ParamVector& theta,
                                   const FilterData& data, const FilterOptions& options) {
  LikelihoodResult result;
  if (!check_region_A(spec, theta)) {
    return result;
  }
  const RiskPath path = filter_path(spec, theta, data, options);
  if (!path.finite) {
    return result;
  }
  const double al = al_logscore_sum(data.returns(), path.Q, path.ES, spec.alpha);
  if (!std::isfinite(al)) {
    return result;
  }
  double meas = 0.0;
  if (has_measurement_likelihood(spec) && path.U.rows() > 0) {
    const auto K = path.U.rows();
    const auto T = path.U.cols();
    result.sigma_hat = sigma_hat(path.U, SigmaDivisor::TMinusKMinus1);
    const auto log_det = stable_log_det(result.sigma_hat);
    if (!log_det) {
      return result;
    }
    meas = -0.5 * static_cast<double>(T - K - 1) * *log_det;
  }
  result.al_part = al;
  result.meas_part = meas;
  result.total = al + meas;
  result.valid = true;
  return result;
}

double profile_loglik(const ModelSpec& spec, const ParamVector& theta, const FilterData& data,
                      const FilterOptions& options) {
  if (!check_region_A(spec, theta)) {
    return kNegInf;
  }
  const RiskPath path = filter_path(spec, theta, data, options);
  if (!path.finite) {
    return kNegInf;
  }
  const double al = al_logscore_sum(data.returns(), path.Q, path.ES, spec.alpha);
  if (!std::isfinite(al) || !has_measurement_likelihood(spec) || path.U.rows() == 0) {
    return al;
  }
  const auto K = static_cast<double>(path.U.rows());
  const auto T = static_cast<double>(path.U.cols());
  const Eigen::MatrixXd S = sigma_hat(path.U, SigmaDivisor::T);
  const auto log_det = stable_log_det(S);
  if (!log_det) {
    return kNegInf;
  }
  // The quadratic form sums to T*K at the profile solution.
  return al - 0.5 * T * (K * std::log(2.0 * std::numbers::pi) + *log_det) - 0.5 * T * K;
}

double log_prior(const ModelSpec& spec, const ParamVector& theta) {
  return check_region_A(spec, theta) ? 0.0 : kNegInf;
}

Posterior::Posterior(ModelSpec spec, std::span<const double> returns,
                     const Eigen::MatrixXd& rm_vol, FilterOptions options)
    : spec_(spec), data_(returns, rm_vol), options_(std::move(options)) {
  spec_.validate();
  if (!options_.init) {
    options_.init = init_state(data_.returns(), spec_.alpha);
  }
}

LikelihoodResult Posterior::evaluate(const ParamVector& theta) const {
  return integrated_loglik(spec_, theta, data_, options_);
}

double Posterior::operator()(const ParamVector& theta) const {
  if (log_prior(spec_, theta) == kNegInf) {
    return kNegInf;
  }
  return evaluate(theta).total;
}

}  // namespace tailrisk
