#include "tailrisk/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "csv_util.hpp"
#include "tailrisk/error.hpp"
#include "tailrisk/stats.hpp"

namespace tailrisk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool uses_measurement_equation(Family f) {
  return f == Family::REsCaviarM || f == Family::LogREsCaviar || f == Family::REsCaviar;
}

void resize_path(RiskPath& path, std::size_t n, int k) {
  path.Q.assign(n, kNaN);
  path.omega.assign(n, kNaN);
  path.ES.assign(n, kNaN);
  path.eps.assign(n, kNaN);
  path.e2hat.assign(n, 0.0);
  path.U = Eigen::MatrixXd::Constant(k, static_cast<Eigen::Index>(n), kNaN);
}

// Running estimate of E(eps^2) for the centered leverage term.
class LeverageCenter {
 public:
  LeverageCenter(bool centered, std::optional<double> fixed) : centered_(centered), fixed_(fixed) {}

  double at_step(std::size_t t) const {
    if (!centered_) {
      return 0.0;
    }
    if (fixed_) {
      return *fixed_;
    }
    return t == 0 ? 0.0 : sum_ / static_cast<double>(t);
  }
  void record(double eps) { sum_ += eps * eps; }

 private:
  bool centered_;
  std::optional<double> fixed_;
  double sum_ = 0.0;
};

void check_inputs(const ModelSpec& spec, const ParamVector& theta, const FilterData& data) {
  spec.validate();
  if (theta.size() != param_count(spec)) {
    throw InputError("parameter vector has " + std::to_string(theta.size()) + " entries, " +
                     spec.label() + " needs " + std::to_string(param_count(spec)));
  }
  if (data.num_measures() < spec.K) {
    throw InputError("model needs " + std::to_string(spec.K) + " realized measures, data has " +
                     std::to_string(data.num_measures()));
  }
  if (!check_region_A(spec, theta)) {
    throw InputError("parameter vector outside region A");
  }
}

bool log_quantile_ok(double lq) { return std::isfinite(lq) && std::abs(lq) <= kLogQuantileLimit; }

bool level_quantile_ok(double q) {
  return std::isfinite(q) && q < 0.0 && std::log(-q) <= kLogQuantileLimit &&
         std::log(-q) >= -kLogQuantileLimit;
}

RiskPath filter_m(const ModelSpec& spec, const ParamVector& th, const FilterData& data,
                  const FilterOptions& options, const InitState& init) {
  const std::size_t n = data.size();
  const int K = spec.K;
  const MLayout L{K};
  RiskPath path;
  resize_path(path, n, K);

  const double omega = th[L.omega];
  const double beta = th[L.beta];
  const double tau1 = th[L.tau1];
  const double tau2 = th[L.tau2];
  const double nu0 = th[L.nu0()];
  const double nu1 = th[L.nu1()];

  LeverageCenter center(spec.centered_leverage, options.fixed_e2);
  const auto r = data.returns();
  const Eigen::MatrixXd& logx = data.log_rm();

  double lq_prev = std::log(-init.Q0);
  double w_prev = init.omega0;
  double eps_prev = init.eps0;
  double lev_prev = eps_prev * eps_prev - center.at_step(0);
  Eigen::VectorXd u_prev = init.u0.size() == K ? init.u0 : Eigen::VectorXd::Zero(K);
  Eigen::VectorXd u(K);

  for (std::size_t t = 0; t < n; ++t) {
    double lq = omega + beta * lq_prev + tau1 * eps_prev + tau2 * lev_prev;
    double w = nu0 + nu1 * w_prev;
    for (int j = 0; j < K; ++j) {
      lq += th[L.gamma(j)] * u_prev[j];
      w += th[L.psi(j)] * std::abs(u_prev[j]);
    }
    if (!log_quantile_ok(lq)) {
      path.finite = false;
      return path;
    }
    const double q = -std::exp(lq);
    const double eps = r[t] / q;
    const double e2 = center.at_step(t);
    const double lev = eps * eps - e2;
    const auto col = static_cast<Eigen::Index>(t);
    for (int j = 0; j < K; ++j) {
      u[j] = logx(j, col) - th[L.xi(j)] - th[L.phi(j)] * lq - th[L.delta1(j)] * eps -
             th[L.delta2(j)] * lev;
    }
    if (!std::isfinite(w) || !u.allFinite()) {
      path.finite = false;
      return path;
    }
    path.Q[t] = q;
    path.omega[t] = w;
    path.ES[t] = q - w;
    path.eps[t] = eps;
    path.e2hat[t] = e2;
    path.U.col(col) = u;

    center.record(eps);
    lq_prev = lq;
    w_prev = w;
    eps_prev = eps;
    lev_prev = lev;
    u_prev = u;
  }

  double lq_next = omega + beta * lq_prev + tau1 * eps_prev + tau2 * lev_prev;
  double w_next = nu0 + nu1 * w_prev;
  for (int j = 0; j < K; ++j) {
    lq_next += th[L.gamma(j)] * u_prev[j];
    w_next += th[L.psi(j)] * std::abs(u_prev[j]);
  }
  if (!log_quantile_ok(lq_next) || !std::isfinite(w_next)) {
    path.finite = false;
    return path;
  }
  path.q_next = -std::exp(lq_next);
  path.omega_next = w_next;
  return path;
}

// Families with a single exogenous driver (x or |r|) in the quantile and gap
// recursions. The lag entering day 1 is the in-sample mean of that driver.
RiskPath filter_single(const ModelSpec& spec, const ParamVector& th, const FilterData& data,
                       const FilterOptions& options, const InitState& init) {
  using namespace single;
  const std::size_t n = data.size();
  const Family fam = spec.family;
  const bool log_form = fam == Family::LogREsCaviar;
  const bool has_meas = uses_measurement_equation(fam);
  const int k_meas = has_meas ? 1 : 0;
  RiskPath path;
  resize_path(path, n, k_meas);

  const auto r = data.returns();
  LeverageCenter center(spec.centered_leverage, options.fixed_e2);

  // Exogenous driver of day t (enters day t+1).
  const auto driver = [&](std::size_t t) -> double {
    if (fam == Family::EsCaviarAdd) {
      return std::abs(r[t]);
    }
    return data.rm()(0, static_cast<Eigen::Index>(t));
  };
  const double driver0 =
      fam == Family::EsCaviarAdd ? data.mean_abs_return() : data.mean_rm(0);

  const double g2 = fam == Family::EsCaviarAdd ? 0.0 : th[single::g2];
  double q_prev = init.Q0;
  double w_prev = init.omega0;
  double d_prev = driver0;

  const auto step = [&](double qp, double wp, double dp, double& q, double& w) {
    if (log_form) {
      const double lq = th[b0] + th[b1] * std::log(dp) + th[b2] * std::log(-qp);
      q = log_quantile_ok(lq) ? -std::exp(lq) : kNaN;
    } else {
      q = th[b0] + th[b1] * dp + th[b2] * qp;
    }
    if (fam == Family::EsCaviarAdd) {
      w = th[g0] + th[g1] * wp;
    } else {
      w = th[g0] + th[g1] * dp + g2 * wp;
    }
  };

  for (std::size_t t = 0; t < n; ++t) {
    double q = 0.0;
    double w = 0.0;
    step(q_prev, w_prev, d_prev, q, w);
    if (!level_quantile_ok(q) || !std::isfinite(w)) {
      path.finite = false;
      return path;
    }
    const double eps = r[t] / q;
    const double e2 = center.at_step(t);
    const double lev = eps * eps - e2;
    const double es = q - w;
    const auto col = static_cast<Eigen::Index>(t);
    if (has_meas) {
      double u = 0.0;
      if (log_form) {
        u = data.log_rm()(0, col) - th[xi] - th[phi] * std::log(-q) - th[tau1] * eps -
            th[tau2] * lev;
      } else {
        u = data.rm()(0, col) - th[xi] - th[phi] * std::abs(es) - th[tau1] * eps -
            th[tau2] * lev;
      }
      if (!std::isfinite(u)) {
        path.finite = false;
        return path;
      }
      path.U(0, col) = u;
    }
    path.Q[t] = q;
    path.omega[t] = w;
    path.ES[t] = es;
    path.eps[t] = eps;
    path.e2hat[t] = e2;

    center.record(eps);
    q_prev = q;
    w_prev = w;
    d_prev = driver(t);
  }

  double q_next = 0.0;
  double w_next = 0.0;
  step(q_prev, w_prev, d_prev, q_next, w_next);
  if (!level_quantile_ok(q_next) || !std::isfinite(w_next)) {
    path.finite = false;
    return path;
  }
  path.q_next = q_next;
  path.omega_next = w_next;
  return path;
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::REsCaviarM:
      return "REsCaviarM";
    case Family::LogREsCaviar:
      return "LogREsCaviar";
    case Family::REsCaviar:
      return "REsCaviar";
    case Family::EsXCaviarX:
      return "EsXCaviarX";
    case Family::EsCaviarAdd:
      return "EsCaviarAdd";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (Family f : {Family::REsCaviarM, Family::LogREsCaviar, Family::REsCaviar,
                   Family::EsXCaviarX, Family::EsCaviarAdd}) {
    if (family_name(f) == name) {
      return f;
    }
  }
  throw InputError("unknown model family '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw InputError("alpha must lie in (0, 0.5)");
  }
  switch (family) {
    case Family::REsCaviarM:
      if (K < 1 || K > 3) {
        throw InputError("REsCaviarM supports 1 to 3 realized measures");
      }
      break;
    case Family::LogREsCaviar:
    case Family::REsCaviar:
    case Family::EsXCaviarX:
      if (K != 1) {
        throw InputError(std::string(family_name(family)) + " uses exactly one realized measure");
      }
      break;
    case Family::EsCaviarAdd:
      if (K != 0) {
        throw InputError("EsCaviarAdd uses no realized measure");
      }
      break;
  }
}

std::string ModelSpec::label() const {
  std::string out(family_name(family));
  if (family == Family::REsCaviarM) {
    out += "-K" + std::to_string(K);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "@%g", alpha);
  return out + buf;
}

int param_count(const ModelSpec& spec) {
  switch (spec.family) {
    case Family::REsCaviarM:
      return MLayout{spec.K}.size();
    case Family::LogREsCaviar:
    case Family::REsCaviar:
      return 10;
    case Family::EsXCaviarX:
      return 6;
    case Family::EsCaviarAdd:
      return 5;
  }
  return 0;
}

std::vector<std::string> param_names(const ModelSpec& spec) {
  if (spec.family == Family::REsCaviarM) {
    const int K = spec.K;
    std::vector<std::string> names{"omega", "beta", "tau1", "tau2"};
    const auto per_measure = [&](const std::string& stem, const std::string& suffix = "") {
      for (int j = 1; j <= K; ++j) {
        names.push_back(stem + std::to_string(j) + suffix);
      }
    };
    per_measure("gamma");
    per_measure("xi");
    per_measure("phi");
    per_measure("delta", "1");
    per_measure("delta", "2");
    names.emplace_back("nu0");
    names.emplace_back("nu1");
    per_measure("psi");
    return names;
  }
  std::vector<std::string> names{"beta0", "beta1", "beta2", "gamma0", "gamma1", "gamma2",
                                 "xi",    "phi",   "tau1",  "tau2"};
  names.resize(static_cast<std::size_t>(param_count(spec)));
  return names;
}

int quantile_ar_index(const ModelSpec& spec) {
  return spec.family == Family::REsCaviarM ? MLayout::beta : single::b2;
}

std::vector<int> nonnegative_indices(const ModelSpec& spec) {
  if (spec.family == Family::REsCaviarM) {
    const MLayout L{spec.K};
    std::vector<int> idx{L.nu0(), L.nu1()};
    for (int j = 0; j < spec.K; ++j) {
      idx.push_back(L.psi(j));
    }
    return idx;
  }
  if (spec.family == Family::EsCaviarAdd) {
    return {single::g0, single::g1};
  }
  return {single::g0, single::g1, single::g2};
}

bool check_region_A(const ModelSpec& spec, const ParamVector& theta) {
  if (theta.size() != param_count(spec)) {
    return false;
  }
  const int ar = quantile_ar_index(spec);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double v = theta[i];
    const double bound = i == ar ? 1.0 : kRegionBound;
    if (!std::isfinite(v) || !(v > -bound && v < bound)) {
      return false;
    }
  }
  for (int i : nonnegative_indices(spec)) {
    if (theta[i] < 0.0) {
      return false;
    }
  }
  return true;
}

double stationarity_diagnostic(const ModelSpec& spec, const ParamVector& theta) {
  if (spec.family != Family::REsCaviarM) {
    throw InputError("stationarity diagnostic is defined for REsCaviarM only");
  }
  if (theta.size() != param_count(spec)) {
    throw InputError("parameter vector size does not match the model");
  }
  const MLayout L{spec.K};
  double value = theta[L.beta];
  for (int j = 0; j < spec.K; ++j) {
    value -= theta[L.gamma(j)] * theta[L.phi(j)];
  }
  return value;
}

InitState init_state(std::span<const double> returns, double alpha) {
  if (returns.size() < 50) {
    throw InputError("initialization needs at least 50 in-sample returns");
  }
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw InputError("alpha must lie in (0, 0.5)");
  }
  std::vector<double> sorted(returns.begin(), returns.end());
  std::sort(sorted.begin(), sorted.end());
  // Inverse empirical CDF: smallest order statistic with F_n(x) >= alpha.
  const double np = static_cast<double>(sorted.size()) * alpha;
  auto rank = static_cast<std::size_t>(std::ceil(np - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  const double q = sorted[rank - 1];
  if (!(q < 0.0)) {
    throw NumericalError(
        "empirical alpha-quantile of the in-sample returns is not negative; demean the returns "
        "or reject the sample");
  }
  double tail_sum = 0.0;
  std::size_t tail_n = 0;
  for (double r : sorted) {
    if (r > q) {
      break;
    }
    tail_sum += r;
    ++tail_n;
  }
  InitState init;
  init.Q0 = q;
  init.omega0 = std::max(0.0, q - tail_sum / static_cast<double>(tail_n));
  return init;
}

FilterData::FilterData(std::span<const double> returns, const Eigen::MatrixXd& rm_vol)
    : returns_(returns.begin(), returns.end()), rm_(rm_vol.transpose()) {
  if (static_cast<std::size_t>(rm_vol.rows()) != returns_.size()) {
    throw InputError("returns and realized measures differ in length");
  }
  log_rm_ = rm_.array().log().matrix();
  mean_rm_.resize(static_cast<std::size_t>(rm_.rows()));
  for (Eigen::Index j = 0; j < rm_.rows(); ++j) {
    mean_rm_[static_cast<std::size_t>(j)] = rm_.cols() > 0 ? rm_.row(j).mean() : 0.0;
  }
  double abs_sum = 0.0;
  for (double r : returns_) {
    abs_sum += std::abs(r);
  }
  mean_abs_return_ = returns_.empty() ? 0.0 : abs_sum / static_cast<double>(returns_.size());
}

RiskPath filter_path(const ModelSpec& spec, const ParamVector& theta, const FilterData& data,
                     const FilterOptions& options) {
  check_inputs(spec, theta, data);
  const InitState init =
      options.init ? *options.init : init_state(data.returns(), spec.alpha);
  if (!(init.Q0 < 0.0) || !(init.omega0 >= 0.0)) {
    throw InputError("initial state needs Q0 < 0 and omega0 >= 0");
  }
  if (spec.family == Family::REsCaviarM) {
    return filter_m(spec, theta, data, options, init);
  }
  return filter_single(spec, theta, data, options, init);
}

RiskPath filter_path(const ModelSpec& spec, const ParamVector& theta,
                     std::span<const double> returns, const Eigen::MatrixXd& rm_vol,
                     const FilterOptions& options) {
  return filter_path(spec, theta, FilterData(returns, rm_vol), options);
}

void write_risk_path_csv(const std::string& path, const std::vector<std::string>& dates,
                         const RiskPath& risk_path, const std::string& header_comment) {
  if (dates.size() != risk_path.Q.size()) {
    throw InputError("dates and risk path differ in length");
  }
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write '" + path + "'");
  }
  if (!header_comment.empty()) {
    out << header_comment << '\n';
  }
  out << "date,Q,omega,ES,eps";
  for (Eigen::Index j = 0; j < risk_path.U.rows(); ++j) {
    out << ",u_" << (j + 1);
  }
  out << '\n';
  const auto num = [](double v) { return csv::format_double(v); };
  for (std::size_t t = 0; t < dates.size(); ++t) {
    out << dates[t] << ',' << num(risk_path.Q[t]) << ',' << num(risk_path.omega[t]) << ','
        << num(risk_path.ES[t]) << ',' << num(risk_path.eps[t]);
    for (Eigen::Index j = 0; j < risk_path.U.rows(); ++j) {
      out << ',' << num(risk_path.U(j, static_cast<Eigen::Index>(t)));
    }
    out << '\n';
  }
}

}  // namespace tailrisk
