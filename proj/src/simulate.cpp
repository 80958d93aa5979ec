#include "tailrisk/simulate.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "csv_util.hpp"
#include "tailrisk/error.hpp"
#include "tailrisk/forecast.hpp"
#include "tailrisk/likelihood.hpp"
#include "tailrisk/parallel.hpp"
#include "tailrisk/rng.hpp"
#include "tailrisk/stats.hpp"

namespace tailrisk {

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) {
    out[i++] = x;
  }
  return out;
}

std::vector<std::string> business_days(std::size_t n) {
  using namespace std::chrono;
  std::vector<std::string> out;
  out.reserve(n);
  sys_days day = year{2000} / January / 3;
  char buf[16];
  while (out.size() < n) {
    const weekday wd{day};
    if (wd != Saturday && wd != Sunday) {
      const year_month_day ymd{day};
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
      out.emplace_back(buf);
    }
    day += days{1};
  }
  return out;
}

Eigen::VectorXd json_vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw InputError(std::string("DGP JSON: '") + key + "' must be an array");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j[key].size()));
  for (std::size_t i = 0; i < j[key].size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = j[key][i].get<double>();
  }
  return v;
}

double json_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw InputError(std::string("DGP JSON: '") + key + "' must be a number");
  }
  return j[key].get<double>();
}

}  // namespace

void RegarchParams::validate() const {
  const int k = K();
  if (k < 1) {
    throw InputError("DGP needs at least one measure");
  }
  if (xi.size() != k || phi.size() != k || delta1.size() != k || delta2.size() != k ||
      sigma_u.rows() != k || sigma_u.cols() != k) {
    throw InputError("DGP coefficient dimensions disagree");
  }
  if (!(std::abs(beta) < 1.0)) {
    throw InputError("DGP needs |beta| < 1");
  }
  if (!sigma_u.isApprox(sigma_u.transpose())) {
    throw InputError("sigma_u must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma_u);
  if (llt.info() != Eigen::Success) {
    throw InputError("sigma_u must be positive definite");
  }
}

RegarchParams RegarchParams::paper_preset(int K) {
  RegarchParams p;
  p.omega = 0.05;
  p.beta = 0.85;
  p.tau1 = -0.12;
  p.tau2 = 0.04;
  if (K == 1) {
    p.gamma = vec({0.2});
    p.xi = vec({0.1});
    p.phi = vec({0.9});
    p.delta1 = vec({0.02});
    p.delta2 = vec({0.02});
    p.sigma_u = Eigen::MatrixXd::Constant(1, 1, 0.09);
    return p;
  }
  if (K == 2) {
    p.gamma = vec({0.2, 0.3});
    p.xi = vec({0.1, 0.15});
    p.phi = vec({0.9, 0.85});
    p.delta1 = vec({0.02, 0.03});
    p.delta2 = vec({0.02, 0.03});
    p.sigma_u.resize(2, 2);
    p.sigma_u << 0.2, 0.1, 0.1, 0.3;
    return p;
  }
  throw InputError("paper DGP preset exists for K = 1 and K = 2; use a custom JSON for K = " +
                   std::to_string(K));
}

RegarchParams RegarchParams::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("DGP JSON: ") + e.what());
  }
  RegarchParams p;
  p.omega = json_number(j, "omega");
  p.beta = json_number(j, "beta");
  p.tau1 = json_number(j, "tau1");
  p.tau2 = json_number(j, "tau2");
  p.gamma = json_vector(j, "gamma");
  p.xi = json_vector(j, "xi");
  p.phi = json_vector(j, "phi");
  p.delta1 = json_vector(j, "delta1");
  p.delta2 = json_vector(j, "delta2");
  const auto k = static_cast<Eigen::Index>(p.gamma.size());
  if (!j.contains("sigma_u") || !j["sigma_u"].is_array() ||
      j["sigma_u"].size() != static_cast<std::size_t>(k)) {
    throw InputError("DGP JSON: 'sigma_u' must be a K x K nested array");
  }
  p.sigma_u.resize(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto& row = j["sigma_u"][static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(k)) {
      throw InputError("DGP JSON: 'sigma_u' must be a K x K nested array");
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      p.sigma_u(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  p.validate();
  return p;
}

std::string RegarchParams::to_json() const {
  const auto arr = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  nlohmann::json j;
  j["omega"] = omega;
  j["beta"] = beta;
  j["tau1"] = tau1;
  j["tau2"] = tau2;
  j["gamma"] = arr(gamma);
  j["xi"] = arr(xi);
  j["phi"] = arr(phi);
  j["delta1"] = arr(delta1);
  j["delta2"] = arr(delta2);
  nlohmann::json s = nlohmann::json::array();
  for (Eigen::Index r = 0; r < sigma_u.rows(); ++r) {
    s.push_back(arr(sigma_u.row(r).transpose()));
  }
  j["sigma_u"] = s;
  return j.dump();
}

AlphaConstants alpha_constants(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw InputError("alpha must lie in (0, 0.5)");
  }
  AlphaConstants c;
  c.a = stats::norm_ppf(alpha);
  c.b = -stats::norm_pdf(c.a) / alpha;
  c.g = c.a - c.b;
  return c;
}

SimulatedData regarch_simulate(const RegarchParams& p, std::size_t n, std::uint64_t seed) {
  p.validate();
  if (n < 1) {
    throw InputError("simulation length must be positive");
  }
  const int K = p.K();
  const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(p.sigma_u).matrixL();
  CounterRng rng(seed);

  SimulatedData out;
  out.series.name = "regarch";
  out.series.dates = business_days(n);
  out.series.returns.resize(n);
  out.series.rm.resize(static_cast<Eigen::Index>(n), K);
  out.series.volatility_scale = true;
  for (int j = 1; j <= K; ++j) {
    out.series.rm_names.push_back("x" + std::to_string(j));
  }
  out.sigma.resize(n);

  double log_s = p.omega / (1.0 - p.beta);
  double z_prev = 0.0;
  Eigen::VectorXd u_prev = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd e(K);
  const std::size_t total = kSimulationBurnIn + n;
  for (std::size_t t = 0; t <= total; ++t) {
    if (t > 0) {
      log_s = p.omega + p.beta * log_s + p.tau1 * z_prev + p.tau2 * (z_prev * z_prev - 1.0) +
              p.gamma.dot(u_prev);
    }
    if (!(std::abs(log_s) <= kLogQuantileLimit)) {
      throw NumericalError("simulated log volatility exploded at day " + std::to_string(t));
    }
    if (t == total) {
      out.sigma_next = std::exp(log_s);
      break;
    }
    const double z = rng.normal();
    for (int j = 0; j < K; ++j) {
      e[j] = rng.normal();
    }
    const Eigen::VectorXd u = L * e;
    if (t + 1 == kSimulationBurnIn) {
      out.sigma_lag = std::exp(log_s);
      out.z_lag = z;
      out.u_lag = u;
    }
    if (t >= kSimulationBurnIn) {
      const std::size_t i = t - kSimulationBurnIn;
      const double s = std::exp(log_s);
      out.sigma[i] = s;
      out.series.returns[i] = s * z;
      for (int j = 0; j < K; ++j) {
        const double log_x = p.xi[j] + p.phi[j] * log_s + p.delta1[j] * z +
                             p.delta2[j] * (z * z - 1.0) + u[j];
        out.series.rm(static_cast<Eigen::Index>(i), j) = std::exp(log_x);
      }
    }
    z_prev = z;
    u_prev = u;
  }
  return out;
}

ParamVector map_true_params(const RegarchParams& p, double alpha, bool centered) {
  p.validate();
  const int K = p.K();
  const AlphaConstants c = alpha_constants(alpha);
  const MLayout L{K};
  const double log_a = std::log(-c.a);
  ParamVector th(L.size());
  th[MLayout::omega] = log_a * (1.0 - p.beta) + p.omega - (centered ? 0.0 : p.tau2);
  th[MLayout::beta] = p.beta;
  th[MLayout::tau1] = p.tau1 * c.a;
  th[MLayout::tau2] = p.tau2 * c.a * c.a;
  for (int j = 0; j < K; ++j) {
    th[L.gamma(j)] = p.gamma[j];
    th[L.xi(j)] = p.xi[j] - p.phi[j] * log_a - (centered ? 0.0 : p.delta2[j]);
    th[L.phi(j)] = p.phi[j];
    th[L.delta1(j)] = p.delta1[j] * c.a;
    th[L.delta2(j)] = p.delta2[j] * c.a * c.a;
    th[L.psi(j)] = p.gamma[j] * c.g;
  }
  th[L.nu0()] = p.omega * c.g;
  th[L.nu1()] = p.beta;
  return th;
}

InitState exact_init(const SimulatedData& sim, double alpha) {
  const AlphaConstants c = alpha_constants(alpha);
  InitState s;
  s.Q0 = c.a * sim.sigma_lag;
  s.omega0 = c.g * sim.sigma_lag;
  s.eps0 = sim.z_lag / c.a;
  s.u0 = sim.u_lag;
  return s;
}

RecoveryReport recovery_study(const RegarchParams& dgp, double alpha,
                              const std::vector<std::size_t>& n_list, int replications,
                              std::uint64_t seed, const McmcConfig& config, int jobs) {
  dgp.validate();
  if (replications < 10) {
    throw InputError("recovery study needs at least 10 replications");
  }
  if (n_list.empty()) {
    throw InputError("recovery study needs at least one sample size");
  }
  const ModelSpec spec{Family::REsCaviarM, dgp.K(), alpha, true};
  spec.validate();
  const AlphaConstants c = alpha_constants(alpha);
  const ParamVector truth = map_true_params(dgp, alpha, true);
  const auto names = param_names(spec);
  const MLayout L{spec.K};

  const auto R = static_cast<std::size_t>(replications);
  std::vector<Replication> reps(n_list.size() * R);
  parallel_for(reps.size(), jobs, [&](std::size_t idx) {
    Replication& r = reps[idx];
    r.n = n_list[idx / R];
    r.rep = static_cast<int>(idx % R);
    try {
      const SimulatedData sim = regarch_simulate(dgp, r.n, seed + static_cast<std::uint64_t>(r.rep));
      const Posterior posterior(spec, sim.series.returns, sim.series.rm);
      McmcConfig mc = config;
      mc.seed = seed + static_cast<std::uint64_t>(r.rep);
      const Chain chain = run(posterior, mc);
      r.estimate = posterior_mean(chain);
      r.acceptance = chain.final_acceptance;
      for (const auto& b : chain.structure.blocks) {
        r.targets.push_back(target_acceptance(static_cast<int>(b.size())));
      }
      r.epochs = chain.epochs_used();
      r.converged = chain.status == ChainStatus::Converged;
      const RiskForecast f = one_step_forecast(spec, r.estimate, sim.series.returns,
                                               sim.series.rm, posterior.options());
      r.q_hat = f.q;
      r.es_hat = f.es;
      r.q_true = c.a * sim.sigma_next;
      r.es_true = c.b * sim.sigma_next;
      r.ok = true;
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });

  RecoveryReport report;
  report.alpha = alpha;
  report.K = spec.K;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    std::vector<const Replication*> ok;
    for (std::size_t k = 0; k < R; ++k) {
      if (reps[ni * R + k].ok) {
        ok.push_back(&reps[ni * R + k]);
      }
    }
    if (ok.size() * 5 < R * 4) {
      throw NumericalError("recovery study at n = " + std::to_string(n_list[ni]) + ": only " +
                           std::to_string(ok.size()) + " of " + std::to_string(R) +
                           " replications succeeded");
    }
    const double m = static_cast<double>(ok.size());
    for (int p = 0; p < L.size(); ++p) {
      RecoveryRow row;
      row.n = n_list[ni];
      row.parameter = names[static_cast<std::size_t>(p)];
      row.true_value = truth[p];
      double sum = 0.0, sq = 0.0;
      for (const auto* r : ok) {
        sum += r->estimate[p];
        sq += (r->estimate[p] - truth[p]) * (r->estimate[p] - truth[p]);
      }
      row.mean = sum / m;
      row.rmse = std::sqrt(sq / m);
      row.gated = p < L.nu0();
      report.rows.push_back(row);
    }
    const auto forecast_row = [&](const char* name, auto hat, auto truth_of) {
      RecoveryRow row;
      row.n = n_list[ni];
      row.parameter = name;
      row.gated = false;
      double t_sum = 0.0, h_sum = 0.0, sq = 0.0;
      for (const auto* r : ok) {
        t_sum += truth_of(*r);
        h_sum += hat(*r);
        sq += (hat(*r) - truth_of(*r)) * (hat(*r) - truth_of(*r));
      }
      row.true_value = t_sum / m;
      row.mean = h_sum / m;
      row.rmse = std::sqrt(sq / m);
      report.rows.push_back(row);
    };
    forecast_row("Q_next", [](const Replication& r) { return r.q_hat; },
                 [](const Replication& r) { return r.q_true; });
    forecast_row("ES_next", [](const Replication& r) { return r.es_hat; },
                 [](const Replication& r) { return r.es_true; });
  }
  report.replications = std::move(reps);
  return report;
}

void write_recovery_csv(const std::string& path, const RecoveryReport& report,
                        const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path + " for writing");
  }
  if (!header_comment.empty()) {
    out << header_comment << '\n';
  }
  out << "n,parameter,true,mean,rmse\n";
  for (const auto& row : report.rows) {
    out << row.n << ',' << row.parameter << ',' << csv::format_double(row.true_value) << ','
        << csv::format_double(row.mean) << ',' << csv::format_double(row.rmse) << '\n';
  }
}

}  // namespace tailrisk
