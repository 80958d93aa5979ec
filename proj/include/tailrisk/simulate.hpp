#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailrisk/data.hpp"
#include "tailrisk/mcmc.hpp"
#include "tailrisk/model.hpp"

namespace tailrisk {

/// Standard-deviation realized EGARCH with K measures:
///   log s_t   = omega + beta log s_{t-1} + tau1 z_{t-1} + tau2 (z_{t-1}^2 - 1) + gamma' u_{t-1}
///   log x_jt  = xi_j + phi_j log s_t + delta1_j z_t + delta2_j (z_t^2 - 1) + u_jt
///   r_t = s_t z_t,  z_t ~ N(0, 1),  u_t ~ N(0, sigma_u).
struct RegarchParams {
  double omega = 0.0;
  double beta = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
  Eigen::VectorXd gamma, xi, phi, delta1, delta2;
  Eigen::MatrixXd sigma_u;

  int K() const { return static_cast<int>(gamma.size()); }
  void validate() const;

  /// Reference coefficient sets (K = 1 or 2).
  static RegarchParams paper_preset(int K);
  /// JSON object with keys omega, beta, tau1, tau2 (numbers), gamma, xi, phi,
  /// delta1, delta2 (arrays of K numbers) and sigma_u (K x K nested array).
  static RegarchParams from_json(const std::string& text);
  std::string to_json() const;
};

struct AlphaConstants {
  double a = 0.0;  // Phi^-1(alpha)
  double b = 0.0;  // -phi(a) / alpha
  double g = 0.0;  // a - b
};

AlphaConstants alpha_constants(double alpha);

struct SimulatedData {
  MarketSeries series;        // returns and measures on the volatility scale
  std::vector<double> sigma;  // latent s_t for each retained day
  double sigma_next = 0.0;    // s_{n+1}
  /// State one day before the first retained observation.
  double sigma_lag = 0.0;
  double z_lag = 0.0;
  Eigen::VectorXd u_lag;
};

inline constexpr std::size_t kSimulationBurnIn = 200;

/// Starts log s at omega / (1 - beta) and discards kSimulationBurnIn days.
/// Throws NumericalError if |log s| exceeds 50.
SimulatedData regarch_simulate(const RegarchParams& params, std::size_t n, std::uint64_t seed);

/// REsCaviarM parameters implied by the DGP at level alpha. The gap block
/// (nu0, nu1, psi) is only an approximate target.
ParamVector map_true_params(const RegarchParams& params, double alpha, bool centered);

/// Filter start matching the simulation's lagged state exactly.
InitState exact_init(const SimulatedData& sim, double alpha);

struct RecoveryRow {
  std::size_t n = 0;
  std::string parameter;
  double true_value = 0.0;
  double mean = 0.0;
  double rmse = 0.0;
  bool gated = true;  // false for the gap block and forecast rows
};

struct Replication {
  std::size_t n = 0;
  int rep = 0;
  bool ok = false;
  std::string error;
  ParamVector estimate;
  std::vector<double> acceptance;
  std::vector<double> targets;
  int epochs = 0;
  bool converged = false;
  double q_hat = 0.0, es_hat = 0.0, q_true = 0.0, es_true = 0.0;
};

struct RecoveryReport {
  double alpha = 0.0;
  int K = 1;
  std::vector<RecoveryRow> rows;
  std::vector<Replication> replications;
};

/// Simulates `replications` datasets per n (seed + replication index), fits
/// REsCaviarM with centered leverage by MCMC and summarizes posterior means
/// against map_true_params. Failed replications are recorded; fewer than 80%
/// successes for any n raises NumericalError.
RecoveryReport recovery_study(const RegarchParams& dgp, double alpha,
                              const std::vector<std::size_t>& n_list, int replications,
                              std::uint64_t seed, const McmcConfig& config, int jobs = 1);

/// Columns n, parameter, true, mean, rmse.
void write_recovery_csv(const std::string& path, const RecoveryReport& report,
                        const std::string& header_comment = {});

}  // namespace tailrisk
