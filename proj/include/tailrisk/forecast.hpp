#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailrisk/data.hpp"
#include "tailrisk/mcmc.hpp"
#include "tailrisk/model.hpp"

namespace tailrisk {

struct RiskForecast {
  double q = 0.0;
  double es = 0.0;
};

/// Filters the window and advances the recursions one day past its end.
/// Throws NumericalError when the filtered path is not finite.
RiskForecast one_step_forecast(const ModelSpec& spec, const ParamVector& theta,
                               std::span<const double> window_returns,
                               const Eigen::MatrixXd& window_rm_vol,
                               const FilterOptions& options = {});

struct ForecastSeries {
  std::string label;
  double alpha = 0.0;
  std::vector<std::string> dates;
  std::vector<double> q_hat;
  std::vector<double> es_hat;
  std::vector<double> realized;  // target return minus the window mean
  std::vector<bool> refitted;

  std::size_t size() const { return q_hat.size(); }
  /// Throws InputError unless lengths agree and es <= q < 0 everywhere.
  void validate() const;
};

/// Rolling-window forecasts. Refit windows are estimated in parallel with
/// MCMC seed config.seed + window index; other windows reuse the latest
/// refit's posterior mean on their own (demeaned) window.
ForecastSeries rolling_forecast(const MarketSeries& series, const ModelSpec& spec,
                                const WindowPlan& plan, const McmcConfig& config,
                                int jobs = 1);

/// Columns date, q_hat, es_hat, realized, refitted; label and alpha go into
/// "# model:" and "# alpha:" comment lines.
void write_forecast_csv(const std::string& path, const ForecastSeries& f,
                        const std::string& header_comment = {});
ForecastSeries read_forecast_csv(const std::string& path);

}  // namespace tailrisk
