#include "tailrisk/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "csv_util.hpp"
#include "tailrisk/error.hpp"
#include "tailrisk/likelihood.hpp"
#include "tailrisk/parallel.hpp"
#include "tailrisk/stats.hpp"

namespace tailrisk {

RiskForecast one_step_forecast(const ModelSpec& spec, const ParamVector& theta,
                               std::span<const double> window_returns,
                               const Eigen::MatrixXd& window_rm_vol,
                               const FilterOptions& options) {
  const RiskPath path = filter_path(spec, theta, window_returns, window_rm_vol, options);
  if (!path.finite || !std::isfinite(path.q_next) || !std::isfinite(path.omega_next)) {
    throw NumericalError("filtered path is not finite");
  }
  return RiskForecast{path.q_next, path.q_next - path.omega_next};
}

void ForecastSeries::validate() const {
  const std::size_t m = q_hat.size();
  if (es_hat.size() != m || realized.size() != m || dates.size() != m || refitted.size() != m) {
    throw InputError("forecast series columns differ in length");
  }
  for (std::size_t t = 0; t < m; ++t) {
    if (!(es_hat[t] <= q_hat[t] && q_hat[t] < 0.0)) {
      throw InputError("forecast " + std::to_string(t + 1) + " violates es <= q < 0");
    }
  }
}

namespace {

struct WindowData {
  std::vector<double> returns;
  Eigen::MatrixXd rm;
  double mean = 0.0;
};

WindowData window_data(const MarketSeries& series, const Window& w) {
  const std::span<const double> raw(series.returns.data() + w.begin, w.end - w.begin);
  WindowData out;
  out.mean = stats::mean(raw);
  out.returns = demean(raw, out.mean);
  out.rm = series.rm.middleRows(static_cast<Eigen::Index>(w.begin),
                                static_cast<Eigen::Index>(w.end - w.begin));
  return out;
}

[[noreturn]] void rethrow_for_window(std::size_t index) {
  const std::string where = "window " + std::to_string(index) + ": ";
  try {
    throw;
  } catch (const NumericalError& e) {
    throw NumericalError(where + e.what());
  } catch (const InputError& e) {
    throw InputError(where + e.what());
  }
}

}  // namespace

ForecastSeries rolling_forecast(const MarketSeries& series, const ModelSpec& spec,
                                const WindowPlan& plan, const McmcConfig& config, int jobs) {
  spec.validate();
  series.validate();
  if (!series.volatility_scale && spec.K > 0) {
    throw InputError("realized measures must be on the volatility scale");
  }
  if (series.num_measures() < spec.K) {
    throw InputError("series has fewer realized measures than the model needs");
  }
  const auto windows = rolling_windows(series.size(), plan);

  std::vector<std::size_t> refits;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].refit) {
      refits.push_back(i);
    }
  }
  std::vector<ParamVector> estimates(refits.size());
  parallel_for(refits.size(), jobs, [&](std::size_t k) {
    const std::size_t i = refits[k];
    try {
      const WindowData wd = window_data(series, windows[i]);
      const Posterior posterior(spec, wd.returns, wd.rm.leftCols(spec.K));
      McmcConfig c = config;
      c.seed = config.seed + i;
      estimates[k] = posterior_mean(run(posterior, c));
    } catch (...) {
      rethrow_for_window(i);
    }
  });

  ForecastSeries out;
  out.label = spec.label();
  out.alpha = spec.alpha;
  std::size_t current = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Window& w = windows[i];
    if (w.refit) {
      current = static_cast<std::size_t>(
          std::lower_bound(refits.begin(), refits.end(), i) - refits.begin());
    }
    try {
      const WindowData wd = window_data(series, w);
      const RiskForecast f =
          one_step_forecast(spec, estimates[current], wd.returns, wd.rm.leftCols(spec.K));
      out.dates.push_back(series.dates[w.target]);
      out.q_hat.push_back(f.q);
      out.es_hat.push_back(f.es);
      out.realized.push_back(series.returns[w.target] - wd.mean);
      out.refitted.push_back(w.refit);
    } catch (...) {
      rethrow_for_window(i);
    }
  }
  return out;
}

void write_forecast_csv(const std::string& path, const ForecastSeries& f,
                        const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path + " for writing");
  }
  if (!header_comment.empty()) {
    out << header_comment << '\n';
  }
  out << "# model: " << f.label << '\n';
  out << "# alpha: " << csv::format_double(f.alpha) << '\n';
  out << "date,q_hat,es_hat,realized,refitted\n";
  for (std::size_t t = 0; t < f.size(); ++t) {
    out << f.dates[t] << ',' << csv::format_double(f.q_hat[t]) << ','
        << csv::format_double(f.es_hat[t]) << ',' << csv::format_double(f.realized[t]) << ','
        << (f.refitted[t] ? 1 : 0) << '\n';
  }
}

ForecastSeries read_forecast_csv(const std::string& path) {
  const csv::Table table = csv::read_table(path);
  ForecastSeries f;
  f.label = table.meta("model").value_or(path);
  if (const auto a = table.meta("alpha")) {
    f.alpha = csv::require_double(*a, path, 0);
  }
  const std::size_t c_date = table.column("date", path);
  const std::size_t c_q = table.column("q_hat", path);
  const std::size_t c_es = table.column("es_hat", path);
  const std::size_t c_r = table.column("realized", path);
  const auto it = std::find(table.header.begin(), table.header.end(), "refitted");
  const std::optional<std::size_t> c_refit =
      it == table.header.end() ? std::nullopt
                               : std::optional<std::size_t>(it - table.header.begin());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() < table.header.size()) {
      throw InputError(path + ": row " + std::to_string(r + 1) + " is short");
    }
    f.dates.push_back(row[c_date]);
    f.q_hat.push_back(csv::require_double(row[c_q], path, r));
    f.es_hat.push_back(csv::require_double(row[c_es], path, r));
    f.realized.push_back(csv::require_double(row[c_r], path, r));
    f.refitted.push_back(c_refit && row[*c_refit] == "1");
  }
  return f;
}

}  // namespace tailrisk
