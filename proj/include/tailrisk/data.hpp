#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tailrisk {

/// Dated daily returns and a T x K panel of realized measures for one index.
struct MarketSeries {
  std::string name;
  std::vector<std::string> dates;  // ISO-8601, strictly increasing
  std::vector<double> returns;     // percentage log returns (x100)
  Eigen::MatrixXd rm;              // T x K
  std::vector<std::string> rm_names;
  bool volatility_scale = false;   // rm holds square roots of the measures
  std::size_t dropped_rows = 0;

  std::size_t size() const { return returns.size(); }
  int num_measures() const { return static_cast<int>(rm.cols()); }

  /// Throws InputError when any invariant is broken.
  void validate() const;
  /// Rows [begin, end) as a new series.
  MarketSeries slice(std::size_t begin, std::size_t end) const;
};

struct CsvOptions {
  std::string date_column = "date";
  std::optional<std::string> price_column;
  std::optional<std::string> return_column;
  std::vector<std::string> rm_columns;
};

MarketSeries load_market_csv(const std::string& path, const CsvOptions& options);
/// Writes a file that load_market_csv reads back bit-exactly (return column "return").
void write_market_csv(const std::string& path, const MarketSeries& series,
                      const std::string& header_comment = {});

/// Square root of every realized-measure entry; rejects a second application.
MarketSeries to_volatility_scale(MarketSeries series);

std::vector<double> demean(std::span<const double> returns, double window_mean);

struct WindowPlan {
  std::size_t in_sample = 0;
  std::size_t out_sample = 0;
  std::size_t refit_every = 1;

  void validate(std::size_t series_length) const;
};

struct Window {
  std::size_t begin = 0;   // first in-sample index
  std::size_t end = 0;     // one past the last in-sample index
  std::size_t target = 0;  // forecast target index (== end)
  bool refit = false;
};

std::vector<Window> rolling_windows(std::size_t series_length, const WindowPlan& plan);

/// True for a valid calendar date written as YYYY-MM-DD.
bool is_iso_date(const std::string& text);

}  // namespace tailrisk
