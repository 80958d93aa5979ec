#include "tailrisk/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "csv_util.hpp"
#include "tailrisk/error.hpp"

namespace tailrisk {

using namespace csv;

bool is_iso_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    return false;
  }
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  const char* p = text.data();
  if (std::from_chars(p, p + 4, y).ptr != p + 4 || std::from_chars(p + 5, p + 7, m).ptr != p + 7 ||
      std::from_chars(p + 8, p + 10, d).ptr != p + 10) {
    return false;
  }
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m},
                                     std::chrono::day{d}}
      .ok();
}

void MarketSeries::validate() const {
  const std::size_t n = returns.size();
  if (dates.size() != n || static_cast<std::size_t>(rm.rows()) != n) {
    throw InputError("series '" + name + "': dates, returns and realized measures differ in length");
  }
  if (static_cast<std::size_t>(rm.cols()) != rm_names.size()) {
    throw InputError("series '" + name + "': realized-measure names do not match panel width");
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (!is_iso_date(dates[t])) {
      throw InputError("series '" + name + "': malformed date '" + dates[t] + "'");
    }
    // ISO dates order lexicographically.
    if (t > 0 && !(dates[t - 1] < dates[t])) {
      throw InputError("series '" + name + "': dates not strictly increasing at " + dates[t]);
    }
    if (!std::isfinite(returns[t])) {
      throw InputError("series '" + name + "': non-finite return at " + dates[t]);
    }
    for (Eigen::Index j = 0; j < rm.cols(); ++j) {
      const double x = rm(static_cast<Eigen::Index>(t), j);
      if (!std::isfinite(x) || x < 0.0) {
        throw InputError("series '" + name + "': invalid realized measure at " + dates[t]);
      }
    }
  }
}

MarketSeries MarketSeries::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) {
    throw InputError("slice out of range");
  }
  MarketSeries out;
  out.name = name;
  out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(begin),
                   dates.begin() + static_cast<std::ptrdiff_t>(end));
  out.returns.assign(returns.begin() + static_cast<std::ptrdiff_t>(begin),
                     returns.begin() + static_cast<std::ptrdiff_t>(end));
  out.rm = rm.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
  out.rm_names = rm_names;
  out.volatility_scale = volatility_scale;
  return out;
}

MarketSeries load_market_csv(const std::string& path, const CsvOptions& options) {
  if (options.price_column.has_value() == options.return_column.has_value()) {
    throw InputError("exactly one of a price column or a return column must be named");
  }
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open '" + path + "'");
  }

  MarketSeries series;
  series.name = std::filesystem::path(path).stem().string();
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      const std::string meta = trim(std::string_view(line).substr(1));
      if (meta.rfind("name:", 0) == 0) {
        series.name = trim(std::string_view(meta).substr(5));
      } else if (meta == "scale: volatility") {
        series.volatility_scale = true;
      }
      continue;
    }
    if (trim(line).empty()) {
      continue;
    }
    header = split_csv(line);
    break;
  }
  if (header.empty()) {
    throw InputError(path + ": no header row");
  }

  const std::size_t date_col = column_index(header, options.date_column, path);
  const bool from_prices = options.price_column.has_value();
  const std::size_t value_col =
      column_index(header, from_prices ? *options.price_column : *options.return_column, path);
  std::vector<std::size_t> rm_cols;
  for (const auto& name : options.rm_columns) {
    rm_cols.push_back(column_index(header, name, path));
  }

  std::vector<std::string> dates;
  std::vector<double> values;
  std::vector<std::vector<double>> rms;
  std::size_t dropped = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line.rfind("#", 0) == 0) {
      continue;
    }
    const auto fields = split_csv(line);
    const auto field = [&](std::size_t i) -> std::string {
      return i < fields.size() ? fields[i] : std::string{};
    };
    const std::string date = field(date_col);
    if (is_missing(date)) {
      ++dropped;
      continue;
    }
    if (!is_iso_date(date)) {
      throw InputError(path + ":" + std::to_string(line_no) + ": malformed date '" + date + "'");
    }
    const auto value = parse_double(field(value_col));
    std::vector<double> row;
    bool complete = value.has_value();
    for (std::size_t c : rm_cols) {
      const auto x = parse_double(field(c));
      if (!x) {
        complete = false;
        break;
      }
      if (*x < 0.0) {
        throw InputError(path + ":" + std::to_string(line_no) + ": negative realized measure");
      }
      row.push_back(*x);
    }
    if (!complete) {
      ++dropped;
      continue;
    }
    if (from_prices && *value <= 0.0) {
      throw InputError(path + ":" + std::to_string(line_no) + ": non-positive price");
    }
    if (!dates.empty() && !(dates.back() < date)) {
      throw InputError(path + ":" + std::to_string(line_no) + ": dates not strictly increasing");
    }
    dates.push_back(date);
    values.push_back(*value);
    rms.push_back(std::move(row));
  }

  if (dates.size() < 2) {
    throw InputError(path + ": fewer than 2 usable rows");
  }

  const std::size_t first = from_prices ? 1 : 0;
  const std::size_t n = dates.size() - first;
  series.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first), dates.end());
  series.returns.resize(n);
  series.rm.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rm_cols.size()));
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t src = t + first;
    series.returns[t] = from_prices ? 100.0 * std::log(values[src] / values[src - 1]) : values[src];
    for (std::size_t j = 0; j < rm_cols.size(); ++j) {
      series.rm(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rms[src][j];
    }
  }
  series.rm_names = options.rm_columns;
  series.dropped_rows = dropped;
  series.validate();
  return series;
}

void write_market_csv(const std::string& path, const MarketSeries& series,
                      const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot write '" + path + "'");
  }
  if (!header_comment.empty()) {
    out << header_comment << '\n';
  }
  out << "# name: " << series.name << '\n';
  out << "# scale: " << (series.volatility_scale ? "volatility" : "variance") << '\n';
  out << "date,return";
  for (const auto& name : series.rm_names) {
    out << ',' << name;
  }
  out << '\n';
  for (std::size_t t = 0; t < series.size(); ++t) {
    out << series.dates[t] << ',' << format_double(series.returns[t]);
    for (Eigen::Index j = 0; j < series.rm.cols(); ++j) {
      out << ',' << format_double(series.rm(static_cast<Eigen::Index>(t), j));
    }
    out << '\n';
  }
}

MarketSeries to_volatility_scale(MarketSeries series) {
  if (series.volatility_scale) {
    throw InputError("realized measures are already on the volatility scale");
  }
  series.rm = series.rm.array().sqrt().matrix();
  series.volatility_scale = true;
  return series;
}

std::vector<double> demean(std::span<const double> returns, double window_mean) {
  std::vector<double> out(returns.size());
  std::transform(returns.begin(), returns.end(), out.begin(),
                 [window_mean](double r) { return r - window_mean; });
  return out;
}

void WindowPlan::validate(std::size_t series_length) const {
  if (in_sample < 250) {
    throw InputError("in-sample size must be at least 250");
  }
  if (out_sample < 1) {
    throw InputError("out-of-sample size must be at least 1");
  }
  if (refit_every < 1) {
    throw InputError("refit_every must be at least 1");
  }
  if (in_sample + out_sample > series_length) {
    throw InputError("window plan exceeds series length (" + std::to_string(in_sample) + " + " +
                     std::to_string(out_sample) + " > " + std::to_string(series_length) + ")");
  }
}

std::vector<Window> rolling_windows(std::size_t series_length, const WindowPlan& plan) {
  // The 250-observation floor is a modelling requirement checked by
  // WindowPlan::validate; the window arithmetic itself only needs room.
  if (plan.in_sample < 1 || plan.out_sample < 1 || plan.refit_every < 1 ||
      plan.in_sample + plan.out_sample > series_length) {
    throw InputError("window plan exceeds series length");
  }
  std::vector<Window> windows;
  windows.reserve(plan.out_sample);
  for (std::size_t i = 0; i < plan.out_sample; ++i) {
    windows.push_back({i, i + plan.in_sample, i + plan.in_sample, i % plan.refit_every == 0});
  }
  return windows;
}

}  // namespace tailrisk
