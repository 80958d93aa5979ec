#include "tailrisk/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "csv_util.hpp"
#include "json.hpp"
#include "tailrisk/error.hpp"
#include "tailrisk/parallel.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw InputError("loss inputs differ in length");
  }
}

// Pairwise t-statistic d / sqrt(v) with the zero-variance conventions.
double t_stat(double d, double v) {
  if (v > 0.0) {
    return d / std::sqrt(v);
  }
  if (d == 0.0) {
    return 0.0;
  }
  return d > 0.0 ? kInf : -kInf;
}

double centered_ratio(double dev, double v) { return v > 0.0 ? dev / std::sqrt(v) : 0.0; }

}  // namespace

double LossSeries::average() const {
  if (values.empty()) {
    return 0.0;
  }
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

LossSeries quantile_loss(std::span<const double> realized, std::span<const double> q_hat,
                         double alpha) {
  check_lengths(realized.size(), q_hat.size());
  LossSeries out{LossKind::Quantile, alpha, {}};
  out.values.reserve(realized.size());
  for (std::size_t t = 0; t < realized.size(); ++t) {
    const double hit = realized[t] <= q_hat[t] ? 1.0 : 0.0;
    out.values.push_back((alpha - hit) * (realized[t] - q_hat[t]));
  }
  return out;
}

LossSeries joint_loss(std::span<const double> realized, std::span<const double> q_hat,
                      std::span<const double> es_hat, double alpha) {
  check_lengths(realized.size(), q_hat.size());
  check_lengths(realized.size(), es_hat.size());
  LossSeries out{LossKind::Joint, alpha, {}};
  out.values.reserve(realized.size());
  for (std::size_t t = 0; t < realized.size(); ++t) {
    const double es = es_hat[t];
    if (!(es < 0.0)) {
      throw InputError("joint loss needs negative ES forecasts (day " + std::to_string(t + 1) +
                       ")");
    }
    const double hit = realized[t] <= q_hat[t] ? 1.0 : 0.0;
    out.values.push_back(-std::log((alpha - 1.0) / es) -
                         (realized[t] - q_hat[t]) * (alpha - hit) / (alpha * es));
  }
  return out;
}

ViolationRate vrate(std::span<const double> realized, std::span<const double> q_hat,
                    double alpha) {
  check_lengths(realized.size(), q_hat.size());
  if (realized.empty()) {
    throw InputError("violation rate of an empty series");
  }
  std::size_t hits = 0;
  for (std::size_t t = 0; t < realized.size(); ++t) {
    hits += realized[t] < q_hat[t] ? 1 : 0;
  }
  ViolationRate v;
  v.rate = static_cast<double>(hits) / static_cast<double>(realized.size());
  v.ratio = v.rate / alpha;
  return v;
}

std::string mcs_method_name(McsMethod method) { return method == McsMethod::R ? "R" : "SQ"; }

McsMethod parse_mcs_method(const std::string& name) {
  if (name == "R") {
    return McsMethod::R;
  }
  if (name == "SQ") {
    return McsMethod::SQ;
  }
  throw InputError("unknown MCS method '" + name + "' (expected R or SQ)");
}

bool McsResult::survives(int model) const {
  return std::find(survivors.begin(), survivors.end(), model) != survivors.end();
}

std::string McsResult::to_json(const std::string& meta) const {
  nlohmann::ordered_json j;
  if (!meta.empty()) {
    j["_meta"] = meta;
  }
  j["method"] = mcs_method_name(method);
  j["level"] = level;
  j["B"] = B;
  j["block_len"] = block_len;
  j["seed"] = seed;
  const auto names = [&](const std::vector<int>& idx) {
    std::vector<std::string> out;
    for (int i : idx) {
      out.push_back(labels[static_cast<std::size_t>(i)]);
    }
    return out;
  };
  j["survivors"] = names(survivors);
  j["elimination_order"] = names(elimination_order);
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    p[labels[i]] = p_values[i];
  }
  j["p_values"] = p;
  return j.dump(2);
}

std::vector<std::size_t> circular_block_indices(std::size_t m, int block_len, std::uint64_t seed,
                                                std::uint64_t replicate) {
  CounterRng rng(seed, replicate);
  std::vector<std::size_t> idx;
  idx.reserve(m);
  const auto L = static_cast<std::size_t>(block_len);
  while (idx.size() < m) {
    const std::size_t start = static_cast<std::size_t>(rng.below(m));
    for (std::size_t k = 0; k < L && idx.size() < m; ++k) {
      idx.push_back((start + k) % m);
    }
  }
  return idx;
}

McsResult mcs(const Eigen::MatrixXd& losses, const std::vector<std::string>& labels,
              const McsConfig& config) {
  const auto m = static_cast<std::size_t>(losses.rows());
  const auto M = static_cast<int>(losses.cols());
  if (M < 1 || labels.size() != static_cast<std::size_t>(M)) {
    throw InputError("MCS needs one label per loss column");
  }
  if (M > 1 && m < 50) {
    throw InputError("MCS needs at least 50 loss observations");
  }
  if (config.B < 100) {
    throw InputError("MCS needs at least 100 bootstrap replicates");
  }
  if (config.block_len < 1) {
    throw InputError("MCS block length must be positive");
  }
  if (!(config.level > 0.0 && config.level < 1.0)) {
    throw InputError("MCS level must lie in (0, 1)");
  }
  if (!losses.allFinite()) {
    throw InputError("MCS losses must be finite");
  }

  McsResult result;
  result.method = config.method;
  result.level = config.level;
  result.B = config.B;
  result.block_len = config.block_len;
  result.seed = config.seed;
  result.labels = labels;
  result.p_values.assign(static_cast<std::size_t>(M), 1.0);
  if (M == 1) {
    result.survivors = {0};
    return result;
  }

  const Eigen::RowVectorXd mean = losses.colwise().mean();
  // Bootstrap means, one row per replicate.
  const auto B = static_cast<std::size_t>(config.B);
  Eigen::MatrixXd boot(static_cast<Eigen::Index>(B), M);
  parallel_for(B, config.jobs, [&](std::size_t b) {
    const auto idx = circular_block_indices(m, config.block_len, config.seed, b);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(M);
    for (std::size_t t : idx) {
      acc += losses.row(static_cast<Eigen::Index>(t));
    }
    boot.row(static_cast<Eigen::Index>(b)) = acc / static_cast<double>(m);
  });

  // Bootstrap variance of each pairwise mean differential.
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(M, M);
  for (int i = 0; i < M; ++i) {
    for (int j = i + 1; j < M; ++j) {
      const double d = mean[i] - mean[j];
      const Eigen::ArrayXd dev = (boot.col(i) - boot.col(j)).array() - d;
      var(i, j) = var(j, i) = dev.square().mean();
    }
  }

  std::vector<int> alive(static_cast<std::size_t>(M));
  std::iota(alive.begin(), alive.end(), 0);
  const double threshold = 1.0 - config.level;
  double running_p = 0.0;
  std::vector<double> boot_stat(B);
  while (alive.size() > 1) {
    double stat = 0.0;
    std::fill(boot_stat.begin(), boot_stat.end(), 0.0);
    for (std::size_t a = 0; a < alive.size(); ++a) {
      for (std::size_t c = a + 1; c < alive.size(); ++c) {
        const int i = alive[a];
        const int j = alive[c];
        const double d = mean[i] - mean[j];
        const double v = var(i, j);
        const double t = t_stat(d, v);
        if (config.method == McsMethod::R) {
          stat = std::max(stat, std::abs(t));
        } else {
          stat += t * t;
        }
        for (std::size_t b = 0; b < B; ++b) {
          const auto r = static_cast<Eigen::Index>(b);
          const double tb = centered_ratio(boot(r, i) - boot(r, j) - d, v);
          if (config.method == McsMethod::R) {
            boot_stat[b] = std::max(boot_stat[b], std::abs(tb));
          } else {
            boot_stat[b] += tb * tb;
          }
        }
      }
    }
    std::size_t exceed = 0;
    for (double s : boot_stat) {
      exceed += s >= stat ? 1 : 0;
    }
    const double p = static_cast<double>(exceed) / static_cast<double>(B);
    if (p >= threshold) {
      break;
    }
    running_p = std::max(running_p, p);
    // Remove the model with the largest worst-case t-statistic against the rest.
    std::size_t worst = 0;
    double worst_t = -kInf;
    for (std::size_t a = 0; a < alive.size(); ++a) {
      double row_max = -kInf;
      for (std::size_t c = 0; c < alive.size(); ++c) {
        if (a != c) {
          const int i = alive[a];
          const int j = alive[c];
          row_max = std::max(row_max, t_stat(mean[i] - mean[j], var(i, j)));
        }
      }
      if (row_max > worst_t) {
        worst_t = row_max;
        worst = a;
      }
    }
    const int out = alive[worst];
    result.elimination_order.push_back(out);
    result.p_values[static_cast<std::size_t>(out)] = running_p;
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  result.survivors = alive;
  return result;
}

std::vector<double> rank_table(const Eigen::MatrixXd& avg_losses,
                               const std::vector<std::string>& labels) {
  const auto M = static_cast<std::size_t>(avg_losses.cols());
  if (labels.size() != M) {
    throw InputError("rank table needs one label per model column");
  }
  if (avg_losses.rows() == 0) {
    throw InputError("rank table needs at least one market");
  }
  std::vector<double> total(M, 0.0);
  std::vector<std::size_t> order(M);
  for (Eigen::Index r = 0; r < avg_losses.rows(); ++r) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double la = avg_losses(r, static_cast<Eigen::Index>(a));
      const double lb = avg_losses(r, static_cast<Eigen::Index>(b));
      if (la != lb) {
        return la < lb;
      }
      return labels[a] < labels[b];
    });
    for (std::size_t k = 0; k < M; ++k) {
      total[order[k]] += static_cast<double>(k + 1);
    }
  }
  for (double& t : total) {
    t /= static_cast<double>(avg_losses.rows());
  }
  return total;
}

LossTable read_loss_table(const std::string& path) {
  const csv::Table table = csv::read_table(path);
  LossTable out;
  std::vector<std::size_t> cols;
  std::optional<std::size_t> date_col;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c] == "date") {
      date_col = c;
    } else {
      cols.push_back(c);
      out.labels.push_back(table.header[c]);
    }
  }
  if (cols.empty()) {
    throw InputError(path + ": no model columns");
  }
  out.losses.resize(static_cast<Eigen::Index>(table.rows.size()),
                    static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() < table.header.size()) {
      throw InputError(path + ": row " + std::to_string(r + 1) + " is short");
    }
    if (date_col) {
      out.dates.push_back(row[*date_col]);
    }
    for (std::size_t k = 0; k < cols.size(); ++k) {
      out.losses(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          csv::require_double(row[cols[k]], path, r);
    }
  }
  return out;
}

void write_loss_table(const std::string& path, const LossTable& table,
                      const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path + " for writing");
  }
  if (!header_comment.empty()) {
    out << header_comment << '\n';
  }
  const bool dated = !table.dates.empty();
  if (dated) {
    out << "date";
  }
  for (std::size_t k = 0; k < table.labels.size(); ++k) {
    out << (dated || k > 0 ? "," : "") << table.labels[k];
  }
  out << '\n';
  for (Eigen::Index r = 0; r < table.losses.rows(); ++r) {
    if (dated) {
      out << table.dates[static_cast<std::size_t>(r)];
    }
    for (Eigen::Index k = 0; k < table.losses.cols(); ++k) {
      out << (dated || k > 0 ? "," : "") << csv::format_double(table.losses(r, k));
    }
    out << '\n';
  }
}

}  // namespace tailrisk
