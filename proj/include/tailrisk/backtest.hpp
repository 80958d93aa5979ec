#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tailrisk {

enum class LossKind { Quantile, Joint };

struct LossSeries {
  LossKind kind = LossKind::Quantile;
  double alpha = 0.0;
  std::vector<double> values;

  double average() const;
};

/// (alpha - 1{r <= q}) (r - q), nonnegative.
LossSeries quantile_loss(std::span<const double> realized, std::span<const double> q_hat,
                         double alpha);

/// -log((alpha - 1)/es) - (r - q)(alpha - 1{r <= q}) / (alpha es): the negative
/// asymmetric-Laplace log score. Throws InputError if any es >= 0.
LossSeries joint_loss(std::span<const double> realized, std::span<const double> q_hat,
                      std::span<const double> es_hat, double alpha);

struct ViolationRate {
  double rate = 0.0;   // share of days with r < q
  double ratio = 0.0;  // rate / alpha
};

ViolationRate vrate(std::span<const double> realized, std::span<const double> q_hat,
                    double alpha);

enum class McsMethod { R, SQ };

std::string mcs_method_name(McsMethod method);
McsMethod parse_mcs_method(const std::string& name);

struct McsConfig {
  double level = 0.75;
  McsMethod method = McsMethod::R;
  int B = 5000;
  int block_len = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct McsResult {
  McsMethod method = McsMethod::R;
  double level = 0.75;
  int B = 0;
  int block_len = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> labels;
  std::vector<int> survivors;          // model indices, ascending
  std::vector<int> elimination_order;  // model indices, first eliminated first
  std::vector<double> p_values;        // per model index

  bool survives(int model) const;
  /// JSON report; `meta` (possibly empty) is stored under "_meta".
  std::string to_json(const std::string& meta = {}) const;
};

/// Model confidence set over an m x M loss matrix (rows are days).
/// Pairwise t-statistics use circular block bootstrap variances; the bootstrap
/// resample b draws from its own counter stream (seed, b).
McsResult mcs(const Eigen::MatrixXd& losses, const std::vector<std::string>& labels,
              const McsConfig& config);

/// Circular block bootstrap indices for one replicate.
std::vector<std::size_t> circular_block_indices(std::size_t m, int block_len,
                                                std::uint64_t seed, std::uint64_t replicate);

/// Average rank per model over markets (rows) of a markets x models table of
/// average losses; rank 1 is the lowest loss and ties go to the model whose
/// label sorts first.
std::vector<double> rank_table(const Eigen::MatrixXd& avg_losses,
                               const std::vector<std::string>& labels);

/// Loss matrix CSV: optional "date" column plus one numeric column per model.
struct LossTable {
  std::vector<std::string> dates;
  std::vector<std::string> labels;
  Eigen::MatrixXd losses;
};

LossTable read_loss_table(const std::string& path);
void write_loss_table(const std::string& path, const LossTable& table,
                      const std::string& header_comment = {});

}  // namespace tailrisk
