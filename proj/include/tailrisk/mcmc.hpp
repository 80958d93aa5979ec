#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailrisk/likelihood.hpp"
#include "tailrisk/model.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

/// Ordered groups of parameter indices updated jointly.
struct BlockStructure {
  std::vector<std::vector<int>> blocks;

  std::size_t num_params() const;
  /// True when the blocks partition {0, ..., n-1}.
  bool is_partition(int n) const;
};

BlockStructure block_structure(Family family, int K);

/// 0.44 for one dimension, 0.35 for two to four, 0.234 above four.
double target_acceptance(int dim);

struct BlockProposal {
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;  // lower Cholesky factor of cov
  double scale = 1.0;
  std::size_t accepted = 0;
  std::size_t attempted = 0;

  void set_covariance(const Eigen::MatrixXd& c);
  double acceptance_rate() const;
  int dim() const { return static_cast<int>(cov.rows()); }
};

/// Three-component Gaussian mixture random walk, one covariance per block.
struct ProposalState {
  std::array<double, 3> weights{0.7, 0.15, 0.15};
  std::array<double, 3> factors{1.0, 100.0, 0.01};
  std::vector<BlockProposal> blocks;

  /// (2.38 / sqrt(d)) I for each block of dimension d.
  static ProposalState initial(const BlockStructure& structure);
};

struct Proposal {
  Eigen::VectorXd candidate;
  int component = 0;
};

/// current + N(0, C_i * scale * cov) with component i drawn from the weights.
Proposal propose(const Eigen::VectorXd& current, const BlockProposal& block,
                 const ProposalState& state, CounterRng& rng);

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

/// One Metropolis pass over all blocks in order. Updates theta in place and
/// returns its log density. Throws NumericalError if log_density is -inf.
double metropolis_sweep(Eigen::VectorXd& theta, double log_density,
                        const BlockStructure& structure, ProposalState& state,
                        const LogDensity& target, CounterRng& rng);

inline constexpr double kCovarianceJitter = 1e-8;

/// Between-epoch update: covariance <- sample covariance of the block's epoch
/// draws + jitter, scale *= exp(rate - target) clipped to [0.1, 10], counters reset.
ProposalState tune(const ProposalState& state, const BlockStructure& structure,
                   const Eigen::MatrixXd& epoch_draws);

/// exp(rate - target) clipped to [0.1, 10].
double scale_multiplier(double rate, double target);

struct McmcConfig {
  std::size_t epoch_len = 20000;
  double var_tol = 0.10;
  int max_epochs = 10;
  std::size_t retain = 10000;
  std::uint64_t seed = 0;
  /// Sweeps between scale updates inside an adaptation window.
  std::size_t adapt_batch = 100;
  /// Leading share of every epoch after the first whose sweeps adapt the scale.
  double adapt_fraction = 0.2;
};

enum class ChainStatus { Tuning, Converged };

struct EpochSummary {
  Eigen::VectorXd variances;
  std::vector<double> acceptance;  // per block
  double relative_change = 0.0;    // vs previous epoch (0 for the first)
};

struct Chain {
  std::vector<std::string> names;
  BlockStructure structure;
  Eigen::MatrixXd draws;  // retained iterations x parameters
  std::vector<double> log_post;
  std::vector<EpochSummary> epochs;
  std::vector<double> final_acceptance;  // per block, last epoch
  std::uint64_t seed = 0;
  ChainStatus status = ChainStatus::Tuning;

  int epochs_used() const { return static_cast<int>(epochs.size()); }
};

/// Mean over parameters of |v_cur - v_prev| / max(v_prev, 1e-12).
double epoch_relative_change(const Eigen::VectorXd& previous, const Eigen::VectorXd& current);

/// Epoch loop shared by every target. The initial point must have finite density.
Chain run_sampler(const LogDensity& target, const Eigen::VectorXd& initial,
                  const BlockStructure& structure, const McmcConfig& config,
                  std::vector<std::string> names = {});

/// Draws a start inside region A near the origin: each free parameter uniform
/// on (-0.3, 0.3), the quantile AR coefficient at 0.9, nonnegative gap
/// coefficients at 0.05.
ParamVector initial_point(const ModelSpec& spec, CounterRng& rng);

/// Samples the posterior of one model on one data window.
Chain run(const Posterior& posterior, const McmcConfig& config);

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  bool significant = false;  // 95% interval excludes 0
};

std::vector<ParamSummary> posterior_summary(const Chain& chain);
Eigen::VectorXd posterior_mean(const Chain& chain);

/// Means, 95% intervals, acceptance rates and epochs used; `meta` (possibly
/// empty) is stored under "_meta".
std::string chain_summary_json(const Chain& chain, const std::string& meta = {});

void write_chain_csv(const std::string& path, const Chain& chain,
                     const std::string& header_comment = {});

}  // namespace tailrisk
