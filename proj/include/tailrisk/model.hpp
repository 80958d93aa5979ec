#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tailrisk {

enum class Family {
  REsCaviarM,    // log quantile + multi-measure measurement equation + |u|-driven gap
  LogREsCaviar,  // log quantile regressed on log x, measurement on log(-Q)
  REsCaviar,     // level quantile, measurement on |ES|
  EsXCaviarX,    // level quantile and gap both driven by x
  EsCaviarAdd,   // symmetric-absolute-value quantile, AR gap, no measures
};

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

struct ModelSpec {
  Family family = Family::REsCaviarM;
  int K = 1;
  double alpha = 0.025;
  bool centered_leverage = false;

  /// Throws InputError when K or alpha do not fit the family.
  void validate() const;
  std::string label() const;
};

/// Parameter vectors are flat; the layout below names their entries.
using ParamVector = Eigen::VectorXd;

/// Index layout of the REsCaviarM vector
/// (omega, beta, tau1, tau2, gamma[K], xi[K], phi[K], delta1[K], delta2[K], nu0, nu1, psi[K]).
struct MLayout {
  int K;
  static constexpr int omega = 0;
  static constexpr int beta = 1;
  static constexpr int tau1 = 2;
  static constexpr int tau2 = 3;
  int gamma(int j) const { return 4 + j; }
  int xi(int j) const { return 4 + K + j; }
  int phi(int j) const { return 4 + 2 * K + j; }
  int delta1(int j) const { return 4 + 3 * K + j; }
  int delta2(int j) const { return 4 + 4 * K + j; }
  int nu0() const { return 4 + 5 * K; }
  int nu1() const { return 5 + 5 * K; }
  int psi(int j) const { return 6 + 5 * K + j; }
  int size() const { return 6 + 6 * K; }
};

/// Shared layout for the single-measure families. LogREsCaviar and REsCaviar
/// use all ten slots, EsXCaviarX the first six, EsCaviarAdd the first five
/// (b0, b1, b2, g0, g1).
namespace single {
inline constexpr int b0 = 0, b1 = 1, b2 = 2, g0 = 3, g1 = 4, g2 = 5;
inline constexpr int xi = 6, phi = 7, tau1 = 8, tau2 = 9;
}  // namespace single

int param_count(const ModelSpec& spec);
std::vector<std::string> param_names(const ModelSpec& spec);
/// Index of the quantile autoregressive coefficient (|.| < 1 in region A).
int quantile_ar_index(const ModelSpec& spec);
/// Indices constrained to be nonnegative in region A.
std::vector<int> nonnegative_indices(const ModelSpec& spec);

inline constexpr double kRegionBound = 3.0;
inline constexpr double kLogQuantileLimit = 50.0;

bool check_region_A(const ModelSpec& spec, const ParamVector& theta);

/// beta - sum_j gamma_j * phi_j for REsCaviarM; below 1 indicates stability of
/// the recursion after substituting the measurement equation.
double stationarity_diagnostic(const ModelSpec& spec, const ParamVector& theta);

/// Filtered per-day state. U is K x T; families without a measurement
/// equation leave it empty.
struct RiskPath {
  std::vector<double> Q;
  std::vector<double> omega;
  std::vector<double> ES;
  std::vector<double> eps;
  std::vector<double> e2hat;
  Eigen::MatrixXd U;
  bool finite = true;
  /// One step past the sample: (Q_{T+1}, omega_{T+1}).
  double q_next = 0.0;
  double omega_next = 0.0;
};

/// Lagged state entering the first filter step.
struct InitState {
  double Q0 = -1.0;
  double omega0 = 0.0;
  double eps0 = 0.0;
  Eigen::VectorXd u0;  // empty means zeros
};

struct FilterOptions {
  /// Replaces the causal expanding mean of eps^2 in the centered leverage term.
  std::optional<double> fixed_e2;
  /// Replaces the empirical initialization.
  std::optional<InitState> init;
};

/// Empirical alpha-quantile and tail gap of the in-sample returns.
InitState init_state(std::span<const double> returns, double alpha);

/// Returns plus realized measures on the volatility scale, with logs cached
/// so repeated filtering (as in MCMC) does not recompute them.
class FilterData {
 public:
  FilterData(std::span<const double> returns, const Eigen::MatrixXd& rm_vol);

  std::size_t size() const { return returns_.size(); }
  int num_measures() const { return static_cast<int>(rm_.cols()); }
  std::span<const double> returns() const { return returns_; }
  /// K x T, column t holds the measures of day t.
  const Eigen::MatrixXd& rm() const { return rm_; }
  const Eigen::MatrixXd& log_rm() const { return log_rm_; }
  double mean_rm(int j) const { return mean_rm_[static_cast<std::size_t>(j)]; }
  double mean_abs_return() const { return mean_abs_return_; }

 private:
  std::vector<double> returns_;
  Eigen::MatrixXd rm_;
  Eigen::MatrixXd log_rm_;
  std::vector<double> mean_rm_;
  double mean_abs_return_ = 0.0;
};

RiskPath filter_path(const ModelSpec& spec, const ParamVector& theta, const FilterData& data,
                     const FilterOptions& options = {});

RiskPath filter_path(const ModelSpec& spec, const ParamVector& theta,
                     std::span<const double> returns, const Eigen::MatrixXd& rm_vol,
                     const FilterOptions& options = {});

/// CSV with columns date, Q, omega, ES, eps, u_1..u_K.
void write_risk_path_csv(const std::string& path, const std::vector<std::string>& dates,
                         const RiskPath& risk_path, const std::string& header_comment = {});

}  // namespace tailrisk
