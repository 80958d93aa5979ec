#include "tailrisk/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "csv_util.hpp"
#include "json.hpp"
#include "tailrisk/error.hpp"
#include "tailrisk/stats.hpp"

namespace tailrisk {

namespace {

constexpr int kMaxInitTries = 100;

std::vector<int> range(int begin, int end) {
  std::vector<int> out(static_cast<std::size_t>(end - begin));
  std::iota(out.begin(), out.end(), begin);
  return out;
}

BlockStructure m_blocks(int K) {
  const MLayout L{K};
  BlockStructure s;
  s.blocks.push_back({MLayout::omega, MLayout::beta, MLayout::tau1, MLayout::tau2});
  if (K == 1) {
    s.blocks.push_back({L.gamma(0), L.delta1(0), L.delta2(0)});
    s.blocks.push_back({L.nu0(), L.nu1()});
    s.blocks.push_back({L.xi(0), L.phi(0), L.psi(0)});
    return s;
  }
  if (K == 2) {
    s.blocks.push_back({L.gamma(0), L.gamma(1), L.xi(0), L.xi(1)});
    s.blocks.push_back({L.phi(0), L.phi(1)});
    s.blocks.push_back({L.delta1(0), L.delta2(0), L.delta1(1), L.delta2(1)});
    s.blocks.push_back({L.nu0(), L.nu1()});
    s.blocks.push_back({L.psi(0), L.psi(1)});
    return s;
  }
  if (K == 3) {
    s.blocks.push_back(range(L.gamma(0), L.gamma(0) + 3));
    s.blocks.push_back(range(L.xi(0), L.xi(0) + 3));
    s.blocks.push_back(range(L.phi(0), L.phi(0) + 3));
    s.blocks.push_back(range(L.delta1(0), L.delta1(0) + 3));
    s.blocks.push_back(range(L.delta2(0), L.delta2(0) + 3));
    s.blocks.push_back({L.nu0(), L.nu1()});
    s.blocks.push_back(range(L.psi(0), L.psi(0) + 3));
    return s;
  }
  throw InputError("no block structure for REsCaviarM with K = " + std::to_string(K));
}

Eigen::MatrixXd block_draws(const Eigen::MatrixXd& draws, const std::vector<int>& block) {
  Eigen::MatrixXd out(draws.rows(), static_cast<Eigen::Index>(block.size()));
  for (std::size_t c = 0; c < block.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = draws.col(block[c]);
  }
  return out;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::Index d = x.cols();
  if (x.rows() < 2) {
    return Eigen::MatrixXd::Zero(d, d);
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mu;
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

Eigen::VectorXd column_variances(const Eigen::MatrixXd& x) {
  Eigen::VectorXd v(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Eigen::VectorXd col = x.col(c);
    v[c] = stats::variance(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
  }
  return v;
}

}  // namespace

std::size_t BlockStructure::num_params() const {
  std::size_t n = 0;
  for (const auto& b : blocks) {
    n += b.size();
  }
  return n;
}

bool BlockStructure::is_partition(int n) const {
  std::vector<int> seen(static_cast<std::size_t>(std::max(n, 0)), 0);
  for (const auto& b : blocks) {
    if (b.empty()) {
      return false;
    }
    for (int i : b) {
      if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)]++) {
        return false;
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

BlockStructure block_structure(Family family, int K) {
  using namespace single;
  switch (family) {
    case Family::REsCaviarM:
      return m_blocks(K);
    case Family::LogREsCaviar:
    case Family::REsCaviar:
      if (K != 1) {
        break;
      }
      return BlockStructure{{{b0, b1, b2}, {g0, g1, g2}, {xi, phi, tau1, tau2}}};
    case Family::EsXCaviarX:
      if (K != 1) {
        break;
      }
      return BlockStructure{{{b0, b1, b2}, {g0, g1, g2}}};
    case Family::EsCaviarAdd:
      if (K != 0) {
        break;
      }
      return BlockStructure{{{b0, b1, b2}, {g0, g1}}};
  }
  throw InputError("no block structure for " + std::string(family_name(family)) +
                   " with K = " + std::to_string(K));
}

double target_acceptance(int dim) {
  if (dim <= 1) {
    return 0.44;
  }
  return dim <= 4 ? 0.35 : 0.234;
}

void BlockProposal::set_covariance(const Eigen::MatrixXd& c) {
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("proposal covariance is not positive definite");
  }
  cov = c;
  chol = llt.matrixL();
}

double BlockProposal::acceptance_rate() const {
  return attempted == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempted);
}

ProposalState ProposalState::initial(const BlockStructure& structure) {
  ProposalState state;
  for (const auto& b : structure.blocks) {
    const auto d = static_cast<Eigen::Index>(b.size());
    BlockProposal p;
    p.set_covariance(Eigen::MatrixXd::Identity(d, d) * (2.38 / std::sqrt(static_cast<double>(d))));
    state.blocks.push_back(std::move(p));
  }
  return state;
}

Proposal propose(const Eigen::VectorXd& current, const BlockProposal& block,
                 const ProposalState& state, CounterRng& rng) {
  const double u = rng.uniform();
  int component = 0;
  double cumulative = state.weights[0];
  while (component < 2 && u > cumulative) {
    ++component;
    cumulative += state.weights[static_cast<std::size_t>(component)];
  }
  Eigen::VectorXd z(current.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = rng.normal();
  }
  const double s = std::sqrt(block.scale * state.factors[static_cast<std::size_t>(component)]);
  return Proposal{current + s * (block.chol * z), component};
}

double metropolis_sweep(Eigen::VectorXd& theta, double log_density,
                        const BlockStructure& structure, ProposalState& state,
                        const LogDensity& target, CounterRng& rng) {
  if (log_density == kNegInf || std::isnan(log_density)) {
    throw NumericalError("chain state has zero posterior density");
  }
  Eigen::VectorXd candidate = theta;
  for (std::size_t b = 0; b < structure.blocks.size(); ++b) {
    const auto& idx = structure.blocks[b];
    auto& bp = state.blocks[b];
    Eigen::VectorXd current(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      current[static_cast<Eigen::Index>(i)] = theta[idx[i]];
    }
    const Proposal prop = propose(current, bp, state, rng);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      candidate[idx[i]] = prop.candidate[static_cast<Eigen::Index>(i)];
    }
    const double lp = target(candidate);
    const double log_u = std::log(rng.uniform());
    ++bp.attempted;
    if (lp != kNegInf && !std::isnan(lp) && log_u < lp - log_density) {
      ++bp.accepted;
      log_density = lp;
      for (int i : idx) {
        theta[i] = candidate[i];
      }
    } else {
      for (int i : idx) {
        candidate[i] = theta[i];
      }
    }
  }
  return log_density;
}

double scale_multiplier(double rate, double target) {
  return std::clamp(std::exp(rate - target), 0.1, 10.0);
}

ProposalState tune(const ProposalState& state, const BlockStructure& structure,
                   const Eigen::MatrixXd& epoch_draws) {
  ProposalState out = state;
  for (std::size_t b = 0; b < structure.blocks.size(); ++b) {
    const auto& idx = structure.blocks[b];
    auto& bp = out.blocks[b];
    const auto d = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd cov = sample_covariance(block_draws(epoch_draws, idx));
    cov += Eigen::MatrixXd::Identity(d, d) * kCovarianceJitter;
    bp.set_covariance(cov);
    bp.scale *= scale_multiplier(bp.acceptance_rate(), target_acceptance(static_cast<int>(d)));
    bp.accepted = 0;
    bp.attempted = 0;
  }
  return out;
}

double epoch_relative_change(const Eigen::VectorXd& previous, const Eigen::VectorXd& current) {
  if (previous.size() != current.size() || previous.size() == 0) {
    throw InputError("epoch variance vectors differ in length");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < previous.size(); ++i) {
    total += std::abs(current[i] - previous[i]) / std::max(previous[i], 1e-12);
  }
  return total / static_cast<double>(previous.size());
}

Chain run_sampler(const LogDensity& target, const Eigen::VectorXd& initial,
                  const BlockStructure& structure, const McmcConfig& config,
                  std::vector<std::string> names) {
  const auto P = static_cast<int>(initial.size());
  if (!structure.is_partition(P)) {
    throw InputError("block structure does not partition the parameter vector");
  }
  if (config.epoch_len < 2 || config.max_epochs < 1 || config.retain < 1) {
    throw InputError("MCMC config needs epoch_len >= 2, max_epochs >= 1, retain >= 1");
  }
  if (!(config.adapt_fraction >= 0.0 && config.adapt_fraction < 1.0)) {
    throw InputError("adapt_fraction must lie in [0, 1)");
  }
  if (!(config.var_tol > 0.0)) {
    throw InputError("var_tol must be positive");
  }
  if (names.empty()) {
    for (int i = 0; i < P; ++i) {
      names.push_back("theta" + std::to_string(i + 1));
    }
  }

  CounterRng rng(config.seed, 0);
  ProposalState state = ProposalState::initial(structure);
  Eigen::VectorXd theta = initial;
  double lp = target(theta);
  if (lp == kNegInf || std::isnan(lp)) {
    throw NumericalError("initial point has zero posterior density");
  }

  Chain chain;
  chain.names = std::move(names);
  chain.structure = structure;
  chain.seed = config.seed;

  const auto N = static_cast<Eigen::Index>(config.epoch_len);
  Eigen::MatrixXd draws(N, P);
  std::vector<double> trace(config.epoch_len);
  Eigen::VectorXd previous_var;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    // Scale follows batch acceptance rates during an adaptation window: the
    // whole first epoch (isotropic start covariance), then the leading
    // adapt_fraction of each later epoch. The rest of the epoch is frozen and
    // its acceptance counters feed tune().
    const std::size_t window =
        epoch == 0 ? config.epoch_len
                   : static_cast<std::size_t>(config.adapt_fraction *
                                              static_cast<double>(config.epoch_len));
    std::vector<std::size_t> batch_acc(state.blocks.size(), 0);
    std::vector<std::size_t> batch_att(state.blocks.size(), 0);
    for (Eigen::Index it = 0; it < N; ++it) {
      lp = metropolis_sweep(theta, lp, structure, state, target, rng);
      draws.row(it) = theta.transpose();
      trace[static_cast<std::size_t>(it)] = lp;
      const auto done = static_cast<std::size_t>(it) + 1;
      if (config.adapt_batch > 0 && done <= window && done % config.adapt_batch == 0) {
        for (std::size_t b = 0; b < state.blocks.size(); ++b) {
          auto& bp = state.blocks[b];
          const double rate = static_cast<double>(bp.accepted - batch_acc[b]) /
                              static_cast<double>(bp.attempted - batch_att[b]);
          bp.scale *= scale_multiplier(rate, target_acceptance(bp.dim()));
          batch_acc[b] = bp.accepted;
          batch_att[b] = bp.attempted;
        }
      }
      if (epoch > 0 && done == window && done < config.epoch_len) {
        for (auto& bp : state.blocks) {
          bp.accepted = 0;
          bp.attempted = 0;
        }
        std::fill(batch_acc.begin(), batch_acc.end(), 0);
        std::fill(batch_att.begin(), batch_att.end(), 0);
      }
    }

    EpochSummary summary;
    summary.variances = column_variances(draws);
    for (const auto& bp : state.blocks) {
      summary.acceptance.push_back(bp.acceptance_rate());
    }
    bool converged = false;
    if (epoch > 0) {
      summary.relative_change = epoch_relative_change(previous_var, summary.variances);
      converged = summary.relative_change < config.var_tol;
    }
    previous_var = summary.variances;
    chain.final_acceptance = summary.acceptance;
    chain.epochs.push_back(std::move(summary));

    if (converged || epoch + 1 == config.max_epochs) {
      chain.status = converged ? ChainStatus::Converged : ChainStatus::Tuning;
      break;
    }

    if (epoch == 0) {
      // Leave the isotropic phase: drop the transient first half and restart
      // the scale at the optimal random-walk value for the new covariance.
      state = tune(state, structure, draws.bottomRows(N - N / 2));
      for (auto& bp : state.blocks) {
        bp.scale = 2.38 * 2.38 / static_cast<double>(bp.dim());
      }
    } else {
      state = tune(state, structure, draws);
    }
  }

  if (chain.status != ChainStatus::Converged) {
    std::cerr << "warning: MCMC did not converge within " << config.max_epochs << " epochs\n";
  }
  const Eigen::Index keep = std::min<Eigen::Index>(N, static_cast<Eigen::Index>(config.retain));
  chain.draws = draws.bottomRows(keep);
  chain.log_post.assign(trace.end() - keep, trace.end());
  return chain;
}

ParamVector initial_point(const ModelSpec& spec, CounterRng& rng) {
  ParamVector theta(param_count(spec));
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    theta[i] = -0.1 * kRegionBound + 0.2 * kRegionBound * rng.uniform();
  }
  theta[quantile_ar_index(spec)] = 0.9;
  for (int i : nonnegative_indices(spec)) {
    theta[i] = 0.05;
  }
  return theta;
}

Chain run(const Posterior& posterior, const McmcConfig& config) {
  const ModelSpec& spec = posterior.spec();
  CounterRng init_rng(config.seed, 1);
  ParamVector start;
  bool found = false;
  for (int attempt = 0; attempt < kMaxInitTries && !found; ++attempt) {
    start = initial_point(spec, init_rng);
    const double lp = posterior(start);
    found = lp != kNegInf && !std::isnan(lp);
  }
  if (!found) {
    throw NumericalError("no initial point with finite posterior after " +
                         std::to_string(kMaxInitTries) + " draws");
  }
  const LogDensity target = [&posterior](const Eigen::VectorXd& th) { return posterior(th); };
  return run_sampler(target, start, block_structure(spec.family, spec.K), config,
                     param_names(spec));
}

std::vector<ParamSummary> posterior_summary(const Chain& chain) {
  if (chain.draws.rows() == 0) {
    throw InputError("posterior summary of an empty chain");
  }
  std::vector<ParamSummary> out;
  for (Eigen::Index c = 0; c < chain.draws.cols(); ++c) {
    const Eigen::VectorXd col = chain.draws.col(c);
    const std::span<const double> x(col.data(), static_cast<std::size_t>(col.size()));
    ParamSummary s;
    s.name = c < static_cast<Eigen::Index>(chain.names.size())
                 ? chain.names[static_cast<std::size_t>(c)]
                 : "theta" + std::to_string(c + 1);
    s.mean = stats::mean(x);
    s.sd = x.size() > 1 ? std::sqrt(stats::variance(x)) : 0.0;
    s.q025 = stats::quantile(x, 0.025);
    s.q975 = stats::quantile(x, 0.975);
    s.significant = !(s.q025 <= 0.0 && s.q975 >= 0.0);
    out.push_back(std::move(s));
  }
  return out;
}

Eigen::VectorXd posterior_mean(const Chain& chain) {
  if (chain.draws.rows() == 0) {
    throw InputError("posterior mean of an empty chain");
  }
  return chain.draws.colwise().mean().transpose();
}

std::string chain_summary_json(const Chain& chain, const std::string& meta) {
  nlohmann::ordered_json j;
  if (!meta.empty()) {
    j["_meta"] = meta;
  }
  j["seed"] = chain.seed;
  j["status"] = chain.status == ChainStatus::Converged ? "converged" : "tuning";
  j["epochs_used"] = chain.epochs_used();
  j["retained"] = chain.draws.rows();
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < chain.structure.blocks.size(); ++b) {
    std::vector<std::string> members;
    for (int i : chain.structure.blocks[b]) {
      members.push_back(chain.names[static_cast<std::size_t>(i)]);
    }
    const int d = static_cast<int>(members.size());
    blocks.push_back({{"parameters", members},
                      {"acceptance", chain.final_acceptance[b]},
                      {"target", target_acceptance(d)}});
  }
  j["blocks"] = blocks;
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto& s : posterior_summary(chain)) {
    params.push_back({{"name", s.name},
                      {"mean", s.mean},
                      {"sd", s.sd},
                      {"q2.5", s.q025},
                      {"q97.5", s.q975},
                      {"significant", s.significant}});
  }
  j["parameters"] = params;
  return j.dump(2);
}

void write_chain_csv(const std::string& path, const Chain& chain,
                     const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path + " for writing");
  }
  if (!header_comment.empty()) {
    out << header_comment << '\n';
  }
  out << "iter,log_post";
  for (const auto& n : chain.names) {
    out << ',' << n;
  }
  out << '\n';
  for (Eigen::Index r = 0; r < chain.draws.rows(); ++r) {
    out << r << ',' << csv::format_double(chain.log_post[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < chain.draws.cols(); ++c) {
      out << ',' << csv::format_double(chain.draws(r, c));
    }
    out << '\n';
  }
}

}  // namespace tailrisk
