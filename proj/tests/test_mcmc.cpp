#include <cmath>
#include <numeric>

#include "doctest.h"
#include "tailrisk/error.hpp"
#include "tailrisk/mcmc.hpp"
#include "tailrisk/simulate.hpp"
#include "test_support.hpp"

using namespace tailrisk;
using namespace tailrisk::testing;

namespace {

// Batch-means standard error of a scalar trace.
double batch_se(const std::vector<double>& x, int batches = 50) {
  const std::size_t len = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += x[static_cast<std::size_t>(b) * len + i];
    means.push_back(s / static_cast<double>(len));
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / batches;
  double v = 0.0;
  for (double bm : means) v += (bm - m) * (bm - m);
  return std::sqrt(v / (batches - 1) / batches);
}

}  // namespace

TEST_CASE("block structures partition the parameters") {
  for (int K = 1; K <= 3; ++K) {
    const ModelSpec spec{Family::REsCaviarM, K, 0.025, false};
    const auto s = block_structure(spec.family, K);
    CHECK(s.is_partition(param_count(spec)));
    CHECK(s.num_params() == static_cast<std::size_t>(param_count(spec)));
  }
  CHECK(block_structure(Family::REsCaviarM, 1).blocks.size() == 4);
  CHECK(block_structure(Family::REsCaviarM, 2).blocks.size() == 6);
  CHECK(block_structure(Family::REsCaviarM, 3).blocks.size() == 8);
  const MLayout L{1};
  const auto k1 = block_structure(Family::REsCaviarM, 1);
  CHECK(k1.blocks[0] == std::vector<int>{0, 1, 2, 3});
  CHECK(k1.blocks[1] == std::vector<int>{L.gamma(0), L.delta1(0), L.delta2(0)});
  CHECK(k1.blocks[2] == std::vector<int>{L.nu0(), L.nu1()});
  CHECK(k1.blocks[3] == std::vector<int>{L.xi(0), L.phi(0), L.psi(0)});
  const MLayout L3{3};
  const auto k3 = block_structure(Family::REsCaviarM, 3);
  CHECK(k3.blocks[4] == std::vector<int>{L3.delta1(0), L3.delta1(1), L3.delta1(2)});
  CHECK(k3.blocks[5] == std::vector<int>{L3.delta2(0), L3.delta2(1), L3.delta2(2)});

  for (auto [fam, K] : {std::pair{Family::LogREsCaviar, 1}, {Family::REsCaviar, 1},
                        {Family::EsXCaviarX, 1}, {Family::EsCaviarAdd, 0}}) {
    CHECK(block_structure(fam, K).is_partition(param_count({fam, K, 0.025, false})));
  }
  CHECK_THROWS_AS(block_structure(Family::REsCaviarM, 4), InputError);
  CHECK_FALSE((BlockStructure{{{0, 1}, {1, 2}}}.is_partition(3)));
  CHECK_FALSE((BlockStructure{{{0}, {2}}}.is_partition(3)));
}

TEST_CASE("acceptance targets") {
  CHECK(target_acceptance(1) == 0.44);
  CHECK(target_acceptance(2) == 0.35);
  CHECK(target_acceptance(4) == 0.35);
  CHECK(target_acceptance(5) == 0.234);
}

TEST_CASE("initial proposal state") {
  const auto st = ProposalState::initial(block_structure(Family::REsCaviarM, 1));
  CHECK(std::accumulate(st.weights.begin(), st.weights.end(), 0.0) == doctest::Approx(1.0));
  CHECK(st.factors == std::array<double, 3>{1.0, 100.0, 0.01});
  CHECK(st.blocks[0].cov.isApprox(Eigen::MatrixXd::Identity(4, 4) * 1.19));
  CHECK(st.blocks[1].cov(0, 0) == doctest::Approx(2.38 / std::sqrt(3.0)));
}

TEST_CASE("proposal components and symmetry") {
  BlockStructure s{{{0, 1}}};
  ProposalState st = ProposalState::initial(s);
  CounterRng rng(1);
  const Eigen::VectorXd cur = Eigen::Vector2d(0.3, -0.2);
  std::array<int, 3> counts{};
  const int n = 100000;
  std::vector<double> d0(n);
  for (int i = 0; i < n; ++i) {
    const auto p = propose(cur, st.blocks[0], st, rng);
    ++counts[static_cast<std::size_t>(p.component)];
    d0[static_cast<std::size_t>(i)] = p.candidate[0] - cur[0];
  }
  CHECK(std::abs(counts[0] / double(n) - 0.7) < 0.01);
  CHECK(std::abs(counts[1] / double(n) - 0.15) < 0.01);
  CHECK(std::abs(counts[2] / double(n) - 0.15) < 0.01);

  const double mean = std::accumulate(d0.begin(), d0.end(), 0.0) / n;
  double var = 0.0;
  for (double v : d0) var += (v - mean) * (v - mean);
  const double se = std::sqrt(var / (n - 1) / n);
  CHECK(std::abs(mean) < 3.0 * se);

  st.blocks[0].set_covariance(Eigen::MatrixXd::Identity(2, 2) * 1e-24);
  const auto tiny = propose(cur, st.blocks[0], st, rng);
  CHECK((tiny.candidate - cur).norm() < 1e-9);
}

TEST_CASE("sweep acceptance rules") {
  BlockStructure s{{{0}, {1}}};
  ProposalState st = ProposalState::initial(s);
  CounterRng rng(2);
  Eigen::VectorXd th = Eigen::Vector2d(0.1, 0.2);

  const LogDensity flat = [](const Eigen::VectorXd&) { return 0.0; };
  for (int i = 0; i < 100; ++i) metropolis_sweep(th, 0.0, s, st, flat, rng);
  CHECK(st.blocks[0].accepted == 100);
  CHECK(st.blocks[1].accepted == 100);

  const Eigen::VectorXd start = th;
  const LogDensity wall = [&start](const Eigen::VectorXd& x) {
    return x == start ? 0.0 : kNegInf;
  };
  for (int i = 0; i < 100; ++i) metropolis_sweep(th, 0.0, s, st, wall, rng);
  CHECK(th == start);
  CHECK(st.blocks[0].accepted == 100);

  CHECK_THROWS_AS(metropolis_sweep(th, kNegInf, s, st, flat, rng), NumericalError);
}

TEST_CASE("Gaussian toy target") {
  // N((1, -2), [[1, 0.6], [0.6, 2]]) sampled with one joint block.
  Eigen::Matrix2d cov;
  cov << 1.0, 0.6, 0.6, 2.0;
  const Eigen::Matrix2d prec = cov.inverse();
  const Eigen::Vector2d mu(1.0, -2.0);
  const LogDensity target = [&](const Eigen::VectorXd& x) {
    const Eigen::Vector2d d = x - mu;
    return -0.5 * d.dot(prec * d);
  };
  BlockStructure s{{{0, 1}}};
  ProposalState st = ProposalState::initial(s);
  CounterRng rng(3);
  Eigen::VectorXd th = Eigen::Vector2d::Zero();
  double lp = target(th);
  for (int i = 0; i < 2000; ++i) lp = metropolis_sweep(th, lp, s, st, target, rng);
  std::vector<double> x0, x1;
  for (int i = 0; i < 50000; ++i) {
    lp = metropolis_sweep(th, lp, s, st, target, rng);
    x0.push_back(th[0]);
    x1.push_back(th[1]);
  }
  const double m0 = std::accumulate(x0.begin(), x0.end(), 0.0) / 50000.0;
  const double m1 = std::accumulate(x1.begin(), x1.end(), 0.0) / 50000.0;
  CHECK(std::abs(m0 - 1.0) < 3.0 * batch_se(x0));
  CHECK(std::abs(m1 + 2.0) < 3.0 * batch_se(x1));
}

TEST_CASE("stationary distribution of a 1-D bimodal target") {
  // 0.3 N(-2, 0.5^2) + 0.7 N(1.5, 1) on bins of width 0.25.
  const auto dens = [](double x) {
    const auto n = [](double z, double m, double s) {
      return std::exp(-0.5 * (z - m) * (z - m) / (s * s)) / s;
    };
    return 0.3 * n(x, -2.0, 0.5) + 0.7 * n(x, 1.5, 1.0);
  };
  const LogDensity target = [&](const Eigen::VectorXd& x) { return std::log(dens(x[0])); };
  const double lo = -5.0, width = 0.25;
  const int bins = 44;
  std::vector<double> expected(bins, 0.0);
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    for (int k = 0; k < 100; ++k) {
      expected[b] += dens(lo + width * (b + (k + 0.5) / 100.0));
    }
    total += expected[b];
  }
  for (double& e : expected) e /= total;

  BlockStructure s{{{0}}};
  ProposalState st = ProposalState::initial(s);
  CounterRng rng(4);
  Eigen::VectorXd th = Eigen::VectorXd::Constant(1, 0.0);
  double lp = target(th);
  std::vector<double> hist(bins, 0.0);
  int inside = 0;
  for (int i = 0; i < 1000000; ++i) {
    lp = metropolis_sweep(th, lp, s, st, target, rng);
    const int b = static_cast<int>(std::floor((th[0] - lo) / width));
    if (b >= 0 && b < bins) {
      hist[static_cast<std::size_t>(b)] += 1.0;
      ++inside;
    }
  }
  double tv = 0.0;
  for (int b = 0; b < bins; ++b) tv += std::abs(hist[b] / inside - expected[b]);
  CHECK(0.5 * tv < 0.05);
}

TEST_CASE("tune") {
  CHECK(scale_multiplier(0.35, 0.35) == 1.0);
  CHECK(scale_multiplier(0.9, 0.35) == doctest::Approx(1.7332530178673953));
  CHECK(scale_multiplier(0.0, 3.0) == 0.1);

  BlockStructure s{{{0, 1, 2}}};
  ProposalState st = ProposalState::initial(s);
  st.blocks[0].accepted = 90;
  st.blocks[0].attempted = 100;
  const Eigen::MatrixXd same = Eigen::MatrixXd::Constant(500, 3, 0.4);
  const auto out = tune(st, s, same);
  CHECK(out.blocks[0].scale == doctest::Approx(std::exp(0.55)));
  CHECK(out.blocks[0].cov.isApprox(Eigen::MatrixXd::Identity(3, 3) * kCovarianceJitter));
  CHECK(out.blocks[0].attempted == 0);

  CounterRng rng(5);
  Eigen::MatrixXd draws(4000, 3);
  for (Eigen::Index i = 0; i < draws.rows(); ++i) {
    const double a = rng.normal();
    draws.row(i) << a, 0.5 * a + rng.normal(), 2.0 * rng.normal();
  }
  const auto t2 = tune(ProposalState::initial(s), s, draws);
  CHECK(t2.blocks[0].cov(0, 1) == doctest::Approx(0.5).epsilon(0.1));
  CHECK(t2.blocks[0].cov(2, 2) == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("epoch convergence measure") {
  const Eigen::Vector3d v(1.0, 2.0, 0.5);
  CHECK(epoch_relative_change(v, v) == 0.0);
  CHECK(epoch_relative_change(v, 1.1 * v) == doctest::Approx(0.1));
  CHECK(epoch_relative_change(Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1e-12, 1.0)) ==
        doctest::Approx(0.5));
}

TEST_CASE("posterior summary") {
  Chain c;
  c.names = {"a", "b"};
  c.draws.resize(10000, 2);
  for (int i = 0; i < 10000; ++i) {
    c.draws(i, 0) = i + 1;
    c.draws(i, 1) = -0.7;
  }
  const auto s = posterior_summary(c);
  CHECK(s[0].q025 == doctest::Approx(250.975).epsilon(1e-12));
  CHECK(s[0].q975 == doctest::Approx(9750.025).epsilon(1e-12));
  CHECK(s[0].mean == 5000.5);
  CHECK(s[1].mean == doctest::Approx(-0.7));
  CHECK(s[1].sd < 1e-10);
  CHECK(s[1].q025 == s[1].q975);
  CHECK(s[1].significant);

  Chain empty;
  CHECK_THROWS_AS(posterior_summary(empty), InputError);
}

TEST_CASE("model chains are reproducible and stay in region A") {
  const SimulatedData sim = regarch_simulate(RegarchParams::paper_preset(1), 400, 12);
  const ModelSpec spec{Family::REsCaviarM, 1, 0.025, false};
  const Posterior post(spec, sim.series.returns, sim.series.rm);
  McmcConfig cfg;
  cfg.epoch_len = 400;
  cfg.max_epochs = 2;
  cfg.retain = 300;
  cfg.seed = 99;
  const Chain a = run(post, cfg);
  const Chain b = run(post, cfg);
  CHECK(a.draws == b.draws);
  CHECK(a.log_post == b.log_post);
  CHECK(a.draws.rows() == 300);
  CHECK(a.log_post.size() == 300);
  for (Eigen::Index i = 0; i < a.draws.rows(); ++i) {
    REQUIRE(check_region_A(spec, a.draws.row(i).transpose()));
  }
  cfg.seed = 100;
  CHECK_FALSE(run(post, cfg).draws == a.draws);

  const std::string json = chain_summary_json(a, "hdr");
  CHECK(json.find("\"epochs_used\": 2") != std::string::npos);
  const std::string path = temp_path("chain.csv");
  write_chain_csv(path, a, "# h");
  CHECK(read_text(path).rfind("# h\niter,log_post,omega,beta", 0) == 0);
}

TEST_CASE("sampler handles non-M families") {
  const Sample smp = random_sample(300, 0, 13);
  const ModelSpec spec{Family::EsCaviarAdd, 0, 0.025, false};
  const Posterior post(spec, smp.returns, Eigen::MatrixXd(300, 0));
  McmcConfig cfg;
  cfg.epoch_len = 300;
  cfg.max_epochs = 2;
  cfg.retain = 100;
  const Chain c = run(post, cfg);
  CHECK(c.draws.cols() == 5);
  CHECK(c.final_acceptance.size() == 2);
}
