#include <cmath>

#include "doctest.h"
#include "tailrisk/error.hpp"
#include "tailrisk/forecast.hpp"
#include "tailrisk/simulate.hpp"
#include "tailrisk/stats.hpp"
#include "test_support.hpp"

using namespace tailrisk;
using namespace tailrisk::testing;

namespace {

const ModelSpec kM1{Family::REsCaviarM, 1, 0.025, false};
const MLayout L{1};

McmcConfig quick_config(std::uint64_t seed) {
  McmcConfig c;
  c.epoch_len = 300;
  c.max_epochs = 2;
  c.retain = 200;
  c.seed = seed;
  return c;
}

MarketSeries simulated_series(std::size_t n, std::uint64_t seed) {
  return regarch_simulate(RegarchParams::paper_preset(1), n, seed).series;
}

}  // namespace

TEST_CASE("persistence limit") {
  const Sample smp = random_sample(100, 1, 1);
  ParamVector th = zero_theta(kM1);
  th[L.beta] = 0.999999999;
  FilterOptions o;
  o.init = InitState{-1.5, 0.0, 0.0, {}};
  const auto p = filter_path(kM1, th, smp.returns, smp.rm, o);
  const auto f = one_step_forecast(kM1, th, smp.returns, smp.rm, o);
  CHECK(f.q == doctest::Approx(p.Q.back()).epsilon(1e-8));
  CHECK(f.es == f.q);
}

TEST_CASE("one-step hand case") {
  // Last filtered day has log(-Q_T) = 0 and eps_T = 0.5: r_T = -0.5 with Q_T = -1.
  ParamVector th = zero_theta(kM1);
  th[L.omega] = 0.05;
  th[L.beta] = 0.85;
  th[L.tau1] = 0.1;
  th[L.nu0()] = 0.1;
  // omega + beta * log(-Q_{T-1}) = 0 gives log(-Q_T) = 0 from a first-day forecast.
  const double lq0 = -0.05 / 0.85;
  FilterOptions o;
  o.init = InitState{-std::exp(lq0), 0.7, 0.0, {}};
  const std::vector<double> r{-0.5};
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const auto p = filter_path(kM1, th, r, x, o);
  REQUIRE(p.Q[0] == doctest::Approx(-1.0).epsilon(1e-15));
  const auto f = one_step_forecast(kM1, th, r, x, o);
  CHECK(f.q == doctest::Approx(-std::exp(0.1)).epsilon(1e-14));
  CHECK(f.es == doctest::Approx(f.q - 0.1).epsilon(1e-14));
}

TEST_CASE("gap intercept moves ES only") {
  const Sample smp = random_sample(300, 1, 2);
  ParamVector th = zero_theta(kM1);
  th[L.omega] = 0.02;
  th[L.beta] = 0.9;
  th[L.gamma(0)] = 0.1;
  th[L.nu1()] = 0.5;
  th[L.psi(0)] = 0.1;
  double prev_es = 0.0;
  double q = 0.0;
  for (int k = 0; k <= 5; ++k) {
    th[L.nu0()] = 0.05 * k;
    const auto f = one_step_forecast(kM1, th, smp.returns, smp.rm);
    if (k > 0) {
      CHECK(f.q == q);
      CHECK(f.es <= prev_es);
    }
    q = f.q;
    prev_es = f.es;
  }
}

TEST_CASE("REGARCH volatility oracle") {
  const RegarchParams dgp = RegarchParams::paper_preset(1);
  const auto sim = regarch_simulate(dgp, 1000, 5);
  const AlphaConstants c = alpha_constants(0.025);
  const ModelSpec spec{Family::REsCaviarM, 1, 0.025, true};
  FilterOptions o;
  o.fixed_e2 = 1.0 / (c.a * c.a);
  o.init = exact_init(sim, 0.025);
  const auto f = one_step_forecast(spec, map_true_params(dgp, 0.025, true), sim.series.returns,
                                   sim.series.rm, o);
  CHECK(std::abs(f.q - c.a * sim.sigma_next) / std::abs(c.a * sim.sigma_next) < 1e-10);
}

TEST_CASE("no look-ahead") {
  const MarketSeries s = simulated_series(400, 6);
  ParamVector th = zero_theta(kM1);
  th[L.omega] = 0.03;
  th[L.beta] = 0.9;
  th[L.gamma(0)] = 0.2;
  th[L.phi(0)] = 0.8;
  th[L.nu0()] = 0.05;
  const std::span<const double> head(s.returns.data(), 300);
  const auto f = one_step_forecast(kM1, th, head, s.rm.topRows(300));
  std::vector<double> garbage(s.returns.begin(), s.returns.begin() + 300);
  Eigen::MatrixXd gx = s.rm.topRows(300);
  for (int i = 0; i < 100; ++i) {
    garbage.push_back(1e3);
  }
  const auto g = filter_path(kM1, th, std::span<const double>(garbage).first(300),
                             gx.topRows(300));
  CHECK(g.q_next == f.q);
  CHECK(g.q_next - g.omega_next == f.es);
}

TEST_CASE("rolling forecast schedule") {
  const MarketSeries s = simulated_series(300, 7);

  SUBCASE("single window equals the fitted one-step forecast") {
    const auto fs = rolling_forecast(s, kM1, {260, 1, 1}, quick_config(3));
    REQUIRE(fs.size() == 1);
    CHECK(fs.refitted[0]);
    const std::span<const double> raw(s.returns.data(), 260);
    const double mean = stats::mean(raw);
    const auto w = demean(raw, mean);
    const Posterior post(kM1, w, s.rm.topRows(260));
    const auto th = posterior_mean(run(post, quick_config(3)));
    const auto f = one_step_forecast(kM1, th, w, s.rm.topRows(260));
    CHECK(fs.q_hat[0] == f.q);
    CHECK(fs.es_hat[0] == f.es);
    CHECK(fs.realized[0] == s.returns[260] - mean);
    CHECK(fs.dates[0] == s.dates[260]);
  }

  SUBCASE("refit once for the whole horizon") {
    const auto fs = rolling_forecast(s, kM1, {260, 8, 8}, quick_config(3));
    CHECK(fs.size() == 8);
    int refits = 0;
    for (bool r : fs.refitted) refits += r ? 1 : 0;
    CHECK(refits == 1);
  }

  SUBCASE("parallel equals serial") {
    const WindowPlan plan{260, 6, 2};
    const auto a = rolling_forecast(s, kM1, plan, quick_config(4), 1);
    const auto b = rolling_forecast(s, kM1, plan, quick_config(4), 3);
    CHECK(a.q_hat == b.q_hat);
    CHECK(a.es_hat == b.es_hat);
  }

  SUBCASE("variance-scale input is rejected") {
    MarketSeries v = s;
    v.volatility_scale = false;
    CHECK_THROWS_AS(rolling_forecast(v, kM1, {260, 1, 1}, quick_config(1)), InputError);
  }
}

TEST_CASE("desk-scale run keeps forecasts ordered") {
  const MarketSeries s = simulated_series(1050, 8);
  McmcConfig c = quick_config(5);
  c.epoch_len = 1000;
  c.retain = 500;
  const auto fs = rolling_forecast(s, kM1, {1000, 50, 25}, c);
  REQUIRE(fs.size() == 50);
  for (std::size_t t = 0; t < 50; ++t) {
    CHECK(fs.es_hat[t] < fs.q_hat[t]);
    CHECK(fs.q_hat[t] < 0.0);
  }
  CHECK_NOTHROW(fs.validate());

  const std::string path = temp_path("forecasts.csv");
  write_forecast_csv(path, fs, "# hdr");
  const auto back = read_forecast_csv(path);
  CHECK(back.q_hat == fs.q_hat);
  CHECK(back.es_hat == fs.es_hat);
  CHECK(back.realized == fs.realized);
  CHECK(back.refitted == fs.refitted);
  CHECK(back.alpha == fs.alpha);
  CHECK(back.label == fs.label);
}
