#include <cmath>

#include "doctest.h"
#include "tailrisk/error.hpp"
#include "tailrisk/simulate.hpp"
#include "tailrisk/stats.hpp"
#include "test_support.hpp"

using namespace tailrisk;
using namespace tailrisk::testing;

TEST_CASE("Gaussian alpha constants") {
  const auto c = alpha_constants(0.025);
  CHECK(c.a == doctest::Approx(-1.959964).epsilon(1e-6));
  CHECK(c.b == doctest::Approx(-2.337803).epsilon(1e-6));
  CHECK(c.g == doctest::Approx(0.377839).epsilon(1e-5));
  CHECK(0.05 * c.g == doctest::Approx(0.0189).epsilon(1e-3));
  CHECK(alpha_constants(0.01).a == doctest::Approx(-2.326348).epsilon(1e-6));
  CHECK_THROWS_AS(alpha_constants(0.5), InputError);
  CHECK_THROWS_AS(alpha_constants(0.0), InputError);
  for (double a = 0.001; a < 0.5; a += 0.007) {
    const auto k = alpha_constants(a);
    CHECK(k.b < k.a);
    CHECK(k.a < 0.0);
    CHECK(k.g > 0.0);
  }
}

TEST_CASE("degenerate DGP has unit volatility") {
  RegarchParams p = RegarchParams::paper_preset(1);
  p.omega = 0.0;
  p.tau1 = p.tau2 = 0.0;
  p.gamma.setZero();
  const auto sim = regarch_simulate(p, 20000, 3);
  for (double s : sim.sigma) REQUIRE(s == 1.0);
  CHECK(stats::mean(sim.series.returns) == doctest::Approx(0.0).epsilon(0.03));
  CHECK(stats::variance(sim.series.returns) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("log volatility variance matches the AR(1) closed form") {
  const RegarchParams p = RegarchParams::paper_preset(1);
  const double innov = p.tau1 * p.tau1 + 2.0 * p.tau2 * p.tau2 +
                       p.gamma[0] * p.gamma[0] * p.sigma_u(0, 0);
  const double closed = innov / (1.0 - p.beta * p.beta);
  CHECK(closed == doctest::Approx(0.0764).epsilon(1e-3));
  const auto sim = regarch_simulate(p, 100000, 17);
  std::vector<double> logs;
  for (double s : sim.sigma) logs.push_back(std::log(s));
  CHECK(std::abs(stats::variance(logs) / closed - 1.0) < 0.05);
  CHECK(stats::mean(logs) == doctest::Approx(p.omega / (1.0 - p.beta)).epsilon(0.05));
}

TEST_CASE("simulation is seed deterministic") {
  const auto p = RegarchParams::paper_preset(2);
  const auto a = regarch_simulate(p, 500, 8);
  const auto b = regarch_simulate(p, 500, 8);
  CHECK(a.series.returns == b.series.returns);
  CHECK(a.series.rm == b.series.rm);
  CHECK(a.sigma == b.sigma);
  CHECK(a.series.dates.front() == "2000-01-03");
  CHECK(a.series.dates[5] == "2000-01-10");
  CHECK(regarch_simulate(p, 500, 9).series.returns != a.series.returns);
}

TEST_CASE("DGP validation and JSON") {
  RegarchParams p = RegarchParams::paper_preset(1);
  p.beta = 1.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = RegarchParams::paper_preset(1);
  p.sigma_u(0, 0) = -1.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  CHECK_THROWS_AS(RegarchParams::paper_preset(3), InputError);

  const auto q = RegarchParams::paper_preset(2);
  const auto back = RegarchParams::from_json(q.to_json());
  CHECK(back.gamma == q.gamma);
  CHECK(back.sigma_u == q.sigma_u);
  CHECK(back.tau1 == q.tau1);
  CHECK_THROWS_AS(RegarchParams::from_json("{\"omega\": 1}"), InputError);
  CHECK_THROWS_AS(RegarchParams::from_json("not json"), InputError);
}

TEST_CASE("mapping to the semi-parametric model") {
  const auto p = RegarchParams::paper_preset(1);
  const auto th = map_true_params(p, 0.025, true);
  const double table[] = {0.1509, 0.85,    0.2352, 0.1537, 0.2,  -0.5056,
                          0.9,    -0.0392, 0.0768, 0.0189, 0.85, 0.0756};
  for (int i = 0; i < 12; ++i) {
    CAPTURE(i);
    CHECK(std::abs(th[i] - table[i]) < 6e-5);
  }

  const auto un = map_true_params(p, 0.025, false);
  const MLayout L{1};
  CHECK(th[MLayout::omega] - un[MLayout::omega] == doctest::Approx(p.tau2).epsilon(1e-14));
  CHECK(th[L.xi(0)] - un[L.xi(0)] == doctest::Approx(p.delta2[0]).epsilon(1e-14));
  for (int i = 0; i < 12; ++i) {
    if (i != MLayout::omega && i != L.xi(0)) CHECK(th[i] == un[i]);
  }

  RegarchParams z = p;
  z.tau1 = 0.0;
  for (double alpha : {0.01, 0.025, 0.1}) {
    CHECK(map_true_params(z, alpha, true)[MLayout::tau1] == 0.0);
  }
}

TEST_CASE("recovery study bookkeeping") {
  McmcConfig c;
  c.epoch_len = 200;
  c.max_epochs = 2;
  c.retain = 100;
  const auto rep = recovery_study(RegarchParams::paper_preset(1), 0.025, {300}, 10, 5, c, 2);
  CHECK(rep.replications.size() == 10);
  CHECK(rep.rows.size() == 14);
  CHECK(rep.rows[1].parameter == "beta");
  CHECK(rep.rows[1].true_value == 0.85);
  CHECK(rep.rows.back().parameter == "ES_next");
  CHECK_FALSE(rep.rows[9].gated);
  CHECK(rep.rows[8].gated);

  const auto again = recovery_study(RegarchParams::paper_preset(1), 0.025, {300}, 10, 5, c, 1);
  CHECK(again.rows[1].mean == rep.rows[1].mean);

  const std::string path = temp_path("recovery.csv");
  write_recovery_csv(path, rep, "# h");
  CHECK(read_text(path).rfind("# h\nn,parameter,true,mean,rmse\n300,omega,", 0) == 0);
  CHECK_THROWS_AS(recovery_study(RegarchParams::paper_preset(1), 0.025, {300}, 9, 5, c),
                  InputError);
}

TEST_CASE("less measurement noise sharpens the measurement equation") {
  McmcConfig c;
  c.epoch_len = 1500;
  c.max_epochs = 3;
  c.retain = 1000;
  RegarchParams quiet = RegarchParams::paper_preset(1);
  quiet.sigma_u(0, 0) = 1e-6;
  const auto base = recovery_study(RegarchParams::paper_preset(1), 0.025, {800}, 10, 40, c);
  const auto sharp = recovery_study(quiet, 0.025, {800}, 10, 40, c);
  const MLayout L{1};
  for (int p : {L.xi(0), L.phi(0)}) {
    CAPTURE(p);
    CHECK(sharp.rows[static_cast<std::size_t>(p)].rmse < base.rows[static_cast<std::size_t>(p)].rmse);
  }
}
