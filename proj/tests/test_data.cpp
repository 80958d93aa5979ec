#include <cmath>

#include "doctest.h"
#include "tailrisk/data.hpp"
#include "tailrisk/error.hpp"
#include "test_support.hpp"

using namespace tailrisk;
using namespace tailrisk::testing;

namespace {

MarketSeries load_prices(const std::string& body) {
  const std::string path = temp_path("prices.csv");
  write_text(path, body);
  CsvOptions o;
  o.price_column = "close";
  o.rm_columns = {"rv"};
  return load_market_csv(path, o);
}

}  // namespace

TEST_CASE("log returns from prices") {
  auto flat = load_prices("date,close,rv\n2020-01-02,100,1\n2020-01-03,100,1\n");
  REQUIRE(flat.size() == 1);
  CHECK(flat.returns[0] == 0.0);

  auto up = load_prices("date,close,rv\n2020-01-02,100,1\n2020-01-03,101,1\n");
  CHECK(up.returns[0] == doctest::Approx(0.995033085316809).epsilon(1e-14));
  CHECK(up.dates[0] == "2020-01-03");
}

TEST_CASE("missing rows are dropped and counted") {
  auto s = load_prices(
      "date,close,rv\n2020-01-02,100,1\n2020-01-03,,1\n2020-01-06,101,NA\n2020-01-07,102,2\n");
  CHECK(s.dropped_rows == 2);
  REQUIRE(s.size() == 1);
  CHECK(s.returns[0] == doctest::Approx(100.0 * std::log(1.02)));
}

TEST_CASE("loader errors") {
  CHECK_THROWS_AS(load_prices("date,close,rv\n2020/01/02,100,1\n2020-01-03,100,1\n"), InputError);
  CHECK_THROWS_AS(load_prices("date,close,rv\n2020-01-02,100,-1\n2020-01-03,100,1\n"), InputError);
  CHECK_THROWS_AS(load_prices("date,close,rv\n2020-01-02,100,1\n"), InputError);
  CHECK_THROWS_AS(load_prices("date,close\n2020-01-02,100\n2020-01-03,100\n"), InputError);
  CHECK_THROWS_AS(load_prices("date,close,rv\n2020-01-03,100,1\n2020-01-02,100,1\n2020-01-06,1,1\n"),
                  InputError);
}

TEST_CASE("volatility scale") {
  MarketSeries s;
  s.dates = {"2020-01-02"};
  s.returns = {0.1};
  s.rm = Eigen::MatrixXd(1, 2);
  s.rm << 1.21, 0.25;
  s.rm_names = {"a", "b"};
  auto v = to_volatility_scale(s);
  CHECK(v.rm(0, 0) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(v.rm(0, 1) == 0.5);
  CHECK_THROWS_AS(to_volatility_scale(v), InputError);

  s.rm << 4.0, 0.0;
  v = to_volatility_scale(s);
  CHECK(v.rm(0, 0) == 2.0);
  CHECK(v.rm(0, 1) == 0.0);
}

TEST_CASE("squaring then converting is the identity") {
  const Sample smp = random_sample(200, 3, 11);
  MarketSeries s;
  for (std::size_t t = 0; t < 200; ++t) {
    s.dates.push_back("2001-01-01");
  }
  s.returns = smp.returns;
  s.rm = smp.rm.array().square().matrix();
  const auto v = to_volatility_scale(s);
  CHECK((v.rm - smp.rm).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("demean") {
  CHECK(demean(std::vector<double>{1, -1}, 0.0) == std::vector<double>{1, -1});
  CHECK(demean(std::vector<double>{2, 4}, 3.0) == std::vector<double>{-1, 1});
  const auto d = demean(std::vector<double>{0.5, 0.7, 0.9}, 0.7);
  CHECK(d[0] == doctest::Approx(-0.2));
  CHECK(std::abs(d[1]) < 1e-15);
  CHECK(d[2] == doctest::Approx(0.2));

  const Sample smp = random_sample(500, 0, 3);
  double m = 0.0;
  for (double r : smp.returns) m += r;
  m /= 500.0;
  double after = 0.0;
  for (double r : demean(smp.returns, m)) after += r;
  CHECK(std::abs(after / 500.0) < 1e-12);
}

TEST_CASE("rolling windows") {
  const auto w = rolling_windows(10, {8, 2, 1});
  REQUIRE(w.size() == 2);
  CHECK(w[0].begin == 0);
  CHECK(w[0].end == 8);
  CHECK(w[0].target == 8);
  CHECK(w[1].begin == 1);
  CHECK(w[1].target == 9);
  CHECK_THROWS_AS(rolling_windows(5, {5, 1, 1}), InputError);

  const WindowPlan spx{3008, 2626, 1};
  const auto all = rolling_windows(5634, spx);
  CHECK(all.size() == 2626);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].end - all[i].begin == 3008);
    CHECK(all[i].target == i + 3008);
  }
  CHECK_NOTHROW(spx.validate(5634));
  CHECK_THROWS_AS((WindowPlan{100, 10, 1}.validate(500)), InputError);

  const auto sparse = rolling_windows(20, {10, 10, 4});
  int refits = 0;
  for (const auto& x : sparse) refits += x.refit ? 1 : 0;
  CHECK(refits == 3);
}

TEST_CASE("csv round trip is bit exact") {
  const Sample smp = random_sample(50, 2, 5);
  MarketSeries s;
  s.name = "rt";
  for (int d = 1; d <= 50; ++d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "2020-%02d-%02d", 1 + (d - 1) / 28, 1 + (d - 1) % 28);
    s.dates.push_back(buf);
  }
  s.returns = smp.returns;
  s.rm = smp.rm;
  s.rm_names = {"RV5", "BV"};
  const std::string path = temp_path("roundtrip.csv");
  write_market_csv(path, s);
  CsvOptions o;
  o.return_column = "return";
  o.rm_columns = s.rm_names;
  const auto back = load_market_csv(path, o);
  CHECK(back.name == "rt");
  CHECK(back.dates == s.dates);
  CHECK(back.returns == s.returns);
  CHECK(back.rm == s.rm);
  CHECK(back.rm_names == s.rm_names);
  CHECK(back.volatility_scale == s.volatility_scale);
}
