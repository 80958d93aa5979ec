#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tailrisk/backtest.hpp"
#include "tailrisk/data.hpp"
#include "tailrisk/error.hpp"
#include "tailrisk/forecast.hpp"
#include "tailrisk/likelihood.hpp"
#include "tailrisk/mcmc.hpp"
#include "tailrisk/model.hpp"
#include "tailrisk/simulate.hpp"

namespace py = pybind11;
using namespace tailrisk;

namespace {

ModelSpec make_spec(const std::string& family, int K, double alpha, bool centered) {
  ModelSpec spec{parse_family(family), K, alpha, centered};
  spec.validate();
  return spec;
}

py::dict path_dict(const RiskPath& p) {
  py::dict d;
  d["Q"] = p.Q;
  d["omega"] = p.omega;
  d["ES"] = p.ES;
  d["eps"] = p.eps;
  d["U"] = p.U;
  d["finite"] = p.finite;
  d["q_next"] = p.q_next;
  d["omega_next"] = p.omega_next;
  return d;
}

FilterOptions filter_options(std::optional<double> fixed_e2) {
  FilterOptions o;
  o.fixed_e2 = fixed_e2;
  return o;
}

}  // namespace

PYBIND11_MODULE(_tailrisk, m) {
  m.doc() = "Joint VaR/ES forecasting with realized measures";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init(&make_spec), py::arg("family") = "REsCaviarM", py::arg("K") = 1,
           py::arg("alpha") = 0.025, py::arg("centered") = false)
      .def_property_readonly("family", [](const ModelSpec& s) { return std::string(family_name(s.family)); })
      .def_readonly("K", &ModelSpec::K)
      .def_readonly("alpha", &ModelSpec::alpha)
      .def_readonly("centered", &ModelSpec::centered_leverage)
      .def_property_readonly("label", &ModelSpec::label)
      .def_property_readonly("param_names", [](const ModelSpec& s) { return param_names(s); })
      .def("__repr__", [](const ModelSpec& s) { return "ModelSpec(" + s.label() + ")"; });

  py::class_<MarketSeries>(m, "MarketSeries")
      .def_readonly("name", &MarketSeries::name)
      .def_readonly("dates", &MarketSeries::dates)
      .def_readonly("returns", &MarketSeries::returns)
      .def_readonly("rm", &MarketSeries::rm)
      .def_readonly("rm_names", &MarketSeries::rm_names)
      .def_readonly("volatility_scale", &MarketSeries::volatility_scale)
      .def_readonly("dropped_rows", &MarketSeries::dropped_rows)
      .def("__len__", &MarketSeries::size);

  m.def(
      "load_market_csv",
      [](const std::string& path, const std::vector<std::string>& rm_columns,
         std::optional<std::string> price_column, std::optional<std::string> return_column,
         const std::string& date_column) {
        CsvOptions o;
        o.rm_columns = rm_columns;
        o.price_column = std::move(price_column);
        o.return_column = std::move(return_column);
        if (!o.price_column && !o.return_column) {
          o.return_column = "return";
        }
        o.date_column = date_column;
        return load_market_csv(path, o);
      },
      py::arg("path"), py::arg("rm_columns"), py::arg("price_column") = py::none(),
      py::arg("return_column") = py::none(), py::arg("date_column") = "date");
  m.def("to_volatility_scale", &to_volatility_scale, py::arg("series"));

  m.def(
      "filter_path",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const std::vector<double>& returns,
         const Eigen::MatrixXd& rm_vol, std::optional<double> fixed_e2) {
        return path_dict(filter_path(spec, theta, returns, rm_vol, filter_options(fixed_e2)));
      },
      py::arg("spec"), py::arg("theta"), py::arg("returns"), py::arg("rm_vol"),
      py::arg("fixed_e2") = py::none());

  m.def(
      "integrated_loglik",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const std::vector<double>& returns,
         const Eigen::MatrixXd& rm_vol) {
        const Posterior post(spec, returns, rm_vol);
        return post.evaluate(theta).total;
      },
      py::arg("spec"), py::arg("theta"), py::arg("returns"), py::arg("rm_vol"));

  m.def(
      "fit",
      [](const ModelSpec& spec, const std::vector<double>& returns, const Eigen::MatrixXd& rm_vol,
         std::uint64_t seed, std::size_t epoch_len, int max_epochs, std::size_t retain,
         double var_tol) {
        const Posterior post(spec, returns, rm_vol);
        McmcConfig c;
        c.seed = seed;
        c.epoch_len = epoch_len;
        c.max_epochs = max_epochs;
        c.retain = retain;
        c.var_tol = var_tol;
        Chain chain;
        {
          py::gil_scoped_release release;
          chain = run(post, c);
        }
        py::dict d;
        d["names"] = chain.names;
        d["draws"] = chain.draws;
        d["log_post"] = chain.log_post;
        d["acceptance"] = chain.final_acceptance;
        d["epochs"] = chain.epochs_used();
        d["converged"] = chain.status == ChainStatus::Converged;
        d["mean"] = posterior_mean(chain);
        return d;
      },
      py::arg("spec"), py::arg("returns"), py::arg("rm_vol"), py::arg("seed") = 0,
      py::arg("epoch_len") = 20000, py::arg("max_epochs") = 10, py::arg("retain") = 10000,
      py::arg("var_tol") = 0.10);

  m.def(
      "one_step_forecast",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const std::vector<double>& returns,
         const Eigen::MatrixXd& rm_vol) {
        const RiskForecast f = one_step_forecast(spec, theta, returns, rm_vol);
        return py::make_tuple(f.q, f.es);
      },
      py::arg("spec"), py::arg("theta"), py::arg("returns"), py::arg("rm_vol"));

  m.def(
      "quantile_loss",
      [](const std::vector<double>& r, const std::vector<double>& q, double alpha) {
        return quantile_loss(r, q, alpha).values;
      },
      py::arg("realized"), py::arg("q_hat"), py::arg("alpha"));
  m.def(
      "joint_loss",
      [](const std::vector<double>& r, const std::vector<double>& q, const std::vector<double>& es,
         double alpha) { return joint_loss(r, q, es, alpha).values; },
      py::arg("realized"), py::arg("q_hat"), py::arg("es_hat"), py::arg("alpha"));
  m.def(
      "vrate",
      [](const std::vector<double>& r, const std::vector<double>& q, double alpha) {
        return vrate(r, q, alpha).rate;
      },
      py::arg("realized"), py::arg("q_hat"), py::arg("alpha"));

  m.def(
      "mcs",
      [](const Eigen::MatrixXd& losses, const std::vector<std::string>& labels, double level,
         const std::string& method, int B, int block_len, std::uint64_t seed) {
        McsConfig c;
        c.level = level;
        c.method = parse_mcs_method(method);
        c.B = B;
        c.block_len = block_len;
        c.seed = seed;
        const McsResult r = mcs(losses, labels, c);
        py::dict d;
        std::vector<std::string> survivors;
        for (int i : r.survivors) {
          survivors.push_back(labels[static_cast<std::size_t>(i)]);
        }
        d["survivors"] = survivors;
        d["elimination_order"] = r.elimination_order;
        d["p_values"] = r.p_values;
        return d;
      },
      py::arg("losses"), py::arg("labels"), py::arg("level") = 0.75, py::arg("method") = "R",
      py::arg("B") = 5000, py::arg("block_len") = 10, py::arg("seed") = 0);
  m.def("rank_table", &rank_table, py::arg("avg_losses"), py::arg("labels"));

  m.def(
      "alpha_constants",
      [](double alpha) {
        const AlphaConstants c = alpha_constants(alpha);
        return py::make_tuple(c.a, c.b, c.g);
      },
      py::arg("alpha"));
  m.def(
      "simulate_regarch",
      [](std::size_t n, std::uint64_t seed, int K) {
        const SimulatedData sim = regarch_simulate(RegarchParams::paper_preset(K), n, seed);
        py::dict d;
        d["returns"] = sim.series.returns;
        d["rm_vol"] = sim.series.rm;
        d["sigma"] = sim.sigma;
        d["sigma_next"] = sim.sigma_next;
        return d;
      },
      py::arg("n"), py::arg("seed") = 0, py::arg("K") = 1);
  m.def(
      "map_true_params",
      [](double alpha, bool centered, int K) {
        return map_true_params(RegarchParams::paper_preset(K), alpha, centered);
      },
      py::arg("alpha"), py::arg("centered") = true, py::arg("K") = 1);
}
