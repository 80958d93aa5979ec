#include "tailrisk/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "csv_util.hpp"
#include "json.hpp"
#include "tailrisk/backtest.hpp"
#include "tailrisk/data.hpp"
#include "tailrisk/error.hpp"
#include "tailrisk/forecast.hpp"
#include "tailrisk/likelihood.hpp"
#include "tailrisk/mcmc.hpp"
#include "tailrisk/parallel.hpp"
#include "tailrisk/simulate.hpp"
#include "tailrisk/stats.hpp"

namespace tailrisk {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string output_header(const std::string& resolved_config_json, std::uint64_t seed) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a64(resolved_config_json)));
  return std::string("# tailrisk ") + TAILRISK_VERSION + " config=" + hash +
         " seed=" + std::to_string(seed);
}

namespace {

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int jobs = 0;

  std::string data;
  std::string date_col = "date";
  std::string price_col;
  std::string return_col;
  std::vector<std::string> rm_cols;

  std::string model = "REsCaviarM";
  int K = -1;
  double alpha = 0.025;
  bool centered = false;

  std::size_t epoch_len = 20000;
  double var_tol = 0.10;
  int max_epochs = 10;
  std::size_t retain = 10000;

  std::size_t insample = 0;
  std::size_t outsample = 0;
  std::size_t refit_every = 1;

  std::vector<std::string> forecasts;
  std::string losses;
  std::string loss = "quantile";
  double mcs_level = 0.75;
  std::string method = "R";
  int B = 5000;
  int block_len = 10;

  std::string dgp_preset = "paper";
  std::string dgp_json;
  std::vector<std::size_t> n{2000};
  int reps = 10;
  bool emit_data = false;
  bool alpha_override = false;
};

// Options excluded from the resolved config: they do not change results.
bool is_bookkeeping(const std::string& name) {
  return name == "help" || name == "config" || name == "jobs" || name == "out";
}

struct Context {
  const Options& opt;
  Json config;
  std::string config_text;
  std::string header;

  fs::path out(const std::string& file) const { return fs::path(opt.out_dir) / file; }
  int jobs() const { return opt.jobs > 0 ? opt.jobs : default_jobs(); }
  std::string meta() const { return header.substr(2); }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path.string() + " for writing");
  }
  out << text << '\n';
}

void write_json(const fs::path& path, Json j, const Context& ctx) {
  Json wrapped;
  wrapped["_meta"] = ctx.meta();
  for (auto it = j.begin(); it != j.end(); ++it) {
    wrapped[it.key()] = it.value();
  }
  write_text(path, wrapped.dump(2));
}

MarketSeries load_series(const Options& o) {
  if (o.data.empty()) {
    throw InputError("--data is required");
  }
  CsvOptions c;
  c.date_column = o.date_col;
  if (!o.price_col.empty()) {
    c.price_column = o.price_col;
  }
  if (!o.return_col.empty()) {
    c.return_column = o.return_col;
  }
  if (!c.price_column && !c.return_column) {
    c.return_column = "return";
  }
  c.rm_columns = o.rm_cols;
  MarketSeries s = load_market_csv(o.data, c);
  if (!s.volatility_scale) {
    s = to_volatility_scale(std::move(s));
  }
  return s;
}

ModelSpec model_spec(const Options& o, int available_measures) {
  ModelSpec spec;
  spec.family = parse_family(o.model);
  spec.alpha = o.alpha;
  spec.centered_leverage = o.centered;
  if (o.K >= 0) {
    spec.K = o.K;
  } else if (spec.family == Family::REsCaviarM) {
    spec.K = available_measures;
  } else {
    spec.K = spec.family == Family::EsCaviarAdd ? 0 : 1;
  }
  spec.validate();
  if (spec.K > available_measures) {
    throw InputError(spec.label() + " needs " + std::to_string(spec.K) +
                     " realized measures; --rm-cols names " +
                     std::to_string(available_measures));
  }
  return spec;
}

McmcConfig mcmc_config(const Options& o) {
  McmcConfig c;
  c.epoch_len = o.epoch_len;
  c.var_tol = o.var_tol;
  c.max_epochs = o.max_epochs;
  c.retain = o.retain;
  c.seed = o.seed;
  return c;
}

int cmd_validate(const Context& ctx) {
  const MarketSeries s = load_series(ctx.opt);
  s.validate();
  Json j;
  j["name"] = s.name;
  j["rows"] = s.size();
  j["dropped_rows"] = s.dropped_rows;
  j["first_date"] = s.dates.front();
  j["last_date"] = s.dates.back();
  j["measures"] = s.rm_names;
  if (ctx.opt.insample > 0 || ctx.opt.outsample > 0) {
    WindowPlan plan{ctx.opt.insample, ctx.opt.outsample, ctx.opt.refit_every};
    plan.validate(s.size());
    j["windows"] = plan.out_sample;
  }
  write_json(ctx.out("validate.json"), j, ctx);
  std::cout << s.name << ": " << s.size() << " rows (" << s.dropped_rows << " dropped), "
            << s.dates.front() << " to " << s.dates.back() << ", " << s.num_measures()
            << " realized measures\n";
  return kExitOk;
}

int cmd_fit(const Context& ctx) {
  const MarketSeries s = load_series(ctx.opt);
  const ModelSpec spec = model_spec(ctx.opt, s.num_measures());
  const std::span<const double> raw(s.returns);
  const std::vector<double> r = demean(raw, stats::mean(raw));
  const Eigen::MatrixXd rm = s.rm.leftCols(spec.K);
  const Posterior posterior(spec, r, rm);
  const Chain chain = run(posterior, mcmc_config(ctx.opt));
  const ParamVector mean = posterior_mean(chain);

  write_chain_csv(ctx.out("chain.csv").string(), chain, ctx.header);
  Json summary = Json::parse(chain_summary_json(chain));
  summary["model"] = spec.label();
  const LikelihoodResult lr = posterior.evaluate(mean);
  summary["loglik_at_mean"] = lr.valid ? Json(lr.total) : Json(nullptr);
  if (spec.family == Family::REsCaviarM) {
    summary["stationarity_diagnostic"] = stationarity_diagnostic(spec, mean);
  }
  write_json(ctx.out("fit.json"), summary, ctx);
  if (check_region_A(spec, mean)) {
    const RiskPath path = filter_path(spec, mean, posterior.data(), posterior.options());
    write_risk_path_csv(ctx.out("risk_path.csv").string(), s.dates, path, ctx.header);
  }
  std::cout << spec.label() << ": " << chain.epochs_used() << " epochs, "
            << (chain.status == ChainStatus::Converged ? "converged" : "not converged") << '\n';
  return kExitOk;
}

int cmd_forecast(const Context& ctx) {
  const MarketSeries s = load_series(ctx.opt);
  const ModelSpec spec = model_spec(ctx.opt, s.num_measures());
  const WindowPlan plan{ctx.opt.insample, ctx.opt.outsample, ctx.opt.refit_every};
  plan.validate(s.size());
  const ForecastSeries f = rolling_forecast(s, spec, plan, mcmc_config(ctx.opt), ctx.jobs());
  write_forecast_csv(ctx.out("forecasts.csv").string(), f, ctx.header);
  std::cout << spec.label() << ": " << f.size() << " forecasts\n";
  return kExitOk;
}

std::vector<McsMethod> mcs_methods(const std::string& name) {
  if (name == "both") {
    return {McsMethod::R, McsMethod::SQ};
  }
  return {parse_mcs_method(name)};
}

McsConfig mcs_config(const Context& ctx, McsMethod method) {
  McsConfig c;
  c.level = ctx.opt.mcs_level;
  c.method = method;
  c.B = ctx.opt.B;
  c.block_len = ctx.opt.block_len;
  c.seed = ctx.opt.seed;
  c.jobs = ctx.jobs();
  return c;
}

void write_mcs(const Context& ctx, const LossTable& table) {
  for (McsMethod m : mcs_methods(ctx.opt.method)) {
    const McsResult res = mcs(table.losses, table.labels, mcs_config(ctx, m));
    write_text(ctx.out("mcs_" + mcs_method_name(m) + ".json"), res.to_json(ctx.meta()));
    std::cout << "MCS " << mcs_method_name(m) << " survivors:";
    for (int i : res.survivors) {
      std::cout << ' ' << table.labels[static_cast<std::size_t>(i)];
    }
    std::cout << '\n';
  }
}

int cmd_backtest(const Context& ctx) {
  const auto& files = ctx.opt.forecasts;
  if (files.empty()) {
    throw InputError("--forecasts needs at least one file");
  }
  std::vector<ForecastSeries> series;
  std::map<std::string, int> seen;
  for (const auto& f : files) {
    ForecastSeries fs_ = read_forecast_csv(f);
    if (const int k = seen[fs_.label]++; k > 0) {
      fs_.label += "#" + std::to_string(k + 1);
    }
    if (ctx.opt.alpha_override) {
      fs_.alpha = ctx.opt.alpha;
    }
    series.push_back(std::move(fs_));
  }
  const double alpha = series.front().alpha;
  for (const auto& f : series) {
    if (f.alpha != alpha) {
      throw InputError("forecast files disagree on alpha; pass --alpha to override");
    }
    if (f.dates != series.front().dates) {
      throw InputError("forecast files cover different dates");
    }
  }
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw InputError("forecast files carry no valid alpha; pass --alpha");
  }

  const auto m = static_cast<Eigen::Index>(series.front().size());
  const auto M = static_cast<Eigen::Index>(series.size());
  LossTable ql{series.front().dates, {}, Eigen::MatrixXd(m, M)};
  LossTable jl{series.front().dates, {}, Eigen::MatrixXd(m, M)};
  Json summary = Json::array();
  Eigen::MatrixXd avg(2, M);
  std::vector<ViolationRate> vr;
  for (Eigen::Index k = 0; k < M; ++k) {
    const auto& f = series[static_cast<std::size_t>(k)];
    const LossSeries q = quantile_loss(f.realized, f.q_hat, alpha);
    const LossSeries j = joint_loss(f.realized, f.q_hat, f.es_hat, alpha);
    ql.labels.push_back(f.label);
    jl.labels.push_back(f.label);
    ql.losses.col(k) = Eigen::Map<const Eigen::VectorXd>(q.values.data(), m);
    jl.losses.col(k) = Eigen::Map<const Eigen::VectorXd>(j.values.data(), m);
    avg(0, k) = q.average();
    avg(1, k) = j.average();
    vr.push_back(vrate(f.realized, f.q_hat, alpha));
  }
  write_loss_table(ctx.out("quantile_losses.csv").string(), ql, ctx.header);
  write_loss_table(ctx.out("joint_losses.csv").string(), jl, ctx.header);

  const auto q_rank = rank_table(avg.row(0), ql.labels);
  const auto j_rank = rank_table(avg.row(1), jl.labels);
  std::ofstream ranks(ctx.out("ranks.csv"));
  if (!ranks) {
    throw InputError("cannot write ranks.csv");
  }
  ranks << ctx.header << '\n';
  ranks << "model,quantile_loss,joint_loss,vrate,vrate_ratio,quantile_rank,joint_rank\n";
  for (Eigen::Index k = 0; k < M; ++k) {
    const auto i = static_cast<std::size_t>(k);
    ranks << ql.labels[i];
    for (double v : {avg(0, k), avg(1, k), vr[i].rate, vr[i].ratio, q_rank[i], j_rank[i]}) {
      ranks << ',' << csv::format_double(v);
    }
    ranks << '\n';
  }
  write_mcs(ctx, ctx.opt.loss == "joint" ? jl : ql);
  return kExitOk;
}

int cmd_mcs(const Context& ctx) {
  if (ctx.opt.losses.empty()) {
    throw InputError("--losses is required");
  }
  write_mcs(ctx, read_loss_table(ctx.opt.losses));
  return kExitOk;
}

int cmd_simulate(const Context& ctx) {
  const Options& o = ctx.opt;
  RegarchParams dgp;
  if (o.dgp_preset == "paper") {
    dgp = RegarchParams::paper_preset(o.K < 0 ? 1 : o.K);
  } else if (o.dgp_preset == "custom") {
    if (o.dgp_json.empty()) {
      throw InputError("--dgp-preset custom needs --dgp-json");
    }
    std::ifstream in(o.dgp_json);
    if (!in) {
      throw InputError("cannot open " + o.dgp_json);
    }
    std::stringstream text;
    text << in.rdbuf();
    dgp = RegarchParams::from_json(text.str());
  } else {
    throw InputError("--dgp-preset must be 'paper' or 'custom'");
  }
  if (o.emit_data) {
    for (std::size_t n : o.n) {
      SimulatedData sim = regarch_simulate(dgp, n, o.seed);
      MarketSeries s = sim.series;
      s.rm = s.rm.array().square().matrix();
      s.volatility_scale = false;
      write_market_csv(ctx.out("simulated_n" + std::to_string(n) + ".csv").string(), s,
                       ctx.header);
    }
  }
  if (o.reps == 0 && o.emit_data) {
    return kExitOk;
  }
  const RecoveryReport report =
      recovery_study(dgp, o.alpha, o.n, o.reps, o.seed, mcmc_config(o), ctx.jobs());
  write_recovery_csv(ctx.out("recovery.csv").string(), report, ctx.header);
  std::size_t failed = 0;
  for (const auto& r : report.replications) {
    failed += r.ok ? 0 : 1;
  }
  std::cout << "recovery: " << report.replications.size() - failed << " of "
            << report.replications.size() << " replications succeeded\n";
  return kExitOk;
}

// Splices "--key value" tokens from a JSON config file in front of the
// command-line flags, skipping keys the command line sets itself.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty() || args.size() < 2) {
    return args;
  }
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open config file " + path);
  }
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config file " + path + ": " + e.what());
  }
  if (!j.is_object()) {
    throw InputError("config file " + path + " must hold a JSON object");
  }
  const auto on_command_line = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        return true;
      }
    }
    return false;
  };
  const auto token = [](const Json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  std::vector<std::string> out{args[0], args[1]};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "command" || it.key() == "config") {
      continue;
    }
    const std::string flag = "--" + it.key();
    if (on_command_line(flag)) {
      continue;
    }
    const Json& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) {
        out.push_back(flag);
      }
    } else if (v.is_array()) {
      out.push_back(flag);
      for (const auto& e : v) {
        out.push_back(token(e));
      }
    } else if (!v.is_null()) {
      out.push_back(flag);
      out.push_back(token(v));
    }
  }
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

Json resolved_config(const CLI::App* sub) {
  Json j;
  j["command"] = sub->get_name();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || is_bookkeeping(name)) {
      continue;
    }
    const bool given = opt->count() > 0;
    if (opt->get_expected_min() == 0) {
      j[name] = given;
    } else if (opt->get_expected_max() > 1) {
      j[name] = given ? opt->results() : std::vector<std::string>{};
    } else if (given) {
      j[name] = opt->results().back();
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  Options o;
  CLI::App app{"Joint VaR/ES forecasting with realized measures", "tailrisk"};
  app.set_version_flag("--version", std::string(TAILRISK_VERSION));
  app.require_subcommand(1);

  const auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config_path, "JSON file of flag values (flags override it)");
    s->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    s->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    s->add_option("--jobs", o.jobs, "Worker threads (default: TAILRISK_JOBS or all cores)");
  };
  const auto data_opts = [&](CLI::App* s) {
    s->add_option("--data", o.data, "Input CSV");
    s->add_option("--date-col", o.date_col, "Date column")->capture_default_str();
    s->add_option("--price-col", o.price_col, "Close-price column");
    s->add_option("--return-col", o.return_col, "Percentage log-return column (default: return)");
    s->add_option("--rm-cols", o.rm_cols, "Realized-measure columns (variance scale)");
  };
  const auto model_opts = [&](CLI::App* s) {
    s->add_option("--model", o.model,
                  "REsCaviarM, LogREsCaviar, REsCaviar, EsXCaviarX or EsCaviarAdd")
        ->capture_default_str();
    s->add_option("--K", o.K, "Realized measures used (default: all named)");
    s->add_option("--alpha", o.alpha, "Tail level")->capture_default_str();
    s->add_flag("--centered", o.centered, "Center the squared leverage term");
  };
  const auto mcmc_opts = [&](CLI::App* s) {
    s->add_option("--epoch-len", o.epoch_len, "Sweeps per epoch")->capture_default_str();
    s->add_option("--var-tol", o.var_tol, "Epoch variance tolerance")->capture_default_str();
    s->add_option("--max-epochs", o.max_epochs, "Epoch limit")->capture_default_str();
    s->add_option("--retain", o.retain, "Draws kept from the final epoch")->capture_default_str();
  };
  const auto window_opts = [&](CLI::App* s) {
    s->add_option("--insample", o.insample, "In-sample window length T")->capture_default_str();
    s->add_option("--outsample", o.outsample, "Number of forecasts m")->capture_default_str();
    s->add_option("--refit-every", o.refit_every, "Windows between re-estimations")
        ->capture_default_str();
  };
  const auto mcs_opts = [&](CLI::App* s) {
    s->add_option("--mcs-level", o.mcs_level, "Confidence level")->capture_default_str();
    s->add_option("--method", o.method, "R, SQ or both")->capture_default_str();
    s->add_option("--B", o.B, "Bootstrap replicates")->capture_default_str();
    s->add_option("--block-len", o.block_len, "Bootstrap block length")->capture_default_str();
  };

  auto* validate = app.add_subcommand("validate", "Check an input file and window plan");
  common(validate);
  data_opts(validate);
  window_opts(validate);

  auto* fit = app.add_subcommand("fit", "Estimate one model on a full series");
  common(fit);
  data_opts(fit);
  model_opts(fit);
  mcmc_opts(fit);

  auto* forecast = app.add_subcommand("forecast", "Rolling one-step-ahead VaR/ES forecasts");
  common(forecast);
  data_opts(forecast);
  model_opts(forecast);
  mcmc_opts(forecast);
  window_opts(forecast);

  auto* backtest = app.add_subcommand("backtest", "Losses, ranks and MCS for forecast files");
  common(backtest);
  backtest->add_option("--forecasts", o.forecasts, "Forecast CSV files, one per model");
  backtest->add_option("--alpha", o.alpha, "Override the tail level stored in the files");
  backtest->add_option("--loss", o.loss, "Loss for the MCS: quantile or joint")
      ->capture_default_str();
  mcs_opts(backtest);

  auto* mcs_cmd = app.add_subcommand("mcs", "Model confidence set for a loss table");
  common(mcs_cmd);
  mcs_cmd->add_option("--losses", o.losses, "CSV with one loss column per model");
  mcs_opts(mcs_cmd);

  auto* simulate = app.add_subcommand("simulate", "Simulation recovery study");
  common(simulate);
  simulate->add_option("--dgp-preset", o.dgp_preset, "paper or custom")->capture_default_str();
  simulate->add_option("--dgp-json", o.dgp_json, "DGP coefficients for --dgp-preset custom");
  simulate->add_option("--K", o.K, "Measures in the paper preset (1 or 2)");
  simulate->add_option("--alpha", o.alpha, "Tail level")->capture_default_str();
  simulate->add_option("--n", o.n, "Sample sizes")->capture_default_str();
  simulate->add_option("--reps", o.reps, "Replications per sample size")->capture_default_str();
  simulate->add_flag("--emit-data", o.emit_data, "Also write the seed's simulated data set");
  mcmc_opts(simulate);

  try {
    std::vector<std::string> args(argv, argv + argc);
    if (args.size() < 2) {
      std::cerr << app.help();
      return kExitInput;
    }
    args = expand_config(args);
    std::vector<const char*> cargs;
    for (const auto& a : args) {
      cargs.push_back(a.c_str());
    }
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp&) {
      std::cout << app.help();
      return kExitOk;
    } catch (const CLI::CallForVersion&) {
      std::cout << TAILRISK_VERSION << '\n';
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      std::cerr << e.what() << "\n\n" << app.help();
      return kExitInput;
    }

    CLI::App* sub = app.get_subcommands().front();
    const Json config = resolved_config(sub);
    o.alpha_override = sub == backtest && sub->get_option("--alpha")->count() > 0;
    const std::string config_text = config.dump(2);
    Context ctx{o, config, config_text, output_header(config_text, o.seed)};
    fs::create_directories(o.out_dir);
    write_text(ctx.out("config.json"), config_text);

    if (sub == validate) return cmd_validate(ctx);
    if (sub == fit) return cmd_fit(ctx);
    if (sub == forecast) return cmd_forecast(ctx);
    if (sub == backtest) return cmd_backtest(ctx);
    if (sub == mcs_cmd) return cmd_mcs(ctx);
    if (sub == simulate) return cmd_simulate(ctx);
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace tailrisk
