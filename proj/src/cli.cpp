#include "qcoll/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <json.hpp>
#include <map>
#include <ostream>
#include <sstream>

#include "qcoll/errors.hpp"
#include "qcoll/local_drift.hpp"
#include "qcoll/market_io.hpp"
#include "qcoll/oracles.hpp"
#include "qcoll/quanto_pricer.hpp"

namespace qcoll::cli {

namespace {

const double kNaN = std::nan("");

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<double> absolute_strikes(const RunConfig& config, double spot) {
  std::vector<double> out;
  for (double k : config.strikes) out.push_back(config.absolute_strikes ? k : spot * k / 100.0);
  return out;
}

// Implied vol for reporting; prices outside the no-arbitrage band show as nan.
double reported_vol(double undiscounted, double fwd, double K, double T) {
  try {
    return implied_vol_of(undiscounted, fwd, K, T);
  } catch (const DomainError&) {
    return kNaN;
  }
}

// Runs `f(i)` for every maturity index, fanned out when requested. Results
// keep maturity order so output does not depend on scheduling.
template <class F>
auto for_maturities(const RunConfig& config, const F& f) {
  using Rows = decltype(f(std::size_t{0}));
  std::vector<Rows> parts(config.maturities.size());
  if (config.parallel && config.maturities.size() > 1) {
    std::vector<std::future<Rows>> futures;
    for (std::size_t i = 0; i < config.maturities.size(); ++i)
      futures.push_back(std::async(std::launch::async, f, i));
    for (std::size_t i = 0; i < futures.size(); ++i) parts[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < config.maturities.size(); ++i) parts[i] = f(i);
  }
  return parts;
}

std::vector<std::vector<double>> price_maturity(const RunConfig& config, const Market& m, double T) {
  const std::vector<double> strikes = absolute_strikes(config, m.setup.spot_S);
  const QuantoContext ctx = build_context(m.setup, m.equity, m.fx, T, {config.n1, config.n2});
  const std::vector<QuantoQuote> quotes = price_strikes(ctx, strikes);
  const double bd = m.setup.domestic_discount(T);
  const double bf = m.setup.foreign_discount(T);
  const double fq = quanto_forward(ctx);

  std::optional<CopulaOracle> copula;
  std::vector<McEstimate> mc;
  if (config.oracle == OracleKind::Copula) copula.emplace(m.setup, m.equity, m.fx, T);
  if (config.oracle == OracleKind::Mc) {
    McSpec spec;
    spec.paths = config.mc_paths;
    spec.seed = config.seed;
    mc = mc_quanto_prices(m.setup, m.equity, m.fx, T, strikes, spec);
  }

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    const QuantoQuote& q = quotes[i];
    const double K = q.strike;
    const double iv = reported_vol(q.quanto_call / bd, fq, K, T);
    std::vector<double> row{T,
                            K,
                            q.quanto_call,
                            q.vanilla_call,
                            bf * q.spread.value / m.setup.spot_X,
                            iv,
                            m.equity.implied_vol(K, T),
                            adhoc_quanto_price(m.setup, m.equity, m.fx, T, K)};
    if (copula) {
      const OracleValue o = copula->quanto_price(K);
      const double oiv = reported_vol(o.value / bd, copula->quanto_forward(), K, T);
      row.insert(row.end(), {o.value, oiv, 100.0 * (iv - oiv), o.error_estimate});
    } else if (!mc.empty()) {
      const McEstimate& e = mc[i];
      const double z = e.std_error > 0.0 ? (q.quanto_call - e.price) / e.std_error : 0.0;
      row.insert(row.end(), {e.price, e.std_error, z});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> bench_maturities(std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(n == 1 ? 1.0 : 0.5 + 4.5 * i / (n - 1.0));
  return out;
}

std::vector<double> bench_strikes(double spot, std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(spot * (n == 1 ? 1.0 : 0.6 + 0.8 * i / (n - 1.0)));
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void RunConfig::validate() const {
  if (n1 < kMinCollocationOrder || n1 > kMaxCollocationOrder || n2 < kMinCollocationOrder ||
      n2 > kMaxCollocationOrder)
    throw InputError("--n1/--n2 must lie in [2, 16]");
  if (nt < 2 || nt > 10) throw InputError("--nt must lie in [2, 10]");
  if (command != "bench" && market_path.empty()) throw InputError("--market is required");
  if ((command == "price" || command == "drift-grid") && (maturities.empty() || strikes.empty()))
    throw InputError(command + " needs non-empty --maturities and --strikes");
  if (command == "calibrate-rho") {
    if (maturities.size() != 1) throw InputError("calibrate-rho needs exactly one maturity");
    if (!target) throw InputError("calibrate-rho needs --target");
  }
  for (double T : maturities)
    if (!(T > 0.0) || !std::isfinite(T)) throw InputError("maturities must be positive");
  for (double K : strikes)
    if (!(K > 0.0) || !std::isfinite(K)) throw InputError("strikes must be positive");
  if (command == "bench" && reps < 10) throw InputError("bench needs --reps >= 10");
  if (mc_paths < 1024) throw InputError("--paths must be at least 1024");
}

void write_csv(const Table& table, std::ostream& out) {
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

void write_json(const Table& table, std::ostream& out) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (double v : row) r.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
    rows.push_back(std::move(r));
  }
  out << nlohmann::json{{"columns", table.columns}, {"rows", rows}}.dump(2) << '\n';
}

Table cmd_price(const RunConfig& config) {
  config.validate();
  const Market m = load_market(config.market_path);
  Table table;
  table.columns = {"T", "K", "quanto_call", "vanilla_call", "spread", "iv_quanto", "iv_adhoc", "adhoc_call"};
  if (config.oracle == OracleKind::Copula)
    table.columns.insert(table.columns.end(), {"oracle_call", "oracle_iv", "iv_diff_pts", "oracle_error"});
  if (config.oracle == OracleKind::Mc)
    table.columns.insert(table.columns.end(), {"mc_call", "mc_stderr", "mc_z"});
  auto parts = for_maturities(config, [&](std::size_t i) { return price_maturity(config, m, config.maturities[i]); });
  for (auto& part : parts)
    for (auto& row : part) table.rows.push_back(std::move(row));
  return table;
}

Table cmd_calibrate_rho(const RunConfig& config) {
  config.validate();
  const Market m = load_market(config.market_path);
  const double T = config.maturities.front();
  const CorrelationFit fit =
      implied_correlation(m.setup, m.equity, m.fx, T, *config.target, {config.n1, config.n2});
  return {{"T", "target", "rho", "residual", "iterations"},
          {{T, *config.target, fit.rho, fit.residual, static_cast<double>(fit.iterations)}}};
}

Table cmd_drift_grid(const RunConfig& config) {
  config.validate();
  const Market m = load_market(config.market_path);
  const std::vector<double> levels = absolute_strikes(config, m.setup.spot_S);
  const bool with_oracle = config.oracle == OracleKind::Copula;

  Table table;
  table.columns.push_back("S");
  for (double t : config.maturities) table.columns.push_back("t=" + format_number(t));
  if (with_oracle)
    for (double t : config.maturities) table.columns.push_back("oracle_t=" + format_number(t));

  // Each part is one column (model, then oracle) for one slice.
  auto parts = for_maturities(config, [&](std::size_t i) {
    const double t = config.maturities[i];
    const DriftSlice slice = fit_drift_slice(m.fx, m.equity, m.setup, t, config.nt);
    std::optional<CopulaOracle> orc;
    if (with_oracle) orc.emplace(m.setup, m.equity, m.fx, t);
    std::vector<std::vector<double>> cols(2);
    for (double S : levels) {
      cols[0].push_back(quanto_local_drift(slice, m.equity, S, t));
      if (orc) cols[1].push_back(m.setup.rho * m.equity.local_vol(S, t) * orc->conditional_fx_vol(S));
    }
    return cols;
  });
  for (std::size_t r = 0; r < levels.size(); ++r) {
    std::vector<double> row{levels[r]};
    for (const auto& p : parts) row.push_back(p[0][r]);
    if (with_oracle)
      for (const auto& p : parts) row.push_back(p[1][r]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table cmd_bench(const RunConfig& config) {
  config.validate();
  const Market m = config.market_path.empty()
                       ? Market{MarketSetup{}, VolSurface(MarketSetup{}, Asset::Equity, {{1.0, {0.2, 0, 0}, 10.0, 1000.0}}),
                                VolSurface(MarketSetup{}, Asset::Fx, {{1.0, {0.1, 0, 0}, 0.1, 10.0}})}
                       : load_market(config.market_path);
  const std::pair<std::size_t, std::size_t> shapes[] = {{1, 1}, {1, 100}, {10, 10}, {10, 100}};
  Table table{{"maturities", "strikes", "options", "total_seconds", "per_option_seconds"}, {}};
  double sink = 0.0;
  for (auto [n_mat, n_strike] : shapes) {
    const std::vector<double> mats = bench_maturities(n_mat);
    const std::vector<double> strikes = bench_strikes(m.setup.spot_S, n_strike);
    auto once = [&] {
      for (double T : mats) {
        const QuantoContext ctx = build_context(m.setup, m.equity, m.fx, T, {config.n1, config.n2});
        for (const QuantoQuote& q : price_strikes(ctx, strikes)) sink += q.quanto_call;
      }
    };
    for (int w = 0; w < 3; ++w) once();
    std::vector<double> times;
    for (int r = 0; r < config.reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      once();
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    const double total = median(times);
    const double n = static_cast<double>(n_mat * n_strike);
    table.rows.push_back({static_cast<double>(n_mat), static_cast<double>(n_strike), n, total, total / n});
  }
  if (!std::isfinite(sink)) throw DomainError("bench produced a non-finite price");
  return table;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig config;
  std::string oracle = "none";
  CLI::App app{"Quanto option pricing by stochastic collocation", "qcoll"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--market", config.market_path, "Market JSON file")->envname("QCOLL_MARKET");
    sub->add_option("--maturities", config.maturities, "Comma-separated maturities in years")
        ->delimiter(',')
        ->envname("QCOLL_MATURITIES");
    sub->add_option("--strikes", config.strikes, "Comma-separated strikes, percent of spot by default")
        ->delimiter(',')
        ->envname("QCOLL_STRIKES");
    sub->add_flag("--absolute-strikes", config.absolute_strikes, "Read strikes as absolute levels");
    sub->add_option("--n1", config.n1, "FX collocation order")->envname("QCOLL_N1");
    sub->add_option("--n2", config.n2, "Equity collocation order")->envname("QCOLL_N2");
    sub->add_option("--nt", config.nt, "Drift-slice collocation order")->envname("QCOLL_NT");
    sub->add_option("--oracle", oracle, "Reference columns: copula, mc or none")
        ->check(CLI::IsMember({"copula", "mc", "none"}))
        ->envname("QCOLL_ORACLE");
    sub->add_option("--out", config.out_path, "Output file (default stdout)")->envname("QCOLL_OUT");
    sub->add_option("--seed", config.seed, "Monte Carlo seed")->envname("QCOLL_SEED");
    sub->add_option("--paths", config.mc_paths, "Monte Carlo paths")->envname("QCOLL_PATHS");
    sub->add_flag("--parallel", config.parallel, "Fan maturities out across threads")->envname("QCOLL_PARALLEL");
    sub->add_flag("--json", config.json, "Write JSON instead of CSV")->envname("QCOLL_JSON");
  };

  std::map<std::string, Table (*)(const RunConfig&)> commands = {{"price", cmd_price},
                                                                 {"calibrate-rho", cmd_calibrate_rho},
                                                                 {"drift-grid", cmd_drift_grid},
                                                                 {"bench", cmd_bench}};
  double target = 0.0;
  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name);
    add_common(sub);
    if (name == "calibrate-rho") sub->add_option("--target", target, "Quanto forward to match")->envname("QCOLL_TARGET");
    if (name == "bench") sub->add_option("--reps", config.reps, "Timed repetitions")->envname("QCOLL_REPS");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    config.command = sub->get_name();
    config.oracle = oracle == "copula" ? OracleKind::Copula : oracle == "mc" ? OracleKind::Mc : OracleKind::None;
    if (config.command == "calibrate-rho" && sub->count("--target") > 0) config.target = target;

    const Table table = commands.at(config.command)(config);
    std::ostringstream text;
    if (config.json)
      write_json(table, text);
    else
      write_csv(table, text);
    if (config.out_path.empty()) {
      out << text.str();
    } else {
      std::ofstream file(config.out_path, std::ios::binary);
      if (!file) throw InputError("cannot write " + config.out_path);
      file << text.str();
    }
    return kOk;
  } catch (const CalibrationError& e) {
    err << "calibration error: " << e.what() << '\n';
    return kCalibrationError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << '\n';
    return kDomainError;
  }
}

}  // namespace qcoll::cli
