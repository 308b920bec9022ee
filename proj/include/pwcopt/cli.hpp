#pragma once

// Command-line front end. Every subcommand writes one primary output (CSV or
// JSON rows) and a JSON manifest next to it (<out>.manifest.json).
//
// Exit codes: 0 success, 1 solver failure, 2 configuration error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/version.hpp>
#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "pwcopt/analytic.hpp"
#include "pwcopt/error.hpp"
#include "pwcopt/fit.hpp"
#include "pwcopt/grape.hpp"
#include "pwcopt/shooting.hpp"

namespace pwcopt::cli {

inline constexpr const char* kVersion = "1.0.0";

using json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rows of a table with a fixed header. Cells are doubles (printed with 17
/// significant digits), integers, booleans or strings.
class Table {
 public:
  using Cell = std::variant<double, long long, bool, std::string>;

  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != header_.size()) {
      throw std::logic_error("row width does not match header");
    }
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }

  std::string csv() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < header_.size(); ++i) {
      os << (i ? "," : "") << header_[i];
    }
    os << '\n';
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        std::visit(
            [&](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, bool>) {
                os << (v ? "true" : "false");
              } else if constexpr (std::is_same_v<T, double>) {
                if (std::isnan(v)) {
                  os << "nan";
                } else {
                  os << v;
                }
              } else {
                os << v;
              }
            },
            row[i]);
      }
      os << '\n';
    }
    return os.str();
  }

  json to_json() const {
    json rows = json::array();
    for (const auto& row : rows_) {
      json obj = json::object();
      for (std::size_t i = 0; i < row.size(); ++i) {
        std::visit(
            [&](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, double>) {
                obj[header_[i]] = std::isfinite(v) ? json(v) : json(nullptr);
              } else {
                obj[header_[i]] = v;
              }
            },
            row[i]);
      }
      rows.push_back(std::move(obj));
    }
    return rows;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

/// Everything a subcommand produces.
struct Output {
  Table table{{}};
  json summary = json::object();
  bool failed = false;
  std::vector<std::pair<std::string, Table>> extra;  // (suffix, table)
};

struct Options {
  std::string out;
  std::string format = "csv";
  std::string mode = "locked";
  std::string family = "two-control";
  std::string method = "pmp";
  std::string model;
  int n = 3;
  std::string n_range;
  std::string t_range;
  std::string tf_range;
  double period = 0.0;
  double delta = 0.5;
  double omega = 0.5;
  double delta_max = 2.0;
  double nu = 100e3;
  double step_us = 0.5;
  double tf = 0.0;
  int grid = 200;
  int starts = 50;
  int seeds = 20;
  std::uint64_t stream = 42;
  double pz_sign = -1.0;
};

namespace detail {

/// "a:b" or "a:b:step" (inclusive).
inline std::vector<double> parse_range(const std::string& text,
                                       const std::string& field,
                                       double default_step) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("field '" + field + "': cannot parse '" + item + "'");
    }
  }
  if (parts.size() < 2 || parts.size() > 3) {
    throw ConfigError("field '" + field + "': expected start:stop[:step]");
  }
  const double step = parts.size() == 3 ? parts[2] : default_step;
  if (!(step > 0.0) || parts[1] < parts[0]) {
    throw ConfigError("field '" + field + "': empty or invalid range");
  }
  std::vector<double> out;
  const auto count =
      static_cast<long long>(std::floor((parts[1] - parts[0]) / step + 1e-9));
  if (count > 1000000) {
    throw ConfigError("field '" + field + "': too many points");
  }
  for (long long i = 0; i <= count; ++i) out.push_back(parts[0] + i * step);
  return out;
}

inline TimeMode parse_mode(const std::string& mode) {
  if (mode == "locked") return TimeMode::kLockedGrid;
  if (mode == "free-tail") return TimeMode::kFreeTail;
  throw ConfigError("field 'mode': expected locked or free-tail, got '" + mode +
                    "'");
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

inline std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

inline Table interval_table(const ShootingResult& r) {
  Table t({"k", "duration", "control"});
  for (std::size_t k = 0; k < r.trajectory.intervals.size(); ++k) {
    const auto& rec = r.trajectory.intervals[k];
    t.add({static_cast<long long>(k), rec.duration, rec.control});
  }
  return t;
}

inline json shooting_summary(const ShootingResult& r, double reference) {
  return {{"N", r.intervals},
          {"T", r.period},
          {"delta_T", r.tail},
          {"t_f", r.final_time},
          {"t_f_continuous", reference},
          {"gap", r.final_time - reference},
          {"converged", r.converged},
          {"residual", r.residual_norm},
          {"costate0", {r.costate0.x(), r.costate0.y(), r.costate0.z()}},
          {"controls", r.controls.values}};
}

inline ShootingProblem make_problem(const Options& o) {
  ShootingProblem p;
  if (o.family == "two-control") {
    p = ShootingProblem::two_control_locked(o.n);
    require(o.pz_sign == 1.0 || o.pz_sign == -1.0, "field 'pz-sign': must be 1 or -1");
    p.branch = o.pz_sign;
  } else if (o.family == "one-control") {
    require(std::abs(o.delta) <= 10.0, "field 'delta': out of range");
    p = ShootingProblem::one_control_locked(o.delta, o.n);
  } else if (o.family == "landau-zener") {
    require(o.omega > 0.0, "field 'omega': must be positive");
    require(o.delta_max > 0.0, "field 'delta-max': must be positive");
    p = ShootingProblem::landau_zener_locked(o.omega, o.delta_max, o.n);
  } else {
    throw ConfigError("field 'family': unknown family '" + o.family + "'");
  }
  p.mode = parse_mode(o.mode);
  if (p.mode == TimeMode::kFreeTail) {
    require(o.period > 0.0, "field 'period': required (> 0) in free-tail mode");
    p.period = o.period;
  } else {
    require(o.n >= 1, "field 'n': must be >= 1");
  }
  return p;
}

inline Output run_shooting(const Options& o) {
  const ShootingProblem p = make_problem(o);
  Output out;
  const double reference = continuous_minimum_time(p);
  try {
    const ShootingResult r =
        multistart(p, default_seeds(p, o.seeds, 0.1, o.stream));
    out.table = interval_table(r);
    out.summary = shooting_summary(r, reference);
  } catch (const Error& e) {
    out.table = Table({"k", "duration", "control"});
    out.summary = {{"error", e.what()}, {"t_f_continuous", reference}};
    out.failed = true;
  }
  return out;
}

inline Output run_linear(const Options& o) {
  require(o.omega > 0.0 && o.omega < 2.0 * o.n,
          "field 'omega': need 0 < omega < 2N");
  require(o.n >= 1, "field 'n': must be >= 1");
  const LinearDiscrete d = linear_discrete(o.omega, o.n);
  const LinearContinuous c = linear_continuous(o.omega);
  Output out;
  out.table = Table({"k", "duration", "phase"});
  for (int k = 0; k < o.n; ++k) {
    out.table.add({static_cast<long long>(k), d.period, d.phases[k]});
  }
  out.summary = {{"N", o.n},
                 {"T", d.period},
                 {"t_f", d.final_time},
                 {"t_f_continuous", c.final_time},
                 {"gap", d.final_time - c.final_time},
                 {"final_state", {d.final_state.real(), d.final_state.imag()}},
                 {"final_error", std::abs(d.final_state - 1.0)},
                 {"converged", true}};
  return out;
}

inline GradientMethod parse_method(const std::string& m) {
  if (m == "pmp") return GradientMethod::kPmpExact;
  if (m == "aux") return GradientMethod::kAuxiliaryMatrix;
  if (m == "split") return GradientMethod::kSplitOperator;
  throw ConfigError("field 'method': expected pmp, aux or split, got '" + m +
                    "'");
}

inline Output run_grape(const Options& o) {
  require(o.n >= 1, "field 'n': must be >= 1");
  require(o.starts >= 1, "field 'starts': must be >= 1");
  GrapeProblem p = GrapeProblem::equator_quarter_turn(o.n, 1.0);
  p.method = parse_method(o.method);
  Output out;
  if (!o.tf_range.empty()) {
    const auto grid = parse_range(o.tf_range, "tf-range", 0.001);
    require(grid.front() > 0.0, "field 'tf-range': times must be positive");
    const TimeScan scan = time_scan(p, grid, o.starts, o.stream);
    out.table = Table({"t_f", "d", "phases"});
    for (const auto& row : scan.rows) {
      out.table.add({row.final_time, row.distance, join(row.phases)});
    }
    out.summary = {{"N", o.n},
                   {"method", to_string(p.method)},
                   {"starts", o.starts},
                   {"threshold", scan.threshold},
                   {"minimum_time", std::isnan(scan.minimum_time)
                                        ? json(nullptr)
                                        : json(scan.minimum_time)}};
    out.failed = std::isnan(scan.minimum_time);
    return out;
  }
  require(o.tf > 0.0, "field 'tf': required (> 0) unless tf-range is given");
  p.final_time = o.tf;
  const auto inits = random_phases(o.starts, o.n, o.stream);
  const OptimizeResult best = multistart_optimize(p, inits);
  // Re-run the winning start with the full trace.
  std::size_t index = 0;
  for (std::size_t i = 0; i < inits.size(); ++i) {
    OptimizeOptions quiet;
    quiet.keep_trace = false;
    if (optimize(p, inits[i], quiet).phases == best.phases) {
      index = i;
      break;
    }
  }
  const OptimizeResult r = optimize(p, inits[index]);
  out.table = Table({"iteration", "J", "gradient_norm", "phases"});
  for (const auto& e : r.trace) {
    out.table.add({static_cast<long long>(e.iteration), e.fidelity,
                   e.gradient_norm, join(e.phases)});
  }
  out.summary = {{"N", o.n},
                 {"t_f", o.tf},
                 {"method", to_string(p.method)},
                 {"start", index},
                 {"J", r.fidelity},
                 {"d", r.distance()},
                 {"iterations", r.iterations},
                 {"converged", r.converged},
                 {"stalled", r.stalled},
                 {"phases", r.phases}};
  return out;
}

inline Output run_sweep(const Options& o) {
  Output out;
  out.table = Table({"N", "T", "delta_T", "t_f", "gap", "converged"});
  std::vector<ConvergenceRow> fit_rows;
  double reference = 0.0;
  std::string default_model = "exponential";
  if (o.family == "linear") {
    require(o.omega > 0.0, "field 'omega': must be positive");
    require(!o.n_range.empty(), "field 'n-range': required for linear sweeps");
    reference = linear_continuous(o.omega).final_time;
    for (double v : parse_range(o.n_range, "n-range", 1.0)) {
      const int n = static_cast<int>(std::lround(v));
      require(n >= 1 && o.omega < 2.0 * n, "field 'n-range': need omega < 2N");
      const LinearDiscrete d = linear_discrete(o.omega, n);
      out.table.add({static_cast<long long>(n), d.period, d.period,
                     d.final_time, d.final_time - reference, true});
      fit_rows.push_back({static_cast<double>(n), d.final_time, true});
    }
    default_model = "polynomial";
  } else {
    Options po = o;
    ShootingProblem base;
    std::vector<double> grid;
    const TimeMode mode = parse_mode(o.mode);
    if (mode == TimeMode::kLockedGrid) {
      require(!o.n_range.empty(), "field 'n-range': required in locked mode");
      grid = parse_range(o.n_range, "n-range", 1.0);
      require(grid.front() >= 1.0, "field 'n-range': N must be >= 1");
      po.n = static_cast<int>(std::lround(grid.front()));
    } else {
      require(!o.t_range.empty(), "field 't-range': required in free-tail mode");
      grid = parse_range(o.t_range, "t-range", 0.01);
      require(grid.front() > 0.0, "field 't-range': T must be positive");
      po.period = grid.front();
    }
    base = make_problem(po);
    reference = continuous_minimum_time(base);
    const auto rows = convergence_sweep(base, grid);
    int failures = 0;
    for (const auto& r : rows) {
      out.table.add({static_cast<long long>(r.intervals), r.period, r.tail,
                     r.final_time, r.gap, r.converged});
      if (!r.converged) ++failures;
      fit_rows.push_back({static_cast<double>(r.intervals), r.final_time,
                          r.converged && mode == TimeMode::kLockedGrid});
    }
    out.summary["failed_rows"] = failures;
    out.failed = failures == static_cast<int>(rows.size());
  }
  out.summary["family"] = o.family;
  out.summary["t_f_continuous"] = reference;
  const std::string model = o.model.empty() ? default_model : o.model;
  require(model == "exponential" || model == "polynomial",
          "field 'model': expected exponential or polynomial");
  try {
    const ConvergenceFit fit = fit_convergence(
        fit_rows, reference,
        model == "exponential" ? FitModel::kExponential : FitModel::kPolynomial);
    out.summary["fit"] = {{"model", to_string(fit.model)},
                          {"intercept", fit.intercept},
                          {"slope", fit.slope},
                          {"r_squared", fit.r_squared},
                          {"rows_used", fit.rows_used}};
  } catch (const Error& e) {
    out.summary["fit"] = {{"error", e.what()}};
  }
  return out;
}

inline Output run_adjoint_map(const Options& o) {
  require(o.n >= 1, "field 'n': must be >= 1");
  require(o.grid >= 2 && o.grid <= 2000, "field 'grid': need 2..2000");
  ShootingProblem p = ShootingProblem::two_control_locked(o.n);
  Output out;
  double period = 0.0;
  try {
    period = multistart(p, default_seeds(p, o.seeds, 0.1, o.stream)).period;
  } catch (const Error& e) {
    out.summary = {{"error", e.what()}};
    out.failed = true;
    out.table = Table({"theta_p", "phi_p", "d"});
    return out;
  }
  const SphereMap map = adjoint_sphere_map(o.n, period, o.grid);
  out.table = Table({"theta_p", "phi_p", "d"});
  for (const auto& pt : map.grid) {
    out.table.add({pt.polar, pt.azimuth, pt.distance});
  }
  Table curve({"branch", "theta_p", "phi_p"});
  for (const auto& [theta, phi] : map.curve) {
    curve.add({std::string("pz_negative"), theta, phi});
  }
  for (const auto& [theta, phi] : map.mirror_curve) {
    curve.add({std::string("pz_positive"), theta, phi});
  }
  out.extra.emplace_back("curve", std::move(curve));
  out.summary = {{"N", o.n}, {"T", period}, {"grid", o.grid}};
  return out;
}

inline Output run_nmr(const Options& o) {
  require(o.nu > 0.0, "field 'nu': must be positive");
  Output out;
  out.table = Table({"quantity", "t_normalized", "t_us"});
  const double tc = kTwoControlMinimumTime;
  out.table.add({std::string("continuous"), tc, nmr_time(tc, o.nu)});
  Options so = o;
  so.family = "two-control";
  if (parse_mode(o.mode) == TimeMode::kFreeTail && o.period <= 0.0) {
    require(o.step_us > 0.0, "field 'step-us': must be positive");
    so.period = nmr_period(o.step_us, o.nu);
  }
  const Output shot = run_shooting(so);
  out.failed = shot.failed;
  if (!shot.failed) {
    const double tf = shot.summary["t_f"].get<double>();
    out.table.add({std::string("discrete"), tf, nmr_time(tf, o.nu)});
    out.summary = shot.summary;
    out.summary["t_f_us"] = nmr_time(tf, o.nu);
  } else {
    out.summary = shot.summary;
  }
  out.summary["nu_hz"] = o.nu;
  out.summary["step_us"] = o.step_us;
  out.summary["t_f_continuous_us"] = nmr_time(tc, o.nu);
  return out;
}

inline json versions() {
  return {{"pwcopt", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"compiler", __VERSION__}};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output '" + path + "'");
  f << text;
}

/// Loads a JSON config object and turns it into argv-style tokens: the
/// "subcommand" key first, then "--key value" pairs.
inline std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config root must be an object");
  std::vector<std::string> tokens;
  if (cfg.contains("subcommand")) {
    if (!cfg["subcommand"].is_string()) {
      throw ConfigError("field 'subcommand': must be a string");
    }
    tokens.push_back(cfg["subcommand"].get<std::string>());
  }
  for (const auto& [key, value] : cfg.items()) {
    if (key == "subcommand") continue;
    tokens.push_back("--" + key);
    if (value.is_string()) {
      tokens.push_back(value.get<std::string>());
    } else if (value.is_number_integer()) {
      tokens.push_back(std::to_string(value.get<long long>()));
    } else if (value.is_number()) {
      std::ostringstream os;
      os << std::setprecision(17) << value.get<double>();
      tokens.push_back(os.str());
    } else {
      throw ConfigError("field '" + key + "': must be a string or number");
    }
  }
  return tokens;
}

}  // namespace detail

inline int run(const std::vector<std::string>& arguments,
               std::ostream& log = std::cerr) {
  std::vector<std::string> args = arguments;
  // --config FILE is expanded in place before parsing; explicit flags after
  // it on the command line override file values.
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" || args[i].rfind("--config=", 0) == 0) {
      std::string path;
      std::size_t erase = 1;
      if (args[i] == "--config") {
        if (i + 1 >= args.size()) {
          log << "config error: --config needs a path\n";
          return 2;
        }
        path = args[i + 1];
        erase = 2;
      } else {
        path = args[i].substr(9);
      }
      std::vector<std::string> tokens;
      try {
        tokens = detail::config_tokens(path);
      } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return 2;
      }
      args.erase(args.begin() + static_cast<long>(i),
                 args.begin() + static_cast<long>(i + erase));
      // Subcommand from the file goes first unless one is already given.
      std::vector<std::string> merged;
      if (!tokens.empty() && tokens.front().rfind("--", 0) != 0) {
        merged.push_back(tokens.front());
        tokens.erase(tokens.begin());
      }
      std::vector<std::string> rest = args;
      if (!merged.empty() && !rest.empty() && rest.front().rfind("-", 0) != 0) {
        merged.clear();  // command line names the subcommand
      }
      std::vector<std::string> head;
      std::vector<std::string> tail;
      if (!rest.empty() && rest.front().rfind("-", 0) != 0) {
        head.push_back(rest.front());
        tail.assign(rest.begin() + 1, rest.end());
      } else {
        tail = rest;
      }
      args.clear();
      args.insert(args.end(), merged.begin(), merged.end());
      args.insert(args.end(), head.begin(), head.end());
      args.insert(args.end(), tokens.begin(), tokens.end());
      args.insert(args.end(), tail.begin(), tail.end());
      break;
    }
  }

  CLI::App app{"Time-optimal piecewise-constant control of two-level systems",
               "pwcopt"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);
  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "primary output path");
    sub->add_option("--format", o.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed-stream", o.stream, "random stream id");
  };
  auto shooting_opts = [&](CLI::App* sub) {
    sub->add_option("--n", o.n, "number of intervals");
    sub->add_option("--mode", o.mode, "locked or free-tail");
    sub->add_option("--period", o.period, "sampling period T (free-tail)");
    sub->add_option("--seeds", o.seeds, "random seeds added to the analytic ones");
  };

  auto* two = app.add_subcommand("two-control", "two resonant controls");
  common(two);
  shooting_opts(two);
  two->add_option("--pz-sign", o.pz_sign, "sign of p_z(0) branch (-1 or 1)");

  auto* one = app.add_subcommand("one-control", "single detuned control");
  common(one);
  shooting_opts(one);
  one->add_option("--delta", o.delta, "detuning");

  auto* lz = app.add_subcommand("landau-zener", "detuning as control");
  common(lz);
  shooting_opts(lz);
  lz->add_option("--omega", o.omega, "coupling");
  lz->add_option("--delta-max", o.delta_max, "detuning bound");

  auto* lin = app.add_subcommand("linear", "linearized model closed forms");
  common(lin);
  lin->add_option("--n", o.n, "number of intervals");
  lin->add_option("--omega", o.omega, "frequency");

  auto* grape = app.add_subcommand("grape", "fixed-time fidelity maximization");
  common(grape);
  grape->add_option("--n", o.n, "number of intervals");
  grape->add_option("--tf", o.tf, "final time");
  grape->add_option("--tf-range", o.tf_range, "final-time scan start:stop[:step]");
  grape->add_option("--method", o.method, "pmp, aux or split");
  grape->add_option("--starts", o.starts, "random initializations");

  auto* sweep = app.add_subcommand("sweep", "convergence sweep with fit");
  common(sweep);
  sweep->add_option("--family", o.family,
                    "two-control, one-control, landau-zener or linear");
  sweep->add_option("--mode", o.mode, "locked or free-tail");
  sweep->add_option("--n-range", o.n_range, "start:stop[:step]");
  sweep->add_option("--t-range", o.t_range, "start:stop[:step] (free-tail)");
  sweep->add_option("--delta", o.delta, "detuning (one-control)");
  sweep->add_option("--omega", o.omega, "coupling or frequency");
  sweep->add_option("--delta-max", o.delta_max, "detuning bound");
  sweep->add_option("--model", o.model, "exponential or polynomial");
  sweep->add_option("--seeds", o.seeds, "random seeds per multistart");

  auto* amap = app.add_subcommand("adjoint-map", "initial-costate sphere map");
  common(amap);
  amap->add_option("--n", o.n, "number of intervals");
  amap->add_option("--grid", o.grid, "cells per angle");

  auto* nmr = app.add_subcommand("nmr", "physical times for an NMR pulse");
  common(nmr);
  nmr->add_option("--nu", o.nu, "pulse amplitude in Hz");
  nmr->add_option("--n", o.n, "number of intervals");
  nmr->add_option("--mode", o.mode, "locked or free-tail");
  nmr->add_option("--period", o.period, "sampling period T (free-tail)");
  nmr->add_option("--step-us", o.step_us,
                  "digitization step in microseconds (free-tail default T)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  }
  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  if (name != "sweep") {
    o.family = name == "two-control"    ? "two-control"
               : name == "one-control"  ? "one-control"
               : name == "landau-zener" ? "landau-zener"
                                        : o.family;
  }
  if (chosen->count("--out") == 0) {
    o.out = name + (o.format == "json" ? ".json" : ".csv");
  }

  Output out;
  try {
    if (name == "linear") {
      out = detail::run_linear(o);
    } else if (name == "grape") {
      out = detail::run_grape(o);
    } else if (name == "sweep") {
      out = detail::run_sweep(o);
    } else if (name == "adjoint-map") {
      out = detail::run_adjoint_map(o);
    } else if (name == "nmr") {
      out = detail::run_nmr(o);
    } else {
      out = detail::run_shooting(o);
    }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDomainError ||
        e.kind() == ErrorKind::kInvalidTail) {
      log << "config error: " << e.what() << '\n';
      return 2;
    }
    log << "solver failure: " << e.what() << '\n';
    out.failed = true;
    out.summary = {{"error", e.what()}};
  }

  json manifest = {{"subcommand", name},
                   {"config", json::object()},
                   {"versions", detail::versions()},
                   {"output", o.out},
                   {"rows", out.table.size()},
                   {"success", !out.failed},
                   {"result", out.summary}};
  for (const auto* opt : chosen->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    const auto& results = opt->results();
    const std::string value =
        results.empty() ? opt->get_default_str() : results.back();
    manifest["config"][opt->get_lnames().front()] =
        value.empty() ? json(nullptr) : json(value);
  }
  try {
    if (o.format == "json") {
      detail::write_file(o.out, out.table.to_json().dump(2) + "\n");
    } else {
      detail::write_file(o.out, out.table.csv());
    }
    json extra = json::array();
    for (const auto& [suffix, table] : out.extra) {
      const auto dot = o.out.rfind('.');
      const std::string stem =
          dot == std::string::npos ? o.out : o.out.substr(0, dot);
      const std::string path =
          stem + "." + suffix + (o.format == "json" ? ".json" : ".csv");
      detail::write_file(path, o.format == "json"
                                   ? table.to_json().dump(2) + "\n"
                                   : table.csv());
      extra.push_back(path);
    }
    manifest["extra_outputs"] = extra;
    detail::write_file(o.out + ".manifest.json", manifest.dump(2) + "\n");
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return 2;
  }
  return out.failed ? 1 : 0;
}

inline int run(int argc, char** argv, std::ostream& log = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), log);
}

}  // namespace pwcopt::cli
