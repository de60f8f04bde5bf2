// chiralctl: synthesize, simulate, and certify minimum-time chiral-resolution
// pulse schedules for a pair of enantiomers driven on a closed three-level
// loop. Exit codes: 0 ok, 1 I/O or parse, 2 domain, 3 simulation/objective
// mismatch, 4 certificate non-convergence.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chiralctl/analytic.hpp"
#include "chiralctl/baselines.hpp"
#include "chiralctl/io.hpp"
#include "chiralctl/optimize.hpp"
#include "chiralctl/pmp.hpp"
#include "chiralctl/spin.hpp"

namespace {

using namespace chiralctl;

constexpr int kOk = 0;
constexpr int kIoError = 1;
constexpr int kDomainError = 2;
constexpr int kSimMismatch = 3;
constexpr int kCertificateFailed = 4;

struct Options {
  double s = 1.0;
  double s_min = 0.86;
  double s_max = 1.0;
  double s_step = 0.01;
  double omega0 = 1.0;
  std::string protocol = "analytic";
  std::string out;
  std::uint64_t seed = 20260818;
  int segments = 64;
  std::string input;
  std::string config;
};

std::vector<double> make_grid(double lo, double hi, double step) {
  require(step != 0.0, "grid: step must be nonzero");
  require(step > 0 ? lo <= hi : lo >= hi, "grid: empty range");
  std::vector<double> grid;
  const double span = std::abs(hi - lo);
  const int count = static_cast<int>(std::floor(span / std::abs(step) + 1e-9)) + 1;
  for (int i = 0; i < count; ++i) grid.push_back(lo + i * step);
  return grid;
}

// stream sink: --out file when given, stdout otherwise
class OutputSink {
 public:
  explicit OutputSink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot open for writing: " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  void finish() {
    if (file_.is_open()) {
      file_.close();
      if (!file_) throw std::runtime_error("write failed");
    } else {
      std::cout.flush();
    }
  }

 private:
  std::ofstream file_;
};

PulseSchedule synthesize(const Options& opt) {
  require(opt.omega0 > 0, "omega0 must be positive");
  if (opt.protocol == "analytic") {
    require(opt.s >= kLowerBranchMinS,
            "analytic branches cover s >= 0.86; use --protocol numeric");
    AnalyticSolution sol = analytic_solution(opt.s, opt.omega0);
    return std::move(sol.schedule);
  }
  if (opt.protocol == "constant") {
    require(opt.s >= 1.0,
            "the constant protocol drives the y control at the common bound, "
            "which needs s >= 1");
    AnalyticSolution sol = constant_schedule(opt.omega0);
    sol.schedule.meta.s = opt.s;
    return std::move(sol.schedule);
  }
  if (opt.protocol == "numeric") {
    require(opt.s > 0, "s must be positive");
    MinimizeOptions mopts;
    mopts.n_segments = opt.segments;
    mopts.seed = opt.seed;
    OptimizationResult res = minimize_time(opt.s, opt.omega0, mopts);
    if (!std::isfinite(res.total_T))
      throw std::runtime_error("optimizer found no feasible schedule: " +
                               res.message);
    res.schedule.meta.trace["free_form_T"] = res.free_form_T;
    res.schedule.meta.trace["bisection_solves"] = res.iterations;
    res.schedule.meta.trace["constraint_residual"] = res.constraint_residual;
    res.schedule.meta.trace["refinement_converged"] = res.converged ? 1.0 : 0.0;
    res.schedule.meta.trace["unresolved_fraction"] =
        res.extracted_structure.unresolved_fraction;
    return std::move(res.schedule);
  }
  if (const auto kind = baseline_from_name(opt.protocol)) {
    require(opt.s > 0, "s must be positive");
    return baseline_schedule(*kind, opt.s, opt.omega0);
  }
  throw std::domain_error(
      "unknown protocol '" + opt.protocol +
      "' (expected analytic, constant, numeric, pqs, psq, qpsq, or psq2)");
}

int cmd_synth(const Options& opt) {
  const PulseSchedule sched = synthesize(opt);
  OutputSink sink(opt.out);
  sink.stream() << schedule_to_json(sched).dump(2) << '\n';
  sink.finish();
  return kOk;
}

int cmd_simulate(const Options& opt) {
  const PulseSchedule sched = load_schedule(opt.input);
  OutputSink sink(opt.out);
  const auto [p3p, p3m] = write_trajectory_csv(sink.stream(), sched, opt.segments);
  sink.finish();
  if (std::isfinite(sched.meta.objective)) {
    const double simulated = std::abs(p3p - p3m);
    if (std::abs(simulated - sched.meta.objective) > 1e-7) {
      std::cerr << "error: simulated objective " << format_sig(simulated)
                << " disagrees with the declared " << format_sig(sched.meta.objective)
                << '\n';
      return kSimMismatch;
    }
  }
  return kOk;
}

int cmd_compare(const Options& opt) {
  require(opt.omega0 > 0, "omega0 must be positive");
  const std::vector<double> grid = make_grid(opt.s_min, opt.s_max, opt.s_step);
  for (double s : grid) require(s > 0, "comparison needs s > 0");

  OutputSink sink(opt.out);
  std::ostream& out = sink.stream();
  out << "s,T_optimal,T_PQS,T_PSQ,T_QPSQ,T_PSQ2,T_lower_bound\n";
  int warnings = 0;
  for (double s : grid) {
    double t_opt = std::numeric_limits<double>::quiet_NaN();
    if (s >= kLowerBranchMinS) {
      t_opt = analytic_solution(s, opt.omega0).total_T;
    } else {
      MinimizeOptions mopts;
      mopts.n_segments = opt.segments;
      mopts.seed = opt.seed;
      const OptimizationResult res = minimize_time(s, opt.omega0, mopts);
      if (std::isfinite(res.total_T)) {
        t_opt = res.total_T;
      } else {
        ++warnings;  // flagged row: optimizer failed to converge here
      }
    }
    out << format_sig(s) << ',' << format_sig(t_opt) << ','
        << format_sig(baseline_duration(BaselineKind::PQS, s, opt.omega0)) << ','
        << format_sig(baseline_duration(BaselineKind::PSQ, s, opt.omega0)) << ','
        << format_sig(baseline_duration(BaselineKind::Q_PS_Q, s, opt.omega0)) << ','
        << format_sig(baseline_duration(BaselineKind::PS_Q, s, opt.omega0)) << ','
        << format_sig(delta_limit_duration(opt.omega0)) << '\n';
  }
  sink.finish();
  if (warnings > 0)
    std::cerr << "warning: " << warnings
              << " grid point(s) without a converged optimum\n";
  return kOk;
}

int cmd_sweep_theta(const Options& opt) {
  const std::vector<double> grid = make_grid(opt.s_min, opt.s_max, opt.s_step);
  for (double s : grid)
    require(s >= kLowerBranchMinS && s <= 1.0 + 1e-12,
            "polar-angle sweep is defined on s in [0.86, 1]");
  OutputSink sink(opt.out);
  std::ostream& out = sink.stream();
  out << "s,theta\n";
  for (double s : grid)
    out << format_sig(s) << ',' << format_sig(terminal_polar_angle(std::min(s, 1.0)))
        << '\n';
  sink.finish();
  return kOk;
}

int cmd_verify(const Options& opt) {
  const PulseSchedule sched = load_schedule(opt.input);
  CertificateOptions copts;
  copts.seed = opt.seed;
  copts.samples_per_segment = opt.segments;
  const CertificateReport report = certificate_search(sched, copts);

  Json doc;
  doc["precondition_ok"] = report.precondition_ok;
  doc["converged"] = report.converged;
  doc["hc_residual"] = report.hc_residual;
  doc["transversality_residual"] = report.transversality_residual;
  doc["singular_violations"] = report.singular_violations;
  doc["sign_violations"] = report.sign_violations;
  doc["sign_margin"] = report.sign_margin;
  doc["total_residual"] = report.total_residual;
  doc["lambda_plus"] = {report.found_adjoints.lambda_plus.x(),
                        report.found_adjoints.lambda_plus.y(),
                        report.found_adjoints.lambda_plus.z()};
  doc["lambda_minus"] = {report.found_adjoints.lambda_minus.x(),
                         report.found_adjoints.lambda_minus.y(),
                         report.found_adjoints.lambda_minus.z()};
  doc["message"] = report.message;

  OutputSink sink(opt.out);
  sink.stream() << doc.dump(2) << '\n';
  sink.finish();
  if (!report.converged) {
    std::cerr << "error: certificate did not converge: " << report.message << '\n';
    return kCertificateFailed;
  }
  return kOk;
}

int cmd_baselines(const Options& opt) {
  require(opt.omega0 > 0, "omega0 must be positive");
  const std::vector<double> grid = make_grid(opt.s_min, opt.s_max, opt.s_step);
  for (double s : grid) require(s > 0, "baseline durations need s > 0");
  OutputSink sink(opt.out);
  std::ostream& out = sink.stream();
  out << "s,T_PQS,T_PSQ,T_QPSQ,T_PSQ2\n";
  for (double s : grid)
    out << format_sig(s) << ','
        << format_sig(baseline_duration(BaselineKind::PQS, s, opt.omega0)) << ','
        << format_sig(baseline_duration(BaselineKind::PSQ, s, opt.omega0)) << ','
        << format_sig(baseline_duration(BaselineKind::Q_PS_Q, s, opt.omega0)) << ','
        << format_sig(baseline_duration(BaselineKind::PS_Q, s, opt.omega0)) << '\n';
  sink.finish();
  return kOk;
}

void add_range_flags(CLI::App* sub, Options& opt) {
  sub->add_option("--s-min", opt.s_min, "Lower end of the s grid")
      ->capture_default_str();
  sub->add_option("--s-max", opt.s_max, "Upper end of the s grid")
      ->capture_default_str();
  sub->add_option("--s-step", opt.s_step, "Grid step (sign sets direction)")
      ->capture_default_str();
}

void add_common_flags(CLI::App* sub, Options& opt) {
  sub->add_option("--omega0", opt.omega0, "Common bound on the x and z controls")
      ->capture_default_str();
  sub->add_option("--out", opt.out, "Output file (stdout when omitted)");
  sub->add_option("--seed", opt.seed, "Random seed for stochastic stages")
      ->capture_default_str();
  sub->add_option("--config", opt.config,
                  "INI file whose keys mirror the flags (explicit flags win)");
}

// Expand `--config file` into the flag tokens it mirrors, inserted right
// after the subcommand so explicit command-line flags take precedence.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args.front().empty() || args.front()[0] == '-')
    return args;

  std::string file;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      file = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      file = args[i].substr(9);
  }
  if (file.empty()) return args;

  std::vector<std::string> tokens;
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(file)) {
    std::string name = item.name;
    for (auto it = item.parents.rbegin(); it != item.parents.rend(); ++it)
      name = *it + "." + name;  // sectioned keys are not mirrored flags
    if (name == "config") continue;
    tokens.push_back("--" + name);
    tokens.insert(tokens.end(), item.inputs.begin(), item.inputs.end());
  }
  args.insert(args.begin() + 1, tokens.begin(), tokens.end());
  return args;
}

// repeated value flags keep the last occurrence, so config tokens injected
// ahead of the explicit ones are overridden by them
void take_last_occurrence(CLI::App* sub) {
  for (CLI::Option* o : sub->get_options())
    if (!o->get_positional() && o->get_expected_min() > 0)
      o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Minimum-time pulse schedules for perfect chiral resolution of a "
      "three-level enantiomer pair"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* synth = app.add_subcommand(
      "synth", "Synthesize a schedule and write the schedule document");
  synth->add_option("--s", opt.s, "Bounds ratio omega1/omega0")
      ->capture_default_str();
  synth
      ->add_option("--protocol", opt.protocol,
                   "analytic | constant | numeric | pqs | psq | qpsq | psq2")
      ->capture_default_str();
  synth->add_option("--segments", opt.segments,
                    "Control segments for the numeric optimizer")
      ->capture_default_str();
  add_common_flags(synth, opt);

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Integrate a schedule document into a trajectory CSV");
  simulate->add_option("schedule", opt.input, "Schedule document to simulate")
      ->required();
  simulate->add_option("--segments", opt.segments, "Samples per pulse segment")
      ->capture_default_str();
  add_common_flags(simulate, opt);

  CLI::App* compare = app.add_subcommand(
      "compare", "Tabulate optimal and baseline durations over an s grid");
  add_range_flags(compare, opt);
  compare->add_option("--segments", opt.segments,
                      "Control segments for the numeric optimizer")
      ->capture_default_str();
  add_common_flags(compare, opt);

  CLI::App* sweep = app.add_subcommand(
      "sweep-theta", "Terminal polar angle of the suppressed species over s");
  add_range_flags(sweep, opt);
  add_common_flags(sweep, opt);

  CLI::App* verify = app.add_subcommand(
      "verify", "Search for a maximum-principle certificate of a schedule");
  verify->add_option("schedule", opt.input, "Schedule document to certify")
      ->required();
  verify->add_option("--segments", opt.segments, "Certificate samples per segment")
      ->capture_default_str();
  add_common_flags(verify, opt);

  CLI::App* baselines = app.add_subcommand(
      "baselines", "Tabulate the four baseline pulse-protocol durations");
  add_range_flags(baselines, opt);
  add_common_flags(baselines, opt);

  // verify wants denser sampling than the optimizer's default table
  verify->parse_complete_callback([&] {
    if (verify->count("--segments") == 0) opt.segments = 128;
  });

  for (CLI::App* sub : {synth, simulate, compare, sweep, verify, baselines})
    take_last_occurrence(sub);

  try {
    std::vector<std::string> args = expand_config_args(argc, argv);
    std::reverse(args.begin(), args.end());  // parse(vector) wants them reversed
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }

  try {
    if (synth->parsed()) return cmd_synth(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (compare->parsed()) return cmd_compare(opt);
    if (sweep->parsed()) return cmd_sweep_theta(opt);
    if (verify->parsed()) return cmd_verify(opt);
    if (baselines->parsed()) return cmd_baselines(opt);
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kIoError;
}
