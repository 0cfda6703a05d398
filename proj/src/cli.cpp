#include "zrpfluid/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "zrpfluid/absorbing.hpp"
#include "zrpfluid/fluid.hpp"
#include "zrpfluid/markov_core.hpp"
#include "zrpfluid/model_io.hpp"
#include "zrpfluid/zrp_sim.hpp"

namespace zrpfluid::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::optional<double> tol;
  std::string model;
  std::string subset;
  std::string point;
  std::size_t grid = 100;
  std::optional<double> horizon;
  bool regulator = false;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_dir;
};

double effective_tol(const Options& opt, const ModelSpec& spec) {
  return opt.tol.value_or(spec.tol.value_or(kDefaultTolerance));
}

Json flow_json(const RateMatrix& r, const FlowVector& f) {
  Json out = Json::object();
  for (int i : f.carrier.indices()) out[r.labels()[i]] = f(i);
  return out;
}

Json point_json(const RateMatrix& r, const Vector& v) {
  Json out = Json::object();
  for (Eigen::Index i = 0; i < v.size(); ++i) out[r.labels()[i]] = v[i];
  return out;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  f << content;
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::InvalidArgument, "cannot create " + dir + ": " + ec.message());
  return p;
}

int cmd_validate(const Options& opt, std::ostream& out) {
  const ModelSpec spec = parse_model(load_json_file(opt.model));
  out << "valid, " << spec.rates.size() << " sites, irreducible\n";
  return kExitOk;
}

int cmd_trace(const Options& opt, std::ostream& out, std::ostream& err) {
  const ModelSpec spec = parse_model(load_json_file(opt.model));
  const RateMatrix& r = spec.rates;
  const double tol = effective_tol(opt, spec);
  const SiteSet subset = parse_site_list(opt.subset, r);
  if (subset.empty()) throw Error(ErrorCode::EmptySiteSet, "--subset names no sites");

  const RateMatrix direct = trace_rates(r, subset);
  const RateMatrix recursive = trace_rates_recursive(r, subset);
  const double deviation = (direct.rates() - recursive.rates()).cwiseAbs().maxCoeff();
  const FlowVector flow = net_flow(r, subset);

  Json doc{{"tol", tol},
           {"subset", to_json(r, subset)},
           {"trace", to_json(direct)},
           {"net_flow", flow_json(r, flow)},
           {"recursive_max_deviation", deviation}};
  out << doc.dump(2) << "\n";
  if (deviation > tol * r.scale()) {
    err << "ConsistencyFailure: direct and recursive traces differ by " << deviation << "\n";
    return kExitConsistency;
  }
  return kExitOk;
}

int cmd_absorb(const Options& opt, std::ostream& out) {
  const ModelSpec spec = parse_model(load_json_file(opt.model));
  const RateMatrix& r = spec.rates;
  const double tol = effective_tol(opt, spec);
  const SiteSet seed = parse_site_list(opt.subset, r);

  const MinimalAbsorbingTrace trace = minimal_absorbing(r, seed, tol);
  Json iterations = Json::array();
  for (const AbsorbingIteration& it : trace.iterations) {
    iterations.push_back({{"current", to_json(r, it.current)},
                          {"net_flow", flow_json(r, it.flow)},
                          {"removed", to_json(r, it.removed)}});
  }
  const AbsorbingReport report = is_r_absorbing(r, seed, tol);
  Json witnesses = Json::object();
  for (const AbsorbingWitness& w : report.witnesses) witnesses[r.labels()[w.site]] = w.flow;

  Json doc{{"tol", tol},
           {"input", to_json(r, seed)},
           {"input_absorbing", report.absorbing},
           {"input_witnesses", witnesses},
           {"iterations", iterations},
           {"result", to_json(r, trace.result)},
           {"invariant_distribution", point_json(r, invariant_distribution(r))},
           {"bottlenecks", to_json(r, bottleneck_set(r, tol))}};
  out << doc.dump(2) << "\n";
  return kExitOk;
}

SimplexPoint resolve_point(const Options& opt, const ModelSpec& spec, double tol) {
  if (!opt.point.empty()) {
    Json arr = Json::array();
    std::stringstream ss(opt.point);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        arr.push_back(std::stod(item, &used));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "--u: '" + item + "' is not a number");
      }
    }
    return parse_point(arr, spec.rates, "--u", tol);
  }
  if (spec.initial_point) return *spec.initial_point;
  throw Error(ErrorCode::InvalidArgument, "no initial point: pass --u or add \"u\" to the model");
}

int cmd_fluid(const Options& opt, std::ostream& out, std::ostream& err) {
  const ModelSpec spec = parse_model(load_json_file(opt.model));
  const RateMatrix& r = spec.rates;
  const double tol = effective_tol(opt, spec);
  const SimplexPoint u = resolve_point(opt, spec, tol);
  if (opt.grid == 0) throw Error(ErrorCode::InvalidArgument, "--grid must be positive");

  const PiecewiseLinearPath path = fluid_trajectory(r, u, tol);
  const RegulatorPath regulator = regulator_path(r, path);
  const OrpReport orp = verify_orp(path, regulator, r, u, tol);

  Json breakpoints = Json::array();
  for (std::size_t k = 0; k < path.breakpoints.size(); ++k) {
    const PathBreakpoint& b = path.breakpoints[k];
    Json entry{{"t", b.time},
               {"point", point_json(r, b.point.values())},
               {"support", to_json(r, b.point.support(tol))},
               {"closure", to_json(r, b.closure)},
               {"velocity", point_json(r, b.velocity.values)},
               {"terminal", k == path.terminal_index()}};
    if (opt.regulator) entry["regulator_slope"] = point_json(r, regulator.segments[k].slope);
    breakpoints.push_back(std::move(entry));
  }
  Json doc{{"tol", tol},
           {"sites", r.labels()},
           {"segments", path.breakpoints.size()},
           {"terminal_time", path.terminal_time()},
           {"breakpoints", breakpoints},
           {"orp",
            {{"passed", orp.passed},
             {"checked_times", orp.checked_times},
             {"max_residual", orp.max_residual},
             {"min_increment", orp.min_increment},
             {"max_complementarity", orp.max_complementarity},
             {"violations", orp.violations}}}};

  if (!opt.out_dir.empty()) {
    const fs::path dir = prepare_out_dir(opt.out_dir);
    const double tf = path.terminal_time();
    const double horizon = opt.horizon.value_or(tf > 0.0 ? 2.0 * tf : 1.0);
    std::ostringstream csv;
    csv << "# zrpfluid fluid tol=" << format_number(tol) << "\n";
    csv << "t";
    for (const auto& label : r.labels()) csv << "," << label;
    if (opt.regulator) {
      for (const auto& label : r.labels()) csv << ",rho_" << label;
    }
    csv << "\n";
    for (std::size_t k = 0; k <= opt.grid; ++k) {
      const double t = k == opt.grid ? horizon : horizon * static_cast<double>(k) / opt.grid;
      csv << format_number(t);
      const Vector z = evaluate_path(path, t).values();
      for (Eigen::Index i = 0; i < z.size(); ++i) csv << "," << format_number(z[i]);
      if (opt.regulator) {
        const Vector rho = regulator.evaluate(t);
        for (Eigen::Index i = 0; i < rho.size(); ++i) csv << "," << format_number(rho[i]);
      }
      csv << "\n";
    }
    write_file(dir / "trajectory.csv", csv.str());
    write_file(dir / "fluid.json", doc.dump(2) + "\n");
  }
  out << doc.dump(2) << "\n";
  if (!orp.passed) {
    err << "ConsistencyFailure: regulator does not solve the reflection problem\n";
    return kExitConsistency;
  }
  return kExitOk;
}

int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  const ExperimentSpec spec = parse_experiment(load_json_file(opt.model));
  const double tol = effective_tol(opt, spec.model);
  ConvergenceOptions options{spec.particle_counts, spec.horizon, spec.trials,
                             opt.seed.value_or(spec.seed), opt.threads, tol};
  const ConvergenceResult result = convergence_experiment(
      spec.model.rates, *spec.model.jump_rate, *spec.model.initial_point, options);

  bool decreasing = true;
  for (std::size_t k = 1; k < result.summary.size(); ++k) {
    if (!(result.summary[k].median < result.summary[k - 1].median)) decreasing = false;
  }
  const double final_median = result.summary.back().median;
  const bool final_ok = !spec.thresholds.max_final_median ||
                        final_median <= *spec.thresholds.max_final_median;
  const bool passed = final_ok && (decreasing || !spec.thresholds.require_decreasing);

  Json summary = Json::array();
  for (const ConvergenceSummary& s : result.summary) {
    summary.push_back({{"N", s.particles}, {"median", s.median}, {"p90", s.p90}});
  }
  Json thresholds{{"require_decreasing", spec.thresholds.require_decreasing}};
  if (spec.thresholds.max_final_median) {
    thresholds["max_final_median"] = *spec.thresholds.max_final_median;
  }
  Json doc{{"tol", tol},
           {"g", spec.model.jump_rate->name()},
           {"T", spec.horizon},
           {"trials", spec.trials},
           {"seed", options.master_seed},
           {"grid_steps", kConvergenceGridSteps},
           {"summary", summary},
           {"thresholds", thresholds},
           {"checks",
            {{"medians_decreasing", decreasing}, {"final_median_ok", final_ok}, {"passed", passed}}}};

  if (!opt.out_dir.empty()) {
    const fs::path dir = prepare_out_dir(opt.out_dir);
    std::ostringstream csv;
    csv << "# zrpfluid simulate tol=" << format_number(tol) << " seed=" << options.master_seed
        << "\n";
    csv << "N,trial,seed,sup_distance,events\n";
    for (const TrialResult& t : result.trials) {
      csv << t.particles << "," << t.trial << "," << t.seed << "," << format_number(t.sup_distance)
          << "," << t.events << "\n";
    }
    write_file(dir / "results.csv", csv.str());
    write_file(dir / "summary.json", doc.dump(2) + "\n");
  }
  out << doc.dump(2) << "\n";
  if (!passed) {
    err << "threshold failure: medians_decreasing=" << decreasing
        << " final_median_ok=" << final_ok << "\n";
    return kExitThreshold;
  }
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  return code == ErrorCode::ConsistencyFailure ? kExitConsistency : kExitModelError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  CLI::App app{"Trace rates, absorbing sets, fluid paths and zero-range simulation", "zrpfluid"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--tol", opt.tol, "flow tolerance, multiplied by the largest rate (default 1e-9)")
      ->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "check a rate matrix document");
  validate->add_option("model", opt.model, "model JSON")->required();

  auto* trace = app.add_subcommand("trace", "trace rates and net flow on a subset");
  trace->add_option("model", opt.model, "model JSON")->required();
  trace->add_option("--subset,-A", opt.subset, "comma-separated site labels")->required();

  auto* absorb = app.add_subcommand("absorb", "minimal absorbing superset and bottlenecks");
  absorb->add_option("model", opt.model, "model JSON")->required();
  absorb->add_option("--set,-S", opt.subset, "comma-separated site labels")->required();

  auto* fluid = app.add_subcommand("fluid", "fluid trajectory, regulator and reflection check");
  fluid->add_option("model", opt.model, "model JSON")->required();
  fluid->add_option("--u", opt.point, "initial point, comma-separated masses");
  fluid->add_option("--grid", opt.grid, "CSV sampling intervals")->capture_default_str();
  fluid->add_option("--horizon", opt.horizon, "CSV time horizon (default 2*T_f)");
  fluid->add_flag("--regulator", opt.regulator, "include cumulative regulator columns");
  fluid->add_option("--out", opt.out_dir, "directory for trajectory.csv and fluid.json");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo convergence experiment");
  simulate->add_option("experiment", opt.model, "experiment JSON")->required();
  simulate->add_option("--seed", opt.seed, "override the master seed");
  simulate->add_option("--threads", opt.threads, "worker threads (0 = all cores)");
  simulate->add_option("--out", opt.out_dir, "directory for results.csv and summary.json");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitModelError;
  }

  try {
    if (validate->parsed()) return cmd_validate(opt, out);
    if (trace->parsed()) return cmd_trace(opt, out, err);
    if (absorb->parsed()) return cmd_absorb(opt, out);
    if (fluid->parsed()) return cmd_fluid(opt, out, err);
    if (simulate->parsed()) return cmd_simulate(opt, out, err);
  } catch (const Error& e) {
    const std::string what = e.what();
    const std::string code = to_string(e.code());
    err << (what.starts_with(code) ? what : code + ": " + what) << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitModelError;
  }
  return kExitModelError;
}

}  // namespace zrpfluid::cli
