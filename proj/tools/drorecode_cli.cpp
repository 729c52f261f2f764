// drorecode: calibrate, solve and reproduce the recoding experiments.
//
// Exit codes: 0 success, 2 config/parse error, 3 solver non-convergence,
// 4 experiment finished with failed trials, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drorecode/config.hpp"
#include "drorecode/distributions.hpp"
#include "drorecode/dro.hpp"
#include "drorecode/io.hpp"
#include "drorecode/lp_solver.hpp"
#include "drorecode/netsim.hpp"
#include "drorecode/saa.hpp"

#ifndef DRORECODE_VERSION
#define DRORECODE_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace drorecode;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitPartial = 4;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> sample_size;
  std::optional<double> t_avg;
  std::optional<double> eta;
  std::optional<int> draws;
  std::optional<double> tol;
  std::optional<long> max_iter;
  std::optional<std::string> output_dir;
  std::optional<std::string> experiment;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "JSON run configuration (defaults apply when omitted)");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--trials", trials, "trials per configuration");
    cmd->add_option("-N,--sample-size", sample_size, "sample size N");
    cmd->add_option("--t-avg", t_avg, "average recoding budget");
    cmd->add_option("--eta", eta, "confidence level");
    cmd->add_option("-L,--draws", draws, "Monte Carlo draws for radius calibration");
    cmd->add_option("--tol", tol, "PDHG tolerance");
    cmd->add_option("--max-iter", max_iter, "PDHG iteration limit");
  }

  RunConfig load() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) c.seed = *seed;
    if (trials) c.trials = *trials;
    if (sample_size) c.sample_size = *sample_size;
    if (t_avg) c.t_avg = *t_avg;
    if (eta) c.eta = *eta;
    if (draws) c.calibration_draws = *draws;
    if (tol) c.tol = *tol;
    if (max_iter) c.max_iter = *max_iter;
    if (output_dir) c.output_dir = *output_dir;
    if (experiment) c.experiment = *experiment;
    c.validate();
    return c;
  }
};

std::mt19937_64 calibration_rng(const RunConfig& c) {
  std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32), 0xca11u};
  return std::mt19937_64(seq);
}

void print_distribution(std::ostream& os, const RankDistribution& h) {
  os << "empirical:";
  for (int r = 0; r <= h.max_rank(); ++r)
    if (h[r] > 0.0) os << ' ' << r << '=' << h[r];
  os << '\n';
}

int cmd_calibrate(const Overrides& ov, const std::string& samples_path) {
  const RunConfig c = ov.load();
  const RankSamples samples = read_samples_file(samples_path, c.batch_size);
  const RankDistribution h = empirical(samples);
  auto rng = calibration_rng(c);
  const auto cal = calibrate_radius(h, samples.size(), c.eta, c.calibration_draws, rng);
  std::cout << std::setprecision(10);
  std::cout << "rho: " << cal.rho << '\n'
            << "quantile: " << cal.quantile << '\n'
            << "quantile_level: " << cal.quantile_level << '\n'
            << "eta: " << c.eta << '\n'
            << "L: " << cal.sample_count << '\n'
            << "N: " << samples.size() << '\n';
  print_distribution(std::cout, h);
  return kExitOk;
}

int cmd_solve(const Overrides& ov, const std::string& samples_path, const std::string& policy_path,
              const std::string& method_name_arg, std::optional<double> rho_override, const std::string& trace_path) {
  const RunConfig c = ov.load();
  const RankSamples samples = read_samples_file(samples_path, c.batch_size);
  const RankDistribution h = empirical(samples);
  const ExpectedRankTable table(ChannelModel(c.loss_rates.empty() ? c.loss_rate : c.loss_rates[1], c.batch_size));
  const Method method = parse_method(method_name_arg);
  const DroOptions opts = c.solver_options();

  RecodingVector t;
  std::cout << std::setprecision(10);
  std::cout << "method: " << drorecode::method_name(method) << '\n' << "N: " << samples.size() << '\n';
  const SolverReport* report = nullptr;
  DroSolution dro;
  SaaLpResult lp;
  switch (method) {
    case Method::SaaPrimal: {
      const auto alloc = solve_saa_greedy(h, table, Budget(c.t_avg));
      t = c.tune_saa_primal ? tune_unseen_ranks(h, table, alloc) : alloc.t;
      std::cout << "objective: " << objective(h, table, t) << '\n';
      break;
    }
    case Method::SaaLp: {
      lp = solve_saa_lp(h, table, Budget(c.t_avg), opts.pdhg);
      t = lp.t;
      report = &lp.report;
      std::cout << "objective: " << lp.objective << '\n';
      break;
    }
    case Method::Dro: {
      double rho = 0.0;
      if (rho_override) {
        rho = *rho_override;
      } else {
        auto rng = calibration_rng(c);
        rho = calibrate_radius(h, samples.size(), c.eta, c.calibration_draws, rng).rho;
      }
      const DroInstance inst(samples, table, rho, rho, Budget(c.t_avg));
      dro = solve_dro(inst, opts);
      t = dro.t;
      report = &dro.report;
      std::cout << "rho: " << rho << '\n'
                << "objective: " << dro.objective << '\n'
                << "worst_case_expectation: " << worst_case_expectation(t, samples, rho) << '\n';
      if (dro.clip_exceeded) std::cerr << "warning: policy clipped by " << dro.max_clip << '\n';
      break;
    }
  }
  std::cout << "empirical_objective: " << objective(h, table, t) << '\n'
            << "empirical_mean_packets: " << t.mean(h) << '\n';
  if (report) std::cout << "iterations: " << report->iterations << '\n';
  if (report && !trace_path.empty()) {
    std::ofstream tr(trace_path);
    if (!tr) throw ParseError("cannot write trace file '" + trace_path + "'");
    write_trace_csv(tr, *report);
  }

  std::ofstream out(policy_path);
  if (!out) throw ParseError("cannot write policy file '" + policy_path + "'");
  write_policy(out, t);
  std::cout << "policy: " << policy_path << '\n';
  return kExitOk;
}

int cmd_replay(const Overrides& ov, const std::string& policy_path, int link) {
  const RunConfig c = ov.load();
  const RecodingVector t = read_policy_file(policy_path);
  if (t.max_rank() != c.batch_size) throw ParseError("policy batch size does not match config");
  const LineNetwork net = c.network();
  if (link < 1 || link > net.hops) throw ParseError("link must lie in [1, hops]");
  const RankDistribution h = true_link_distribution(net, link);
  const ExpectedRankTable table(net.outgoing(link));
  RecodingVector clipped = t;
  clip_to_table(clipped, table);
  std::cout << std::setprecision(10) << "link: " << link << '\n'
            << "effective_throughput: " << effective_throughput(h, table, clipped, net.t_avg, c.batch_size) << '\n'
            << "optimal: " << optimal_throughput(h, table, net.t_avg, c.batch_size) << '\n';
  return kExitOk;
}

int cmd_experiment(const Overrides& ov) {
  const RunConfig c = ov.load();
  fs::create_directories(c.output_dir);
  std::vector<std::string> outputs;
  std::vector<FailedTrials> failed;

  auto emit = [&](const std::string& name, const std::vector<TrialResult>& rows) {
    const fs::path path = fs::path(c.output_dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    write_results_csv(out, rows);
    outputs.push_back(name);
    for (const auto& r : rows)
      if (r.failures > 0)
        failed.push_back({name, drorecode::method_name(r.method), r.link_or_hop, r.sample_size, r.failures});
    std::cerr << "wrote " << path.string() << '\n';
  };

  if (c.experiment == "fig1") {
    const LineNetwork net = c.network();
    TrialConfig tc = c.trial_config();
    for (int link : c.links) {
      tc.links = {link};
      emit("fig1_link" + std::to_string(link) + ".csv", run_sample_size_experiment(net, tc));
    }
  } else {
    TrialConfig tc = c.trial_config();
    tc.sample_sizes = {c.sample_size};
    for (double budget : c.fig2_t_avg) {
      std::ostringstream name;
      name << "fig2_tavg" << budget << ".csv";
      emit(name.str(), run_hop_experiment(c.network(budget), tc));
    }
  }

  const auto manifest = make_manifest(c, DRORECODE_VERSION, outputs, failed);
  std::ofstream mf(fs::path(c.output_dir) / "manifest.json", std::ios::binary);
  mf << manifest.dump(2) << '\n';
  if (!failed.empty()) {
    std::cerr << "experiment finished with failed trials (see manifest.json)\n";
    return kExitPartial;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust adaptive recoding: calibration, solving and experiments"};
  app.set_version_flag("--version", DRORECODE_VERSION);
  app.require_subcommand(1);

  Overrides ov;

  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the Wasserstein radius from rank samples");
  std::string samples_path;
  ov.attach(calibrate);
  calibrate->add_option("-s,--samples", samples_path, "samples file, one rank per line")->required();

  auto* solve = app.add_subcommand("solve", "Fit a recoding policy from rank samples");
  Overrides ov_solve;
  ov_solve.attach(solve);
  std::string solve_samples;
  std::string policy_path = "policy.txt";
  std::string method = "dro";
  std::optional<double> rho;
  std::string trace_path;
  solve->add_option("-s,--samples", solve_samples, "samples file, one rank per line")->required();
  solve->add_option("-o,--out", policy_path, "policy output file");
  solve->add_option("-m,--method", method, "dro | saa-lp | saa-primal");
  solve->add_option("--rho", rho, "use this radius for both balls instead of calibrating");
  solve->add_option("--trace", trace_path, "write the PDHG residual trace CSV");

  auto* replay = app.add_subcommand("replay", "Evaluate a policy file on a link's true rank distribution");
  Overrides ov_replay;
  ov_replay.attach(replay);
  std::string replay_policy;
  int replay_link = 1;
  replay->add_option("-p,--policy", replay_policy, "policy file")->required();
  replay->add_option("--link", replay_link, "link index (1-based)");

  auto* experiment = app.add_subcommand("experiment", "Reproduce the sample-size (fig1) or hop (fig2) experiment");
  Overrides ov_exp;
  ov_exp.attach(experiment);
  experiment->add_option("-e,--experiment", ov_exp.experiment, "fig1 | fig2");
  experiment->add_option("-o,--output-dir", ov_exp.output_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*calibrate) return cmd_calibrate(ov, samples_path);
    if (*solve) return cmd_solve(ov_solve, solve_samples, policy_path, method, rho, trace_path);
    if (*replay) return cmd_replay(ov_replay, replay_policy, replay_link);
    if (*experiment) return cmd_experiment(ov_exp);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << '\n' << e.diagnostics() << '\n';
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
