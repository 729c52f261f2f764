#pragma once

// Rank-level simulation of a line network: source -> node 1 -> ... -> node H.
// Link k (1-based) carries batches into node k; node k recodes onto link k+1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "drorecode/distributions.hpp"
#include "drorecode/dro.hpp"
#include "drorecode/error.hpp"
#include "drorecode/rank_model.hpp"
#include "drorecode/saa.hpp"

namespace drorecode {

struct LineNetwork {
  int hops = 10;
  std::vector<ChannelModel> links;  // hops + 1 links; links[0] leaves the source
  double source_packets = 16.0;     // t0
  double t_avg = 16.0;

  int batch_size() const { return links.front().batch_size; }

  /// Outgoing link of node k (1-based).
  const ChannelModel& outgoing(int node) const { return links[static_cast<std::size_t>(node)]; }

  void validate() const {
    detail::require(hops >= 1, "line network needs at least one hop");
    detail::require(links.size() == static_cast<std::size_t>(hops) + 1, "line network needs hops + 1 links");
    for (const auto& l : links) {
      l.validate();
      detail::require(l.batch_size == links.front().batch_size, "all links must share the batch size");
    }
    detail::require(std::isfinite(source_packets) && source_packets >= 0.0, "source packet count must be >= 0");
    detail::require(std::isfinite(t_avg) && t_avg > 0.0, "t_avg must be positive");
  }

  static LineNetwork uniform(int hops, double loss_rate, int batch_size, double t_avg,
                             std::optional<double> source_packets = std::nullopt) {
    LineNetwork net;
    net.hops = hops;
    net.links.assign(static_cast<std::size_t>(hops) + 1, ChannelModel(loss_rate, batch_size));
    net.t_avg = t_avg;
    net.source_packets = source_packets.value_or(t_avg);
    net.validate();
    return net;
  }
};

/// h'_s = sum_r h_r P(next rank = s | rank r, t_r packets).
inline RankDistribution propagate(const RankDistribution& h, const RecodingVector& t, const ChannelModel& link) {
  detail::require(static_cast<int>(h.size()) == link.batch_size + 1, "distribution does not match link");
  detail::require(t.size() == h.size(), "recoding vector does not match distribution");
  std::vector<double> out(h.size(), 0.0);
  for (int r = 0; r <= h.max_rank(); ++r) {
    if (h[r] == 0.0) continue;
    const RankDistribution next = rank_transition(link, r, t[r]);
    for (int s = 0; s <= r; ++s) out[static_cast<std::size_t>(s)] += h[r] * next[s];
  }
  return RankDistribution(std::move(out), 1e-10);
}

/// Rank distribution arriving at node 1: a full-rank batch sent with t0 packets over link 1.
inline RankDistribution source_distribution(const LineNetwork& net) {
  net.validate();
  return rank_transition(net.links.front(), net.batch_size(), net.source_packets);
}

/// (E_h[E_r(t_r)] / M) * min(1, t_avg / E_h[t_r]); 0/0 counts as no penalty.
inline double effective_throughput(const RankDistribution& h, const ExpectedRankTable& table,
                                   const RecodingVector& t, double t_avg, int batch_size) {
  detail::require(batch_size >= 1, "batch size must be positive");
  detail::require(t_avg > 0.0, "t_avg must be positive");
  const double gain = objective(h, table, t) / static_cast<double>(batch_size);
  const double spent = t.mean(h);
  const double penalty = spent > t_avg ? t_avg / spent : 1.0;
  return gain * penalty;
}

/// Throughput of the greedy policy fitted to the exact distribution.
inline double optimal_throughput(const RankDistribution& h, const ExpectedRankTable& table, double t_avg,
                                 int batch_size) {
  const auto alloc = solve_saa_greedy(h, table, Budget(t_avg));
  return effective_throughput(h, table, alloc.t, t_avg, batch_size);
}

// ---------------------------------------------------------------------------
// Experiments

enum class Method { SaaPrimal, SaaLp, Dro };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::SaaPrimal: return "SAA-primal";
    case Method::SaaLp: return "SAA-LP";
    case Method::Dro: return "DRO";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "SAA-primal" || s == "saa-primal") return Method::SaaPrimal;
  if (s == "SAA-LP" || s == "saa-lp") return Method::SaaLp;
  if (s == "DRO" || s == "dro") return Method::Dro;
  throw InvalidArgument("unknown method '" + s + "'");
}

struct TrialConfig {
  std::vector<int> sample_sizes{15};     // N values
  int trials = 10;                       // T
  std::vector<Method> methods{Method::SaaPrimal, Method::SaaLp, Method::Dro};
  double eta = 0.95;
  int calibration_draws = 10000;         // L
  std::uint64_t seed = 1;
  std::vector<int> links{1, 4, 7, 10};   // reported links (sample-size experiment)
  bool tune_saa_primal = false;          // fill unseen ranks in SAA-primal (see tune_unseen_ranks)
  DroOptions solver{};

  void validate() const {
    detail::require(!sample_sizes.empty(), "at least one sample size is required");
    for (int n : sample_sizes) detail::require(n >= 1, "sample sizes must be positive");
    detail::require(trials >= 1, "trial count must be positive");
    detail::require(!methods.empty(), "at least one method is required");
    detail::require(eta > 0.0 && eta < 1.0, "eta must lie in (0, 1)");
    detail::require(calibration_draws >= 1, "calibration needs at least one draw");
  }
};

/// One row of the experiment CSV.
struct TrialResult {
  Method method = Method::Dro;
  int link_or_hop = 1;
  int sample_size = 0;
  double t_avg = 0.0;
  int trials = 0;                        // successful trials
  double mean_throughput = 0.0;
  double optimal = 0.0;
  double mse = 0.0;
  int failures = 0;
  std::vector<double> throughputs;       // per successful trial

  /// log10(MSE); -infinity when every trial matched the optimum exactly.
  double log10_mse() const {
    return mse > 0.0 ? std::log10(mse) : -std::numeric_limits<double>::infinity();
  }
};

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (auto t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

inline std::vector<int> draw_ranks(const RankDistribution& h, int count, std::mt19937_64& rng) {
  std::discrete_distribution<int> pick(h.probabilities().begin(), h.probabilities().end());
  std::vector<int> out(static_cast<std::size_t>(count));
  for (auto& r : out) r = pick(rng);
  return out;
}

inline void finish(TrialResult& row, const std::vector<double>& errors) {
  row.trials = static_cast<int>(row.throughputs.size());
  if (row.trials == 0) {
    row.mean_throughput = std::numeric_limits<double>::quiet_NaN();
    row.mse = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double sum = 0.0;
  for (double v : row.throughputs) sum += v;
  row.mean_throughput = sum / row.trials;
  double sq = 0.0;
  for (double e : errors) sq += e * e;
  row.mse = sq / row.trials;
}

}  // namespace detail

/// Fits a recoding policy from rank samples with the given method.
/// DRO calibrates rho1 = rho2 = rho from the samples with `calibration_rng`.
inline RecodingVector fit_policy(Method method, const RankSamples& samples, const ExpectedRankTable& table,
                                 double t_avg, const TrialConfig& cfg, std::mt19937_64& calibration_rng) {
  const RankDistribution h = empirical(samples);
  switch (method) {
    case Method::SaaPrimal: {
      const auto alloc = solve_saa_greedy(h, table, Budget(t_avg));
      return cfg.tune_saa_primal ? tune_unseen_ranks(h, table, alloc) : alloc.t;
    }
    case Method::SaaLp:
      return solve_saa_lp(h, table, Budget(t_avg), cfg.solver.pdhg).t;
    case Method::Dro: {
      const auto cal = calibrate_radius(h, samples.size(), cfg.eta, cfg.calibration_draws, calibration_rng);
      const DroInstance inst(samples, table, cal.rho, cal.rho, Budget(t_avg));
      return solve_dro(inst, cfg.solver).t;
    }
  }
  throw InvalidArgument("unknown method");
}

/// True input distribution at node `link` when every upstream node applies the
/// policy that is optimal for its own exact input distribution.
inline RankDistribution true_link_distribution(const LineNetwork& net, int link) {
  detail::require(link >= 1 && link <= net.hops, "link index out of range");
  RankDistribution h = source_distribution(net);
  for (int node = 1; node < link; ++node) {
    const ExpectedRankTable table(net.outgoing(node));
    const auto alloc = solve_saa_greedy(h, table, Budget(net.t_avg));
    h = propagate(h, alloc.t, net.outgoing(node));
  }
  return h;
}

/// Sample-size sweep at fixed links: per trial, draw N ranks from the link's
/// true distribution, fit each method on the same draw, and score effective
/// throughput against the optimum for the exact distribution.
inline std::vector<TrialResult> run_sample_size_experiment(const LineNetwork& net, const TrialConfig& cfg) {
  net.validate();
  cfg.validate();
  std::vector<TrialResult> rows;
  for (int link : cfg.links) {
    const RankDistribution h = true_link_distribution(net, link);
    const ExpectedRankTable table(net.outgoing(link));
    const double opt = optimal_throughput(h, table, net.t_avg, net.batch_size());
    for (int n : cfg.sample_sizes) {
      std::vector<TrialResult> per_method;
      std::vector<std::vector<double>> errors(cfg.methods.size());
      for (Method m : cfg.methods) {
        TrialResult row;
        row.method = m;
        row.link_or_hop = link;
        row.sample_size = n;
        row.t_avg = net.t_avg;
        row.optimal = opt;
        per_method.push_back(row);
      }
      for (int trial = 0; trial < cfg.trials; ++trial) {
        const auto tag = static_cast<std::uint64_t>(trial);
        auto sample_rng = detail::stream(cfg.seed, {1, static_cast<std::uint64_t>(link), static_cast<std::uint64_t>(n), tag});
        const RankSamples samples(detail::draw_ranks(h, n, sample_rng), net.batch_size());
        for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
          auto cal_rng = detail::stream(cfg.seed, {2, static_cast<std::uint64_t>(link), static_cast<std::uint64_t>(n), tag});
          try {
            const RecodingVector t = fit_policy(cfg.methods[k], samples, table, net.t_avg, cfg, cal_rng);
            const double thr = effective_throughput(h, table, t, net.t_avg, net.batch_size());
            per_method[k].throughputs.push_back(thr);
            errors[k].push_back(thr - opt);
          } catch (const NonConvergence&) {
            ++per_method[k].failures;
          }
        }
      }
      for (std::size_t k = 0; k < per_method.size(); ++k) {
        detail::finish(per_method[k], errors[k]);
        rows.push_back(std::move(per_method[k]));
      }
    }
  }
  return rows;
}

/// Hop-by-hop propagation where every node fits its own policy from N fresh
/// samples of its input; each hop's throughput is scored against the optimal
/// throughput of the first hop.
inline std::vector<TrialResult> run_hop_experiment(const LineNetwork& net, const TrialConfig& cfg) {
  net.validate();
  cfg.validate();
  const int n = cfg.sample_sizes.front();
  const RankDistribution h1 = source_distribution(net);
  std::vector<ExpectedRankTable> tables;
  for (int node = 1; node <= net.hops; ++node) tables.emplace_back(net.outgoing(node));
  const double opt1 = optimal_throughput(h1, tables.front(), net.t_avg, net.batch_size());

  std::vector<TrialResult> rows;
  for (Method m : cfg.methods) {
    std::vector<TrialResult> per_hop(static_cast<std::size_t>(net.hops));
    std::vector<std::vector<double>> errors(static_cast<std::size_t>(net.hops));
    for (int hop = 1; hop <= net.hops; ++hop) {
      auto& row = per_hop[static_cast<std::size_t>(hop) - 1];
      row.method = m;
      row.link_or_hop = hop;
      row.sample_size = n;
      row.t_avg = net.t_avg;
      row.optimal = opt1;
    }
    for (int trial = 0; trial < cfg.trials; ++trial) {
      RankDistribution h = h1;
      for (int hop = 1; hop <= net.hops; ++hop) {
        // Hop 1 reuses the link-1 streams of the sample-size experiment.
        const auto n64 = static_cast<std::uint64_t>(n);
        const auto h64 = static_cast<std::uint64_t>(hop);
        const auto t64 = static_cast<std::uint64_t>(trial);
        auto sample_rng = hop == 1 ? detail::stream(cfg.seed, {1, 1, n64, t64}) : detail::stream(cfg.seed, {3, h64, n64, t64});
        auto cal_rng = hop == 1 ? detail::stream(cfg.seed, {2, 1, n64, t64}) : detail::stream(cfg.seed, {4, h64, n64, t64});
        const auto& table = tables[static_cast<std::size_t>(hop) - 1];
        auto& row = per_hop[static_cast<std::size_t>(hop) - 1];
        try {
          const RankSamples samples(detail::draw_ranks(h, n, sample_rng), net.batch_size());
          const RecodingVector t = fit_policy(m, samples, table, net.t_avg, cfg, cal_rng);
          const double thr = effective_throughput(h, table, t, net.t_avg, net.batch_size());
          row.throughputs.push_back(thr);
          errors[static_cast<std::size_t>(hop) - 1].push_back(thr - opt1);
          h = propagate(h, t, net.outgoing(hop));
        } catch (const NonConvergence&) {
          for (int rest = hop; rest <= net.hops; ++rest) ++per_hop[static_cast<std::size_t>(rest) - 1].failures;
          break;
        }
      }
    }
    for (int hop = 1; hop <= net.hops; ++hop) {
      detail::finish(per_hop[static_cast<std::size_t>(hop) - 1], errors[static_cast<std::size_t>(hop) - 1]);
      rows.push_back(std::move(per_hop[static_cast<std::size_t>(hop) - 1]));
    }
  }
  return rows;
}

/// Experiment CSV: method,link_or_hop,N,t_avg,trials,mean_throughput,optimal,log10_mse,failures.
/// A zero MSE is written as "-inf".
inline void write_results_csv(std::ostream& os, const std::vector<TrialResult>& rows) {
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  os << "method,link_or_hop,N,t_avg,trials,mean_throughput,optimal,log10_mse,failures\n";
  for (const auto& r : rows) {
    os << method_name(r.method) << ',' << r.link_or_hop << ',' << r.sample_size << ',' << r.t_avg << ','
       << r.trials << ',' << r.mean_throughput << ',' << r.optimal << ',';
    const double lm = r.log10_mse();
    if (std::isinf(lm) && lm < 0)
      os << "-inf";
    else
      os << lm;
    os << ',' << r.failures << '\n';
  }
  os.precision(old_precision);
}

}  // namespace drorecode
