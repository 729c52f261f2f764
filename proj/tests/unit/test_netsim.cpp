#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <string>

#include "drorecode/netsim.hpp"
#include "support/oracles.hpp"

using namespace drorecode;

namespace {

const ChannelModel kLink(0.2, 16);

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Propagate, FixedPoints) {
  const auto z = RankDistribution::point_mass(0, 16);
  std::vector<double> t(17, 5.0);
  EXPECT_NEAR(propagate(z, RecodingVector(t), kLink)[0], 1.0, 1e-15);
  const auto top = RankDistribution::point_mass(16, 16);
  EXPECT_NEAR(propagate(top, RecodingVector::zeros(16), kLink)[0], 1.0, 1e-15);
}

TEST(Propagate, MeanIsExpectedRank) {
  std::mt19937_64 rng(1);
  const ExpectedRankTable table(kLink);
  for (int k = 0; k < 50; ++k) {
    const RankDistribution h(oracle::random_distribution(rng, 17, 0.3), 1e-10);
    std::vector<double> tv;
    for (int r = 0; r <= 16; ++r) tv.push_back(std::uniform_real_distribution<double>(0, 40)(rng));
    const RecodingVector t(tv);
    const auto next = propagate(h, t, kLink);
    double total = 0.0;
    for (double v : next.probabilities()) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
    double want = 0.0;
    for (int r = 0; r <= 16; ++r) want += h[r] * expected_rank(kLink, r, tv[static_cast<std::size_t>(r)]);
    EXPECT_NEAR(next.mean(), want, 1e-12);
  }
}

TEST(Source, Laws) {
  const auto lossless = source_distribution(LineNetwork::uniform(3, 0.0, 16, 16.0));
  EXPECT_NEAR(lossless[16], 1.0, 1e-15);
  const auto h = source_distribution(LineNetwork::uniform(3, 0.2, 4, 4.0));
  // Four packets over a 20% erasure link: rank is Binomial(4, 0.8).
  const double want[] = {0.0016, 0.0256, 0.1536, 0.4096, 0.4096};
  for (int r = 0; r <= 4; ++r) EXPECT_NEAR(h[r], want[r], 1e-14);
}

TEST(Throughput, KnownValues) {
  const ExpectedRankTable tb(ChannelModel(0.2, 1));
  const auto one = RankDistribution::point_mass(1, 1);
  EXPECT_NEAR(effective_throughput(one, tb, RecodingVector({0.0, 2.0}), 2.0, 1), 0.96, 1e-15);
  // Overspending is penalised by t_avg / E[t].
  EXPECT_NEAR(effective_throughput(one, tb, RecodingVector({0.0, 2.0}), 1.0, 1), 0.48, 1e-15);
  EXPECT_EQ(effective_throughput(one, tb, RecodingVector::zeros(1), 1.0, 1), 0.0);
  EXPECT_NEAR(optimal_throughput(one, tb, 2.0, 1), 0.96, 1e-15);
  EXPECT_EQ(optimal_throughput(RankDistribution::point_mass(0, 16), ExpectedRankTable(kLink), 16.0, 16), 0.0);
}

TEST(Throughput, OptimumDominatesAndStaysInRange) {
  std::mt19937_64 rng(2);
  const ExpectedRankTable tb(kLink);
  for (int k = 0; k < 50; ++k) {
    const RankDistribution h(oracle::random_distribution(rng, 17, 0.3), 1e-10);
    const double t_avg = 4.0 + 20.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    const double best = optimal_throughput(h, tb, t_avg, 16);
    EXPECT_GE(best, 0.0);
    EXPECT_LE(best, 1.0);
    for (int j = 0; j < 5; ++j) {
      std::vector<double> tv;
      for (int r = 0; r <= 16; ++r)
        tv.push_back(std::uniform_real_distribution<double>(0, 1)(rng) * tb.i_max(r));
      const double thr = effective_throughput(h, tb, RecodingVector(tv), t_avg, 16);
      EXPECT_GE(thr, 0.0);
      EXPECT_LE(thr, best + 1e-12);
    }
  }
}

TEST(Network, Validation) {
  EXPECT_THROW(LineNetwork::uniform(0, 0.2, 16, 16.0), InvalidArgument);
  EXPECT_THROW(LineNetwork::uniform(2, 0.2, 16, 0.0), InvalidArgument);
  auto net = LineNetwork::uniform(2, 0.2, 16, 16.0);
  net.links.pop_back();
  EXPECT_THROW(net.validate(), InvalidArgument);
  EXPECT_EQ(LineNetwork::uniform(2, 0.2, 16, 12.0).source_packets, 12.0);
  EXPECT_EQ(LineNetwork::uniform(2, 0.2, 16, 12.0, 20.0).source_packets, 20.0);
  EXPECT_EQ(parse_method("dro"), Method::Dro);
  EXPECT_EQ(parse_method("SAA-LP"), Method::SaaLp);
  EXPECT_THROW(parse_method("nope"), InvalidArgument);
}

TEST(Experiment, LosslessNetworkIsExact) {
  const auto net = LineNetwork::uniform(3, 0.0, 4, 4.0);
  TrialConfig cfg;
  cfg.methods = {Method::SaaPrimal};
  cfg.links = {1, 3};
  cfg.trials = 3;
  cfg.sample_sizes = {5};
  const auto rows = run_sample_size_experiment(net, cfg);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.mse, 0.0);
    EXPECT_NEAR(r.optimal, 1.0, 1e-15);
  }
  std::ostringstream os;
  write_results_csv(os, rows);
  const auto l = lines(os.str());
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0], "method,link_or_hop,N,t_avg,trials,mean_throughput,optimal,log10_mse,failures");
  EXPECT_EQ(l[1], "SAA-primal,1,5,4,3,1,1,-inf,0");
}

TEST(Experiment, ManySamplesApproachOptimum) {
  const auto net = LineNetwork::uniform(4, 0.2, 16, 16.0);
  TrialConfig cfg;
  cfg.methods = {Method::SaaPrimal};
  cfg.links = {1, 4};
  cfg.trials = 5;
  cfg.sample_sizes = {100000};
  for (const auto& r : run_sample_size_experiment(net, cfg)) EXPECT_LT(r.mse, 1e-6);
}

TEST(Experiment, DeterministicAndSharedAcrossMethods) {
  const auto net = LineNetwork::uniform(3, 0.2, 8, 8.0);
  TrialConfig cfg;
  cfg.links = {2};
  cfg.trials = 2;
  cfg.sample_sizes = {10};
  cfg.calibration_draws = 500;
  const auto a = run_sample_size_experiment(net, cfg);
  const auto b = run_sample_size_experiment(net, cfg);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].throughputs, b[k].throughputs);
    EXPECT_EQ(a[k].trials + a[k].failures, 2);
  }
  // Dropping a method leaves the others untouched.
  TrialConfig only = cfg;
  only.methods = {Method::SaaPrimal};
  EXPECT_EQ(run_sample_size_experiment(net, only).front().throughputs, a.front().throughputs);
}

TEST(Experiment, HopRowsAndChainedDistribution) {
  const auto net = LineNetwork::uniform(3, 0.2, 8, 8.0);
  TrialConfig cfg;
  cfg.methods = {Method::SaaPrimal, Method::Dro};
  cfg.trials = 3;
  cfg.sample_sizes = {12};
  cfg.calibration_draws = 500;
  const auto rows = run_hop_experiment(net, cfg);
  ASSERT_EQ(rows.size(), 6u);
  const double opt1 = optimal_throughput(source_distribution(net), ExpectedRankTable(net.outgoing(1)), 8.0, 8);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].link_or_hop, static_cast<int>(k % 3) + 1);
    EXPECT_EQ(rows[k].optimal, opt1);
    EXPECT_EQ(rows[k].trials + rows[k].failures, 3);
  }
  // Information only leaks away down the line.
  EXPECT_LE(rows[2].mean_throughput, rows[0].mean_throughput + 1e-12);
  const auto again = run_hop_experiment(net, cfg);
  for (std::size_t k = 0; k < rows.size(); ++k) EXPECT_EQ(rows[k].throughputs, again[k].throughputs);
}

TEST(Experiment, ConfigValidation) {
  TrialConfig cfg;
  cfg.trials = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = TrialConfig{};
  cfg.links = {11};
  EXPECT_THROW(run_sample_size_experiment(LineNetwork::uniform(10, 0.2, 16, 16.0), cfg), InvalidArgument);
}

TEST(Experiment, SingleHopMatchesFirstLink) {
  const auto net = LineNetwork::uniform(1, 0.2, 8, 8.0);
  TrialConfig cfg;
  cfg.links = {1};
  cfg.trials = 3;
  cfg.sample_sizes = {10};
  cfg.calibration_draws = 500;
  const auto hops = run_hop_experiment(net, cfg);
  const auto links = run_sample_size_experiment(net, cfg);
  ASSERT_EQ(hops.size(), links.size());
  for (std::size_t k = 0; k < hops.size(); ++k) {
    EXPECT_EQ(hops[k].method, links[k].method);
    EXPECT_EQ(hops[k].throughputs, links[k].throughputs);
    EXPECT_EQ(hops[k].mse, links[k].mse);
  }
}
