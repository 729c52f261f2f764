#pragma once

// Run configuration (JSON document), validation, hashing and run manifests.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include <json.hpp>

#include "drorecode/error.hpp"
#include "drorecode/netsim.hpp"

namespace drorecode {

struct RunConfig {
  int batch_size = 16;                          // M
  double t_avg = 16.0;
  double loss_rate = 0.2;                       // used for every link unless loss_rates is set
  std::vector<double> loss_rates;               // optional, hops + 1 entries
  int hops = 10;                                // H
  std::optional<double> source_packets;         // t0, defaults to t_avg
  int sample_size = 15;                         // N for solve / fig2
  std::vector<int> sample_sizes{5, 10, 15, 20, 25, 30};  // fig1 grid
  int trials = 10;                              // T
  double eta = 0.95;
  int calibration_draws = 10000;                // L
  double tol = 1e-6;
  long max_iter = 200000;
  int precondition_passes = 10;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string experiment = "fig1";              // fig1 | fig2
  std::vector<int> links{1, 4, 7, 10};
  std::vector<double> fig2_t_avg{16.0, 20.0};
  std::vector<std::string> methods{"SAA-primal", "SAA-LP", "DRO"};
  bool tune_saa_primal = false;

  void validate() const {
    auto fail = [](const std::string& key, const std::string& why) { throw ParseError("config '" + key + "': " + why); };
    if (batch_size < 1 || batch_size > 256) fail("batch_size", "must lie in [1, 256]");
    if (!(t_avg > 0.0) || !std::isfinite(t_avg)) fail("t_avg", "must be positive");
    if (!(loss_rate >= 0.0 && loss_rate < 1.0)) fail("loss_rate", "must lie in [0, 1)");
    if (hops < 1) fail("hops", "must be >= 1");
    if (!loss_rates.empty()) {
      if (loss_rates.size() != static_cast<std::size_t>(hops) + 1) fail("loss_rates", "needs hops + 1 entries");
      for (double p : loss_rates)
        if (!(p >= 0.0 && p < 1.0)) fail("loss_rates", "entries must lie in [0, 1)");
    }
    if (source_packets && !(*source_packets >= 0.0 && std::isfinite(*source_packets)))
      fail("source_packets", "must be >= 0");
    if (sample_size < 1) fail("sample_size", "must be >= 1");
    if (sample_sizes.empty()) fail("sample_sizes", "must not be empty");
    for (int n : sample_sizes)
      if (n < 1) fail("sample_sizes", "entries must be >= 1");
    if (trials < 1) fail("trials", "must be >= 1");
    if (!(eta > 0.0 && eta < 1.0)) fail("eta", "must lie in (0, 1)");
    if (calibration_draws < 1) fail("calibration_draws", "must be >= 1");
    if (!(tol > 0.0)) fail("tol", "must be positive");
    if (max_iter < 1) fail("max_iter", "must be >= 1");
    if (precondition_passes < 0) fail("precondition_passes", "must be >= 0");
    if (output_dir.empty()) fail("output_dir", "must not be empty");
    if (experiment != "fig1" && experiment != "fig2") fail("experiment", "must be 'fig1' or 'fig2'");
    if (links.empty()) fail("links", "must not be empty");
    for (int l : links)
      if (l < 1 || l > hops) fail("links", "entries must lie in [1, hops]");
    if (fig2_t_avg.empty()) fail("fig2_t_avg", "must not be empty");
    for (double t : fig2_t_avg)
      if (!(t > 0.0)) fail("fig2_t_avg", "entries must be positive");
    if (methods.empty()) fail("methods", "must not be empty");
    for (const auto& m : methods) {
      try {
        parse_method(m);
      } catch (const InvalidArgument&) {
        fail("methods", "unknown method '" + m + "'");
      }
    }
  }

  LineNetwork network(double budget) const {
    LineNetwork net;
    net.hops = hops;
    if (loss_rates.empty())
      net.links.assign(static_cast<std::size_t>(hops) + 1, ChannelModel(loss_rate, batch_size));
    else
      for (double p : loss_rates) net.links.emplace_back(p, batch_size);
    net.t_avg = budget;
    net.source_packets = source_packets.value_or(budget);
    net.validate();
    return net;
  }
  LineNetwork network() const { return network(t_avg); }

  DroOptions solver_options() const {
    DroOptions o;
    o.pdhg.tol = tol;
    o.pdhg.max_iter = max_iter;
    o.precondition_passes = precondition_passes;
    return o;
  }

  TrialConfig trial_config() const {
    TrialConfig c;
    c.sample_sizes = experiment == "fig2" ? std::vector<int>{sample_size} : sample_sizes;
    c.trials = trials;
    c.methods.clear();
    for (const auto& m : methods) c.methods.push_back(parse_method(m));
    c.eta = eta;
    c.calibration_draws = calibration_draws;
    c.seed = seed;
    c.links = links;
    c.tune_saa_primal = tune_saa_primal;
    c.solver = solver_options();
    return c;
  }
};

namespace detail {

template <class T>
T config_value(const nlohmann::json& j, const char* key) {
  bool ok = true;
  if constexpr (std::is_same_v<T, bool>) ok = j.is_boolean();
  else if constexpr (std::is_unsigned_v<T>) ok = j.is_number_unsigned();
  else if constexpr (std::is_integral_v<T>) ok = j.is_number_integer();
  else if constexpr (std::is_floating_point_v<T>) ok = j.is_number();
  else if constexpr (std::is_same_v<T, std::string>) ok = j.is_string();
  else ok = j.is_array();
  if (!ok) throw ParseError(std::string("config '") + key + "': wrong type");
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(std::string("config '") + key + "': wrong type");
  }
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["batch_size"] = c.batch_size;
  j["t_avg"] = c.t_avg;
  j["loss_rate"] = c.loss_rate;
  j["loss_rates"] = c.loss_rates;
  j["hops"] = c.hops;
  j["source_packets"] = c.source_packets ? nlohmann::json(*c.source_packets) : nlohmann::json(nullptr);
  j["sample_size"] = c.sample_size;
  j["sample_sizes"] = c.sample_sizes;
  j["trials"] = c.trials;
  j["eta"] = c.eta;
  j["calibration_draws"] = c.calibration_draws;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["precondition_passes"] = c.precondition_passes;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["experiment"] = c.experiment;
  j["links"] = c.links;
  j["fig2_t_avg"] = c.fig2_t_avg;
  j["methods"] = c.methods;
  j["tune_saa_primal"] = c.tune_saa_primal;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  RunConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& v = it.value();
    const char* k = key.c_str();
    if (key == "batch_size") c.batch_size = detail::config_value<int>(v, k);
    else if (key == "t_avg") c.t_avg = detail::config_value<double>(v, k);
    else if (key == "loss_rate") c.loss_rate = detail::config_value<double>(v, k);
    else if (key == "loss_rates") c.loss_rates = detail::config_value<std::vector<double>>(v, k);
    else if (key == "hops") c.hops = detail::config_value<int>(v, k);
    else if (key == "source_packets") {
      if (v.is_null()) c.source_packets.reset();
      else c.source_packets = detail::config_value<double>(v, k);
    }
    else if (key == "sample_size") c.sample_size = detail::config_value<int>(v, k);
    else if (key == "sample_sizes") c.sample_sizes = detail::config_value<std::vector<int>>(v, k);
    else if (key == "trials") c.trials = detail::config_value<int>(v, k);
    else if (key == "eta") c.eta = detail::config_value<double>(v, k);
    else if (key == "calibration_draws") c.calibration_draws = detail::config_value<int>(v, k);
    else if (key == "tol") c.tol = detail::config_value<double>(v, k);
    else if (key == "max_iter") c.max_iter = detail::config_value<long>(v, k);
    else if (key == "precondition_passes") c.precondition_passes = detail::config_value<int>(v, k);
    else if (key == "seed") c.seed = detail::config_value<std::uint64_t>(v, k);
    else if (key == "output_dir") c.output_dir = detail::config_value<std::string>(v, k);
    else if (key == "experiment") c.experiment = detail::config_value<std::string>(v, k);
    else if (key == "links") c.links = detail::config_value<std::vector<int>>(v, k);
    else if (key == "fig2_t_avg") c.fig2_t_avg = detail::config_value<std::vector<double>>(v, k);
    else if (key == "methods") c.methods = detail::config_value<std::vector<std::string>>(v, k);
    else if (key == "tune_saa_primal") c.tune_saa_primal = detail::config_value<bool>(v, k);
    else throw ParseError("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

/// FNV-1a over the canonical (sorted-key, compact) JSON form.
inline std::uint64_t config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

struct FailedTrials {
  std::string file;
  std::string method;
  int link_or_hop = 0;
  int sample_size = 0;
  int failures = 0;
};

inline nlohmann::json make_manifest(const RunConfig& c, const std::string& version,
                                    const std::vector<std::string>& outputs,
                                    const std::vector<FailedTrials>& failed) {
  nlohmann::json j;
  j["version"] = version;
  j["config_hash"] = hex64(config_hash(c));
  j["seed"] = c.seed;
  j["config"] = to_json(c);
  j["outputs"] = outputs;
  nlohmann::json f = nlohmann::json::array();
  for (const auto& x : failed)
    f.push_back({{"file", x.file}, {"method", x.method}, {"link_or_hop", x.link_or_hop}, {"N", x.sample_size},
                 {"failures", x.failures}});
  j["failed_trials"] = f;
  j["status"] = failed.empty() ? "complete" : "partial";
  return j;
}

}  // namespace drorecode
