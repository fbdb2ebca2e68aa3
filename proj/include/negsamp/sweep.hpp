#pragma once

#include <algorithm>
#include <future>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "negsamp/config.hpp"
#include "negsamp/train.hpp"

namespace negsamp {

/// Grid file = base run config plus grid.* lists; the sweep is the cross
/// product seeds x samplers x weightings x negatives, in that nesting order.
inline std::vector<ExperimentConfig> expand_grid(const KVConfig& kv) {
  KVConfig base = kv;
  auto list_or = [&](const std::string& key, const std::string& fallback_key,
                     const std::string& fallback_default) {
    auto items = kv.get_list(key);
    if (items.empty()) items.push_back(kv.get_or(fallback_key, fallback_default));
    return items;
  };
  const auto seeds = list_or("grid.seeds", "seed", "1");
  const auto samplers = list_or("grid.samplers", "sampling.kind", "within_batch");
  const auto weightings = list_or("grid.weightings", "weighting", "constant");
  const auto negatives = list_or("grid.negatives", "negatives", "32");

  std::vector<ExperimentConfig> configs;
  for (const auto& seed : seeds)
    for (const auto& sampler : samplers)
      for (const auto& weighting : weightings)
        for (const auto& m : negatives) {
          KVConfig one = base;
          one.set("seed", seed);
          one.set("sampling.kind", sampler);
          one.set("weighting", weighting);
          one.set("negatives", m);
          configs.push_back(ExperimentConfig::from_kv(one));
        }
  return configs;
}

struct SweepOutcome {
  int config_id = 0;
  ExperimentConfig config;
  bool ok = false;
  std::string error;  // set when ok is false
  RunResult result;   // valid when ok
};

/// Runs every config, a bounded number at a time. Failures are recorded and
/// the sweep continues; outcomes come back ordered by config index.
inline std::vector<SweepOutcome> run_sweep(const std::vector<ExperimentConfig>& configs,
                                           int jobs = 0) {
  if (jobs <= 0)
    jobs = std::max(1u, std::thread::hardware_concurrency());
  std::counting_semaphore<> slots(jobs);

  std::vector<std::future<SweepOutcome>> futures;
  futures.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    futures.push_back(std::async(std::launch::async, [&configs, &slots, i] {
      slots.acquire();
      SweepOutcome outcome;
      outcome.config_id = static_cast<int>(i);
      outcome.config = configs[i];
      try {
        outcome.result = run_experiment(configs[i]);
        outcome.ok = true;
      } catch (const std::exception& e) {
        outcome.error = e.what();
      }
      slots.release();
      return outcome;
    }));
  }
  std::vector<SweepOutcome> outcomes;
  outcomes.reserve(futures.size());
  for (auto& f : futures) outcomes.push_back(f.get());
  return outcomes;
}

}  // namespace negsamp
