#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shiftband/env.hpp"
#include "shiftband/ground_truth.hpp"
#include "shiftband/meta.hpp"
#include "shiftband/policy.hpp"

namespace shiftband::harness {

// Per-round expected-regret record of one trial. Increments come from the
// true means, r_t = max_a mu_t(a) - mu_t(pi_t), not from realized rewards.
struct RegretTrace {
  std::vector<double> increments;
  std::vector<Arm> arms;
  std::vector<double> rewards;  // observed rewards, kept for diagnostics
  TraceExtras extras;
  std::vector<Round> restart_rounds;
  std::map<Round, long> replay_counts;  // by scheduled duration

  double final_regret() const;
  std::vector<double> cumulative() const;
  Round rounds() const { return static_cast<Round>(increments.size()); }
};

// Drives the select/observe protocol for T rounds. `seed` feeds the
// environment-noise stream only; the policy carries its own randomness.
// Deterministic given (model, policy state, seed). Restart mechanism
// violations (a restart without all K master evictions in its episode)
// throw std::logic_error.
RegretTrace run_trial(const env::RewardModel& model, Policy& policy,
                      std::uint64_t seed, Round T);

// Fails (std::logic_error) if any restart in the log is not preceded,
// within its episode, by master evictions covering all K arms.
void audit_restarts(const std::vector<Event>& events, int K);

struct ExperimentConfig {
  env::EnvSpec env;
  std::string policy_name = "meta";  // meta | meta-doubling | oracle | safe-singleton | uniform
  meta::EvictionConfig eviction;
  std::vector<Round> horizons;
  std::vector<std::uint64_t> seeds;
  int parallelism = 1;
  bool with_ground_truth = true;
  Round ground_truth_cap = ground_truth::kDefaultShiftScanCap;
  bool record_curve = false;
  Round curve_stride = 1;
};

struct TrialResult {
  Round T = 0;
  std::uint64_t seed = 0;
  double final_regret = 0.0;
  long num_restarts = 0;
  long num_replays = 0;
};

struct HorizonSummary {
  Round T = 0;
  double mean_regret = 0.0;
  double std_error = 0.0;  // sample std / sqrt(num seeds)
  long num_seeds = 0;
  std::vector<std::vector<Round>> restart_rounds;  // per seed
  std::map<Round, long> replay_counts;             // pooled across seeds
  std::vector<double> mean_curve;                  // optional, thinned

  // Ground-truth yardsticks (when computed).
  std::optional<long> num_shifts;
  std::optional<long> best_arm_switches;
  std::optional<double> total_variation;
  std::optional<ground_truth::TheoreticalBounds> bounds;
  std::optional<double> bound_ratio;  // mean_regret / (log^3 T * sum_sqrt)
};

struct ExperimentResult {
  std::vector<TrialResult> trials;         // ordered by (horizon, seed) cell
  std::vector<HorizonSummary> per_horizon;
  std::optional<double> scaling_exponent;  // when >= 3 horizons over >= 8x range
};

// Runs every (horizon, seed) cell, optionally across threads; results are
// merged by cell index so output is independent of scheduling.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Least-squares slope of log(mean_regret) against log(T).
// Requires >= 3 horizons spanning >= 8x; non-positive regrets are a
// domain error.
double fit_scaling_exponent(const std::vector<std::pair<Round, double>>& points);

// Offline concentration diagnostic: over sampled windows [s1, s2] and arm
// pairs, compares the realized estimator sum against the conditional mean
// reconstructed from true means and the recorded candidate sets, and
// reports the fraction exceeding c * log(T) * (sqrt(K (s2-s1)) + K) for a
// sweep of c values.
struct E1Report {
  long num_windows = 0;
  std::vector<double> c_grid;
  std::vector<double> violation_fraction;  // aligned with c_grid
  double max_normalized_deviation = 0.0;   // deviation / (log T (sqrt(K len) + K))
};

E1Report diagnostics_e1(const RegretTrace& trace, const env::RewardModel& model,
                        long num_windows, std::uint64_t seed,
                        std::vector<double> c_grid = {0.25, 0.5, 1.0, 2.0, 4.0});

// Builds a policy by config name. Ground-truth-backed policies take the
// annotation; reserved prior-work names are rejected explicitly.
std::unique_ptr<Policy> make_policy(
    const std::string& name, int K, Round T, const meta::EvictionConfig& eviction,
    std::uint64_t policy_seed,
    const ground_truth::PhaseAnnotation* annotation = nullptr);

// CSV rows "T,seed,final_regret,num_restarts,num_replays" with fixed
// 10-decimal formatting; JSON summary with means, SEs, slope, bound ratios
// and ground-truth quantities.
void write_trials_csv(std::ostream& out, const ExperimentResult& result);
std::string result_to_json(const ExperimentResult& result,
                           const ExperimentConfig& config);

}  // namespace shiftband::harness
