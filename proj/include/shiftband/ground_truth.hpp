#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shiftband/env.hpp"
#include "shiftband/types.hpp"

namespace shiftband::ground_truth {

// Thrown when an exact O(T^2 K) scan is requested above the configured cap.
class resource_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr Round kDefaultShiftScanCap = 20000;

// Ground-truth structural annotation of a reward model: shift times tau_i,
// per-phase first-trigger rounds e_a, last safe arms, plus the scalar
// summaries V and S. Computed from true means only.
struct PhaseAnnotation {
  Round horizon = 0;
  int num_arms = 0;

  // tau[0] = 1 < tau[1] < ... < tau[L+1] = T+1; L = tau.size() - 2 shifts.
  std::vector<Round> tau;

  // Per phase, the last arm to accumulate significant regret (ties broken
  // by smallest arm index). Size = number of phases.
  std::vector<Arm> last_safe_arm;

  // first_trigger[i][a]: earliest round s2 at which arm a accumulates
  // significant regret inside phase i; T+1 if never.
  std::vector<std::vector<Round>> first_trigger;

  double total_variation = 0.0;
  long best_arm_switches = 0;
  std::uint64_t env_hash = 0;

  long num_shifts() const { return static_cast<long>(tau.size()) - 2; }
  long num_phases() const { return static_cast<long>(tau.size()) - 1; }

  // Phase index containing round t.
  int phase_of(Round t) const;

  // Safe set G_t: arms that have not yet triggered within the phase of t.
  // Never empty inside a phase.
  std::vector<Arm> safe_set(Round t) const;
  bool is_safe(Round t, Arm a) const;
};

// Earliest s2 in (phase_start, T] such that some [s1, s2] with
// phase_start <= s1 < s2 has sum_{t=s1}^{s2} delta_t(a) >= sqrt(K*(s2-s1));
// nullopt if no such s2. Exhaustive over all intervals via prefix sums.
std::optional<Round> significant_regret_trigger(const env::RewardModel& model,
                                                Round phase_start, Arm a);

// The full recursion: given tau_i, e_a = trigger(tau_i, a) for every arm;
// if some arm never triggers the phase is final, else
// tau_{i+1} = max_a e_a. O(T^2 K); refuses to run above `cap`.
PhaseAnnotation compute_significant_shifts(const env::RewardModel& model,
                                           Round cap = kDefaultShiftScanCap);

// V = sum_{t=2}^{T} max_a |mu_t(a) - mu_{t-1}(a)|.
double compute_total_variation(const env::RewardModel& model);

// S = number of rounds t >= 2 where the argmax arm changes (ties broken by
// smallest index before comparison).
long count_best_arm_switches(const env::RewardModel& model);

struct TheoreticalBounds {
  double sum_sqrt = 0.0;      // sum_i sqrt(K * (tau_{i+1} - tau_i))
  double jensen_bound = 0.0;  // sqrt((L+1) * K * T)
  double tv_bound = 0.0;      // sqrt(K*T) + (2*K*V)^(1/3) * T^(2/3)
};

// Unscaled yardsticks; callers add C * log^3(T) factors as needed.
TheoreticalBounds theoretical_bounds(const PhaseAnnotation& annotation, int K,
                                     Round T);

// Convenience: shifts + V + S in one annotation.
PhaseAnnotation annotate(const env::RewardModel& model,
                         Round cap = kDefaultShiftScanCap);

// JSON round-trip for the annotation (arms serialized 1-based).
std::string annotation_to_json(const PhaseAnnotation& annotation);
PhaseAnnotation parse_annotation(const std::string& json_text);

}  // namespace shiftband::ground_truth
