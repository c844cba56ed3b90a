#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "shiftband/policy.hpp"
#include "shiftband/rng.hpp"
#include "shiftband/types.hpp"

namespace shiftband::meta {

enum class ThresholdVariant { kMain, kRemark };
enum class ScanMode { kExact, kDyadic };

inline constexpr double kDefaultC0 = 4.0;

struct EvictionConfig {
  double c0 = kDefaultC0;
  ThresholdVariant variant = ThresholdVariant::kMain;
  ScanMode scan = ScanMode::kDyadic;
};

// Eviction threshold as a function of the window length s2 - s1.
//   main:   log(T) * sqrt(C0 * max(K*len, K^2))
//   remark: sqrt(C0 * max(K*log(T)*len, K^2*log(T)^2))
// Logs are natural.
double eviction_threshold(Round window_len, int K, Round T,
                          const EvictionConfig& cfg);

// Importance-weighted prefix sums P(b, t) = sum_{s<=t} |A_s| * Y_s * 1{pi_s = b};
// rounds must be recorded in order starting at 1.
class PrefixSums {
 public:
  PrefixSums(int K, Round capacity);

  void record(Round t, Arm played, double weight);

  // P(b, s2) - P(b, s1 - 1); requires 1 <= s1 <= s2 <= rounds_recorded().
  double range_sum(Arm b, Round s1, Round s2) const;

  Round rounds_recorded() const { return recorded_; }
  int num_arms() const { return K_; }

 private:
  int K_;
  Round capacity_;
  Round recorded_ = 0;
  std::vector<double> table_;  // (capacity+1) rows of K
};

// Sum over [s1, s2] of the importance-weighted gap estimates
// delta_hat_t(a_prime, a); decomposes as a difference of per-arm range sums.
double gap_estimate_sum(const PrefixSums& sums, Arm a_prime, Arm a, Round s1,
                        Round s2);

// s1 grid scanned at endpoint s2 with window start w_start:
//   exact:  every s1 in [w_start, s2]
//   dyadic: {s2 + 1 - 2^j : j >= 0} intersected with [w_start, s2], plus w_start
std::vector<Round> scan_start_points(Round w_start, Round s2, ScanMode mode);

// True iff some scanned [s1, s2 = now-1] with w_start <= s1 has
// max_b [gap_estimate_sum(b, a, s1, s2)] > threshold(s2 - s1). Only the new
// endpoint s2 = now-1 is scanned; older endpoints were scanned when new.
bool eviction_trigger(const PrefixSums& sums, Arm a, Round w_start, Round now,
                      Round T, const EvictionConfig& cfg);

// Per-arm batch form; entry a holds the witness s1 if arm a triggers at
// endpoint s2 = now-1, nullopt otherwise.
std::vector<std::optional<Round>> eviction_scan(const PrefixSums& sums,
                                                Round w_start, Round now, Round T,
                                                const EvictionConfig& cfg);

// Bernoulli replay schedule of one episode: duration m in {2,4,...,2^ceil(log2 T)}
// fires at offset s - t_l with probability min(1, 1/sqrt(m*(s - t_l))).
// Draws are pure functions of (key, offset, duration), so queries are
// idempotent and order-independent.
class ReplaySchedule {
 public:
  ReplaySchedule(std::uint64_t key, Round T);

  const std::vector<Round>& durations() const { return durations_; }
  bool fires(Round offset, Round duration) const;

  // Largest fired duration at this offset, or nullopt.
  std::optional<Round> largest_fired(Round offset) const;

 private:
  std::uint64_t key_;
  std::vector<Round> durations_;
};

// Test/diagnostic seam: when set, replaces the Bernoulli draws; returns the
// durations fired at (episode, offset since episode start).
using ScheduleOverride =
    std::function<std::vector<Round>(long episode, Round offset)>;

struct MetaOptions {
  EvictionConfig eviction;
  std::uint64_t seed = 0;
  bool record_candidates = true;  // per-round |A_t| and masks (masks need K <= 64)
  // When scanning dyadically, also evaluate the exact scan on the same
  // history and count dyadic-triggers-but-exact-does-not divergences.
  bool cross_check_exact = false;
  ScheduleOverride schedule_override;
};

// The adaptive-restart procedure: episodes with a master candidate set,
// a stack of elimination frames (bottom frame spans the episode, children
// are scheduled replays), importance-weighted gap estimates over shared
// prefix sums, per-round evictions, and a full restart when the master set
// empties.
class MetaPolicy final : public Policy {
 public:
  MetaPolicy(int K, Round horizon, MetaOptions options = {});
  ~MetaPolicy() override;

  Arm select_arm() override;
  void observe(Arm arm, double reward) override;

  std::string name() const override { return "meta"; }
  TraceExtras extras() const override;

  bool finished() const;
  Round current_round() const;
  long num_restarts() const;
  const std::vector<Event>& events() const;
  const PrefixSums& prefix_sums() const;
  long cross_check_violations() const;

  // Snapshot of the runtime state for tests and diagnostics.
  struct FrameView {
    Round start = 0;
    Round duration = 0;
    std::vector<Arm> candidates;
  };
  struct DebugView {
    long episode = 0;
    Round episode_start = 0;
    std::vector<Arm> master;
    std::vector<FrameView> frames;  // bottom first
  };
  DebugView debug_view() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

// Horizon-free wrapper: runs fresh inner policies with horizons 2, 4, 8, ...
// discarding state at each boundary; instance k covers global rounds
// [2^k - 1, 2^{k+1} - 2]. The factory receives (horizon, instance index).
using PolicyFactory =
    std::function<std::unique_ptr<Policy>(Round horizon, int instance)>;

class DoublingPolicy final : public Policy {
 public:
  explicit DoublingPolicy(PolicyFactory factory);
  ~DoublingPolicy() override;

  Arm select_arm() override;
  void observe(Arm arm, double reward) override;

  std::string name() const override { return "meta-doubling"; }
  TraceExtras extras() const override;

  Round inner_horizon() const;  // horizon of the active inner instance

 private:
  void ensure_instance();

  PolicyFactory factory_;
  std::unique_ptr<Policy> inner_;
  int instance_ = 0;        // active instance index k (horizon 2^k)
  Round inner_round_ = 0;   // local rounds consumed in the active instance
  Round global_round_ = 0;  // rounds consumed overall
  ProtocolGuard guard_;
  Arm pending_arm_ = -1;
  TraceExtras merged_;
};

}  // namespace shiftband::meta
