#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "shiftband/rng.hpp"
#include "shiftband/types.hpp"

namespace shiftband::env {

enum class NoiseKind { kBernoulli, kUniform, kDeterministic };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kBernoulli;
  // Half-width for the uniform family. The effective half-width at (t, a)
  // is min(halfwidth, mu, 1 - mu) so the support stays inside [0, 1] and
  // the mean is exactly mu.
  double halfwidth = 0.1;
};

// Immutable per-round, per-arm reward distributions with queryable true
// means. Means are materialized as an explicit T x K matrix; safe to share
// across concurrent trials.
class RewardModel {
 public:
  RewardModel(Round horizon, int num_arms, std::vector<double> means,
              std::vector<NoiseSpec> noise_per_arm);

  Round horizon() const { return horizon_; }
  int num_arms() const { return num_arms_; }

  // True mean mu_t(a); t in [1, T], a in [0, K). Out of range throws.
  double mean(Round t, Arm a) const;

  // One reward draw Y_t(a) from the (t, a) noise family; always in [0, 1]
  // with expectation mean(t, a).
  double sample(Round t, Arm a, rng::Stream& stream) const;

  const NoiseSpec& noise(Arm a) const { return noise_[static_cast<size_t>(a)]; }

  // Row-major means, index (t-1)*K + a.
  const std::vector<double>& means_flat() const { return means_; }

  // Hash of (T, K, mean matrix bits); used to bind ground-truth
  // annotations to the environment they were computed from.
  std::uint64_t matrix_hash() const { return hash_; }

 private:
  void check_range(Round t, Arm a) const;

  Round horizon_;
  int num_arms_;
  std::vector<double> means_;
  std::vector<NoiseSpec> noise_;
  std::uint64_t hash_;
};

enum class EnvKind { kPiecewise, kDrifting, kCustom };

// Declarative environment description. Expansion is deterministic: the
// same spec always yields a bitwise-identical mean matrix.
struct EnvSpec {
  EnvKind kind = EnvKind::kPiecewise;
  Round T = 0;
  int K = 0;
  std::uint64_t seed = 0;

  // piecewise, explicit segments: boundary rounds are the first round of
  // the new segment (change visible as mu_t != mu_{t-1}); given either as
  // absolute rounds in (1, T] or as fractions of T.
  std::vector<Round> boundaries;
  std::vector<double> boundaries_frac;
  std::vector<std::vector<double>> segment_means;

  // piecewise, random: draws boundaries and per-segment means from seed.
  int num_segments = 0;  // > 0 selects the random form
  double min_gap = 0.0;

  // drifting
  double tv_budget = -1.0;
  std::string drift_path = "random_walk";

  // custom
  std::vector<std::vector<double>> mean_rows;

  // Noise family: one entry applied to all arms, or K entries.
  std::vector<NoiseSpec> noise{NoiseSpec{}};
};

// Generators. All validate their parameters and throw std::invalid_argument
// on infeasible configurations.

// Random piecewise-stationary model: num_segments - 1 boundaries drawn
// without replacement; each segment has a unique best arm whose mean
// exceeds every other arm's by at least min_gap; consecutive segments have
// different best arms, so every boundary is a visible change of size
// >= min_gap in some arm.
RewardModel gen_piecewise(std::uint64_t seed, Round T, int K, int num_segments,
                          double min_gap,
                          const std::vector<NoiseSpec>& noise = {NoiseSpec{}});

// Drifting model: per-arm random walk whose step magnitudes are rescaled
// before walking so the realized total variation equals tv_budget; steps
// that would leave [0, 1] are reflected in direction, preserving their
// magnitude.
RewardModel gen_drifting(std::uint64_t seed, Round T, int K, double tv_budget,
                         const std::vector<NoiseSpec>& noise = {NoiseSpec{}});

// Wraps an explicit matrix verbatim. Entries outside [0, 1] throw.
RewardModel gen_custom(const std::vector<std::vector<double>>& mean_rows,
                       const std::vector<NoiseSpec>& noise = {NoiseSpec{}});

// Explicit piecewise model from boundaries + per-segment mean vectors.
RewardModel make_piecewise(Round T, int K, const std::vector<Round>& boundaries,
                           const std::vector<std::vector<double>>& segment_means,
                           const std::vector<NoiseSpec>& noise = {NoiseSpec{}});

RewardModel expand(const EnvSpec& spec);

// Expansion with the horizon overridden, for horizon sweeps over one spec
// family. Fractional boundaries and seeded kinds regenerate at T; explicit
// matrices/boundaries require T <= spec.T and are reused as-is.
RewardModel expand_for_horizon(const EnvSpec& spec, Round T);

// JSON (de)serialization; parsing is strict and rejects unknown fields
// with the offending path in the message.
EnvSpec parse_env_spec(const std::string& json_text);
std::string env_spec_to_json(const EnvSpec& spec);

// CSV export, header "t,arm_1,...,arm_K", one row per round, fixed
// 10-decimal formatting for byte reproducibility.
void write_mean_matrix_csv(std::ostream& out, const RewardModel& model);

}  // namespace shiftband::env
