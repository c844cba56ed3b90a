#include "doctest.h"
#include "shiftband/baselines.hpp"

#include <cmath>

#include "shiftband/harness.hpp"

using namespace shiftband;
namespace gt = shiftband::ground_truth;

namespace {

env::RewardModel gapped_stationary(Round T) {
  return env::make_piecewise(T, 2, {}, {{0.9, 0.1}},
                             {{env::NoiseKind::kDeterministic, 0.0}});
}

}  // namespace

TEST_CASE("oracle converges to the best arm once the bad arm triggers") {
  const auto m = gapped_stationary(200);
  const auto ann = gt::annotate(m);
  // Arm 1 (gap 0.8) exits the safe set at its first trigger, round 2.
  CHECK(ann.first_trigger[0][1] == 2);
  CHECK(ann.safe_set(1) == std::vector<Arm>{0, 1});
  CHECK(ann.safe_set(2) == std::vector<Arm>{0});

  auto policy = baselines::oracle_policy(ann, 3);
  auto trace = harness::run_trial(m, *policy, 3, 200);
  for (Round t = 3; t <= 200; ++t) {
    CHECK(trace.arms[static_cast<size_t>(t - 1)] == 0);
  }
}

TEST_CASE("oracle on a single arm always plays it") {
  const auto m = env::gen_custom(std::vector<std::vector<double>>(20, {0.6}));
  const auto ann = gt::annotate(m);
  auto policy = baselines::oracle_policy(ann, 1);
  auto trace = harness::run_trial(m, *policy, 1, 20);
  for (Arm a : trace.arms) CHECK(a == 0);
}

TEST_CASE("safe set resets to the full arm set at a phase boundary") {
  const auto m = env::make_piecewise(100, 2, {51}, {{0.9, 0.1}, {0.1, 0.9}});
  const auto ann = gt::annotate(m);
  REQUIRE(ann.num_shifts() == 1);
  const Round tau1 = ann.tau[1];
  CHECK(ann.safe_set(tau1 - 1).size() == 1);
  CHECK(ann.safe_set(tau1).size() == 2);
}

TEST_CASE("singleton sequence plays the last safe arm deterministically") {
  const auto m = env::make_piecewise(100, 2, {51}, {{0.9, 0.1}, {0.1, 0.9}},
                                     {{env::NoiseKind::kDeterministic, 0.0}});
  const auto ann = gt::annotate(m);
  auto sets = baselines::singleton_safe_sequence(ann);
  auto policy = baselines::set_sequence_policy(sets, ann, 5);
  auto trace = harness::run_trial(m, *policy, 5, 100);
  for (Round t = 1; t <= 100; ++t) {
    const int phase = ann.phase_of(t);
    CHECK(trace.arms[static_cast<size_t>(t - 1)] ==
          ann.last_safe_arm[static_cast<size_t>(phase)]);
  }
}

TEST_CASE("set sequence with S_t = G_t draws the same arms as the oracle") {
  const auto m = gapped_stationary(150);
  const auto ann = gt::annotate(m);
  baselines::SafeSetSequence sets;
  for (Round t = 1; t <= 150; ++t) sets.push_back(ann.safe_set(t));
  auto seq = baselines::set_sequence_policy(sets, ann, 9);
  auto oracle = baselines::oracle_policy(ann, 9);
  auto trace_a = harness::run_trial(m, *seq, 9, 150);
  auto trace_b = harness::run_trial(m, *oracle, 9, 150);
  CHECK(trace_a.arms == trace_b.arms);
}

TEST_CASE("set sequence validation rejects growth mid-phase") {
  const auto m = gapped_stationary(50);
  const auto ann = gt::annotate(m);
  // Arm 1 triggers at round 2, so G_t = {0} from round 2 on. A set that
  // re-adds arm 1 later violates both safety and monotonicity.
  baselines::SafeSetSequence bad(50, std::vector<Arm>{0});
  bad[0] = {0, 1};
  bad[10] = {0, 1};
  CHECK_THROWS_AS(baselines::set_sequence_policy(bad, ann, 1),
                  std::invalid_argument);

  baselines::SafeSetSequence empty_set(50, std::vector<Arm>{0});
  empty_set[5] = {};
  CHECK_THROWS_AS(baselines::set_sequence_policy(empty_set, ann, 1),
                  std::invalid_argument);

  // Growth strictly inside one phase of a two-phase instance, using only
  // safe arms.
  const auto shifty = env::make_piecewise(100, 2, {51}, {{0.9, 0.1}, {0.1, 0.9}});
  const auto ann2 = gt::annotate(shifty);
  auto grower = baselines::singleton_safe_sequence(ann2);
  const Round tau1 = ann2.tau[1];
  grower[static_cast<size_t>(tau1 - 1 + 5)] = {0, 1};  // grows within phase 1
  CHECK_THROWS_WITH_AS(baselines::set_sequence_policy(grower, ann2, 1),
                       doctest::Contains("grows"), std::invalid_argument);
}

TEST_CASE("uniform policy: frequencies, K=1 degeneracy, determinism") {
  auto policy = baselines::uniform_policy(3, 123);
  std::vector<long> counts(3, 0);
  const long n = 60000;
  for (long i = 0; i < n; ++i) {
    const Arm a = policy->select_arm();
    ++counts[static_cast<size_t>(a)];
    policy->observe(a, 0.5);
  }
  const double p = 1.0 / 3.0;
  const double band = 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n));
  for (long c : counts) {
    CHECK(std::abs(static_cast<double>(c) / static_cast<double>(n) - p) < band);
  }

  auto single = baselines::uniform_policy(1, 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(single->select_arm() == 0);
    single->observe(0, 1.0);
  }

  auto u1 = baselines::uniform_policy(4, 77);
  auto u2 = baselines::uniform_policy(4, 77);
  for (int i = 0; i < 100; ++i) {
    const Arm a = u1->select_arm();
    const Arm b = u2->select_arm();
    CHECK(a == b);
    u1->observe(a, 0.0);
    u2->observe(b, 0.0);
  }
}

TEST_CASE("oracle regret stays below the phase-length bound on small instances") {
  // Small version of the oracle-bound acceptance criterion: 5 instances
  // (including a stationary one), 50 seeds each.
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    const auto m = env::gen_piecewise(inst, 500, 2 + static_cast<int>(inst % 3),
                                      1 + static_cast<int>(inst % 3), 0.4);
    const auto ann = gt::annotate(m);
    const auto bounds = gt::theoretical_bounds(ann, m.num_arms(), m.horizon());

    const int seeds = 50;
    double sum = 0.0, sum_sq = 0.0;
    for (int seed = 0; seed < seeds; ++seed) {
      auto policy = baselines::oracle_policy(ann, static_cast<std::uint64_t>(seed));
      const auto trace =
          harness::run_trial(m, *policy, static_cast<std::uint64_t>(seed), 500);
      const double r = trace.final_regret();
      sum += r;
      sum_sq += r * r;
    }
    const double mean = sum / seeds;
    const double var = std::max(0.0, (sum_sq - seeds * mean * mean) / (seeds - 1));
    const double se = std::sqrt(var / seeds);
    CHECK(mean <= std::log(static_cast<double>(m.num_arms())) * bounds.sum_sqrt +
                      3.0 * se);
  }
}

TEST_CASE("singleton last-safe-arm sequence obeys the same regret bound") {
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    const auto m = env::gen_piecewise(inst + 40, 600, 2, 1 + static_cast<int>(inst % 3),
                                      0.5);
    const auto ann = gt::annotate(m);
    const auto bounds = gt::theoretical_bounds(ann, m.num_arms(), m.horizon());
    const int seeds = 50;
    double sum = 0.0, sum_sq = 0.0;
    for (int seed = 0; seed < seeds; ++seed) {
      auto policy = baselines::set_sequence_policy(
          baselines::singleton_safe_sequence(ann), ann,
          static_cast<std::uint64_t>(seed));
      const double r =
          harness::run_trial(m, *policy, static_cast<std::uint64_t>(seed), 600)
              .final_regret();
      sum += r;
      sum_sq += r * r;
    }
    const double mean = sum / seeds;
    const double var = std::max(0.0, (sum_sq - seeds * mean * mean) / (seeds - 1));
    const double se = std::sqrt(var / seeds);
    CHECK(mean <= std::log(static_cast<double>(m.num_arms())) * bounds.sum_sqrt +
                      3.0 * se);
  }
}

TEST_CASE("the harness rejects a mismatched annotation") {
  const auto m = gapped_stationary(50);
  const auto other = env::make_piecewise(50, 2, {}, {{0.8, 0.2}});
  const auto ann = gt::annotate(other);
  auto policy = baselines::oracle_policy(ann, 1);
  CHECK_THROWS_AS(harness::run_trial(m, *policy, 1, 50), std::logic_error);
}
