#include "doctest.h"
#include "shiftband/env.hpp"
#include "shiftband/ground_truth.hpp"

#include <cmath>
#include <sstream>

using namespace shiftband;
using env::EnvSpec;
using env::NoiseKind;
using env::NoiseSpec;
using env::RewardModel;

namespace {

RewardModel constant_model(Round T, std::vector<double> mu, NoiseSpec noise) {
  std::vector<std::vector<double>> rows(static_cast<size_t>(T), mu);
  return env::gen_custom(rows, {noise});
}

}  // namespace

TEST_CASE("mean lookup on constant and piecewise models") {
  const auto c = constant_model(10, {0.5}, {NoiseKind::kDeterministic, 0});
  CHECK(c.mean(7, 0) == 0.5);

  // Boundary round belongs to the new segment.
  const auto pw = env::make_piecewise(100, 2, {50}, {{0.9, 0.1}, {0.1, 0.9}});
  CHECK(pw.mean(49, 0) == 0.9);
  CHECK(pw.mean(50, 0) == 0.1);
  CHECK(pw.mean(50, 1) == 0.9);
}

TEST_CASE("mean range errors") {
  const auto c = constant_model(10, {0.5, 0.5}, {NoiseKind::kBernoulli, 0});
  CHECK_THROWS_AS(c.mean(0, 0), std::out_of_range);
  CHECK_THROWS_AS(c.mean(11, 0), std::out_of_range);
  CHECK_THROWS_AS(c.mean(1, 2), std::out_of_range);
  CHECK_THROWS_AS(c.mean(1, -1), std::out_of_range);
}

TEST_CASE("custom matrix is wrapped verbatim") {
  const std::vector<std::vector<double>> rows{{0.5}};
  const auto m = env::gen_custom(rows);
  CHECK(m.horizon() == 1);
  CHECK(m.num_arms() == 1);
  CHECK(m.mean(1, 0) == 0.5);

  CHECK_THROWS_AS(env::gen_custom({{0.1, 1.2}}), std::invalid_argument);

  rng::Stream gen(3, rng::kGenerator);
  std::vector<std::vector<double>> big(37, std::vector<double>(4));
  for (auto& row : big)
    for (auto& x : row) x = gen.next_uniform01();
  const auto wrapped = env::gen_custom(big);
  for (Round t = 1; t <= 37; ++t) {
    for (Arm a = 0; a < 4; ++a) {
      CHECK(wrapped.mean(t, a) ==
            big[static_cast<size_t>(t - 1)][static_cast<size_t>(a)]);
    }
  }
}

TEST_CASE("sampling: deterministic and degenerate families") {
  const auto det = constant_model(5, {0.3}, {NoiseKind::kDeterministic, 0});
  rng::Stream s(1, rng::kEnvNoise);
  for (int i = 0; i < 10; ++i) CHECK(det.sample(1, 0, s) == 0.3);

  const auto one = constant_model(5, {1.0}, {NoiseKind::kBernoulli, 0});
  for (int i = 0; i < 10; ++i) CHECK(one.sample(1, 0, s) == 1.0);
}

TEST_CASE("sampling: bernoulli empirical mean within the 3-sigma band") {
  const auto m = constant_model(1, {0.6}, {NoiseKind::kBernoulli, 0});
  rng::Stream s(11, rng::kEnvNoise);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += m.sample(1, 0, s);
  CHECK(std::abs(sum / n - 0.6) < 0.005);  // 3 sigma = 3*sqrt(0.24/1e5) ~ 0.0046
}

TEST_CASE("sampling: uniform family keeps support and mean") {
  const auto m = constant_model(1, {0.05, 0.5}, {NoiseKind::kUniform, 0.2});
  rng::Stream s(12, rng::kEnvNoise);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double y = m.sample(1, 0, s);  // halfwidth shrinks to 0.05 here
    CHECK(y >= 0.0);
    CHECK(y <= 0.1);
    sum += y;
  }
  CHECK(std::abs(sum / n - 0.05) < 3.0 * (0.05 / std::sqrt(3.0)) / std::sqrt(n));
}

TEST_CASE("gen_piecewise: stationary single segment") {
  const auto m = env::gen_piecewise(17, 200, 3, 1, 0.5);
  CHECK(ground_truth::compute_total_variation(m) == 0.0);
  CHECK(ground_truth::count_best_arm_switches(m) == 0);
}

TEST_CASE("gen_piecewise: one boundary with a visible change >= min_gap") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = env::gen_piecewise(seed, 80, 2, 2, 0.6);
    int change_rounds = 0;
    double change = 0.0;
    for (Round t = 2; t <= 80; ++t) {
      double diff = 0.0;
      for (Arm a = 0; a < 2; ++a) {
        diff = std::max(diff, std::abs(m.mean(t, a) - m.mean(t - 1, a)));
      }
      if (diff > 0.0) {
        ++change_rounds;
        change = diff;
      }
    }
    CHECK(change_rounds == 1);
    CHECK(change >= 0.6);
  }
}

TEST_CASE("gen_piecewise: per-segment margin holds") {
  const auto m = env::gen_piecewise(23, 300, 4, 5, 0.3);
  for (Round t = 1; t <= 300; ++t) {
    double best = 0.0, second = 0.0;
    for (Arm a = 0; a < 4; ++a) {
      const double mu = m.mean(t, a);
      if (mu > best) {
        second = best;
        best = mu;
      } else {
        second = std::max(second, mu);
      }
    }
    CHECK(best - second >= 0.3);
  }
}

TEST_CASE("gen_piecewise: determinism and parameter validation") {
  const auto a = env::gen_piecewise(99, 150, 2, 3, 0.4);
  const auto b = env::gen_piecewise(99, 150, 2, 3, 0.4);
  CHECK(a.means_flat() == b.means_flat());
  CHECK(a.matrix_hash() == b.matrix_hash());

  CHECK_THROWS_AS(env::gen_piecewise(1, 10, 2, 11, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(env::gen_piecewise(1, 10, 2, 2, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(env::gen_piecewise(1, 10, 2, 2, 0.0), std::invalid_argument);
}

TEST_CASE("gen_drifting: zero budget is constant") {
  const auto m = env::gen_drifting(5, 100, 2, 0.0);
  CHECK(ground_truth::compute_total_variation(m) == 0.0);
}

TEST_CASE("gen_drifting: realized variation matches the budget within 1%") {
  const auto m = env::gen_drifting(41, 1000, 2, 3.0);
  const double v = ground_truth::compute_total_variation(m);
  CHECK(v >= 2.97);
  CHECK(v <= 3.03);

  const auto again = env::gen_drifting(41, 1000, 2, 3.0);
  CHECK(m.means_flat() == again.means_flat());
}

TEST_CASE("all generated means and samples stay in [0,1]") {
  const auto models = {env::gen_piecewise(3, 400, 3, 4, 0.2),
                       env::gen_drifting(3, 400, 3, 5.0),
                       env::gen_drifting(4, 400, 2, 20.0)};
  for (const auto& m : models) {
    for (double mu : m.means_flat()) {
      CHECK(mu >= 0.0);
      CHECK(mu <= 1.0);
    }
    rng::Stream s(8, rng::kEnvNoise);
    for (int i = 0; i < 10000; ++i) {
      const Round t = 1 + (i % m.horizon());
      const Arm a = static_cast<Arm>(i % m.num_arms());
      const double y = m.sample(t, a, s);
      CHECK(y >= 0.0);
      CHECK(y <= 1.0);
    }
  }
}

TEST_CASE("env spec JSON round-trip and deterministic expansion") {
  const std::string text = R"({
    "kind": "piecewise", "T": 120, "K": 2, "seed": 7,
    "random": {"num_segments": 3, "min_gap": 0.5},
    "noise": "bernoulli"
  })";
  const auto spec = env::parse_env_spec(text);
  const auto m1 = env::expand(spec);
  const auto m2 = env::expand(env::parse_env_spec(env::env_spec_to_json(spec)));
  CHECK(m1.means_flat() == m2.means_flat());
}

TEST_CASE("env spec rejects unknown fields with a path") {
  const std::string text = R"({"kind":"piecewise","T":10,"K":2,"seed":1,
    "random":{"num_segments":2,"min_gap":0.5},"bogus":3})";
  CHECK_THROWS_WITH_AS(env::parse_env_spec(text),
                       doctest::Contains("env.bogus"), std::invalid_argument);

  const std::string nested = R"({"kind":"piecewise","T":10,"K":2,"seed":1,
    "random":{"num_segments":2,"min_gap":0.5,"oops":1}})";
  CHECK_THROWS_WITH_AS(env::parse_env_spec(nested),
                       doctest::Contains("env.random.oops"),
                       std::invalid_argument);
}

TEST_CASE("explicit segments support fractional boundaries across horizons") {
  const std::string text = R"({
    "kind": "piecewise", "T": 64, "K": 2, "seed": 0,
    "segments": {"boundaries_frac": [0.5], "means": [[0.8, 0.2], [0.2, 0.8]]}
  })";
  const auto spec = env::parse_env_spec(text);
  const auto small = env::expand(spec);
  CHECK(small.mean(32, 0) == 0.8);
  CHECK(small.mean(33, 0) == 0.2);
  const auto big = env::expand_for_horizon(spec, 128);
  CHECK(big.horizon() == 128);
  CHECK(big.mean(64, 0) == 0.8);
  CHECK(big.mean(65, 0) == 0.2);
}

TEST_CASE("custom env specs validate matrix dimensions") {
  const std::string good = R"({"kind":"custom","T":2,"K":2,"seed":0,
    "means":[[0.1,0.9],[0.9,0.1]],"noise":"deterministic"})";
  const auto m = env::expand(env::parse_env_spec(good));
  CHECK(m.mean(2, 0) == 0.9);

  const std::string bad_t = R"({"kind":"custom","T":3,"K":2,"seed":0,
    "means":[[0.1,0.9],[0.9,0.1]]})";
  CHECK_THROWS_AS(env::parse_env_spec(bad_t), std::invalid_argument);
  const std::string bad_k = R"({"kind":"custom","T":2,"K":3,"seed":0,
    "means":[[0.1,0.9],[0.9,0.1]]})";
  CHECK_THROWS_AS(env::parse_env_spec(bad_k), std::invalid_argument);
}

TEST_CASE("mean matrix CSV has the pinned header and stable formatting") {
  const auto m = constant_model(3, {0.25, 0.75}, {NoiseKind::kBernoulli, 0});
  std::ostringstream out;
  env::write_mean_matrix_csv(out, m);
  const std::string expected =
      "t,arm_1,arm_2\n"
      "1,0.2500000000,0.7500000000\n"
      "2,0.2500000000,0.7500000000\n"
      "3,0.2500000000,0.7500000000\n";
  CHECK(out.str() == expected);
}
