#include "shiftband/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "shiftband/baselines.hpp"

namespace shiftband::harness {

double RegretTrace::final_regret() const {
  return std::accumulate(increments.begin(), increments.end(), 0.0);
}

std::vector<double> RegretTrace::cumulative() const {
  std::vector<double> out(increments.size());
  double acc = 0.0;
  for (size_t i = 0; i < increments.size(); ++i) {
    acc += increments[i];
    out[i] = acc;
  }
  return out;
}

void audit_restarts(const std::vector<Event>& events, int K) {
  std::set<Arm> evicted;
  bool in_episode = false;
  for (const Event& e : events) {
    switch (e.type) {
      case EventType::kEpisodeStart:
        evicted.clear();
        in_episode = true;
        break;
      case EventType::kEvictMaster:
        evicted.insert(e.arm);
        break;
      case EventType::kRestart:
        if (!in_episode || static_cast<int>(evicted.size()) != K) {
          throw std::logic_error(
              "restart at round " + std::to_string(e.round) + " with only " +
              std::to_string(evicted.size()) + "/" + std::to_string(K) +
              " master evictions in its episode");
        }
        in_episode = false;
        break;
      default:
        break;
    }
  }
}

RegretTrace run_trial(const env::RewardModel& model, Policy& policy,
                      std::uint64_t seed, Round T) {
  if (T < 1 || T > model.horizon()) {
    throw std::invalid_argument("run_trial: T outside [1, env horizon]");
  }
  if (auto h = policy.expected_env_hash(); h && *h != model.matrix_hash()) {
    throw std::logic_error(
        "run_trial: policy annotation does not match this environment");
  }

  rng::Stream env_stream(seed, rng::kEnvNoise);
  const int K = model.num_arms();

  RegretTrace trace;
  trace.increments.reserve(static_cast<size_t>(T));
  trace.arms.reserve(static_cast<size_t>(T));
  trace.rewards.reserve(static_cast<size_t>(T));
  for (Round t = 1; t <= T; ++t) {
    const Arm arm = policy.select_arm();
    const double reward = model.sample(t, arm, env_stream);
    policy.observe(arm, reward);
    double best = model.mean(t, 0);
    for (Arm a = 1; a < K; ++a) best = std::max(best, model.mean(t, a));
    trace.increments.push_back(best - model.mean(t, arm));
    trace.arms.push_back(arm);
    trace.rewards.push_back(reward);
  }

  trace.extras = policy.extras();
  for (const Event& e : trace.extras.events) {
    if (e.type == EventType::kRestart) trace.restart_rounds.push_back(e.round);
    if (e.type == EventType::kReplayStart) ++trace.replay_counts[e.m0];
  }
  audit_restarts(trace.extras.events, K);
  return trace;
}

std::unique_ptr<Policy> make_policy(
    const std::string& name, int K, Round T,
    const meta::EvictionConfig& eviction, std::uint64_t policy_seed,
    const ground_truth::PhaseAnnotation* annotation) {
  static const std::set<std::string> reserved = {"exp3s", "exp3.s", "sw-ucb",
                                                 "adswitch"};
  if (reserved.count(name)) {
    throw std::invalid_argument("policy '" + name +
                                "' is reserved for prior-work baselines and "
                                "not implemented");
  }
  if (name == "meta") {
    meta::MetaOptions opts;
    opts.eviction = eviction;
    opts.seed = policy_seed;
    opts.record_candidates = K <= 64;
    return std::make_unique<meta::MetaPolicy>(K, T, opts);
  }
  if (name == "meta-doubling") {
    return std::make_unique<meta::DoublingPolicy>(
        [K, eviction, policy_seed](Round horizon, int instance) {
          meta::MetaOptions opts;
          opts.eviction = eviction;
          opts.seed = rng::derive_key(policy_seed, rng::kPolicy,
                                      static_cast<std::uint64_t>(instance));
          opts.record_candidates = K <= 64;
          return std::make_unique<meta::MetaPolicy>(K, horizon, opts);
        });
  }
  if (name == "oracle") {
    if (!annotation) {
      throw std::invalid_argument("oracle policy requires a ground-truth annotation");
    }
    return baselines::oracle_policy(*annotation, policy_seed);
  }
  if (name == "safe-singleton") {
    if (!annotation) {
      throw std::invalid_argument(
          "safe-singleton policy requires a ground-truth annotation");
    }
    return baselines::set_sequence_policy(
        baselines::singleton_safe_sequence(*annotation), *annotation, policy_seed);
  }
  if (name == "uniform") return baselines::uniform_policy(K, policy_seed);
  throw std::invalid_argument("unknown policy '" + name + "'");
}

namespace {

struct CellOutput {
  TrialResult trial;
  std::vector<Round> restart_rounds;
  std::map<Round, long> replay_counts;
  std::vector<double> curve;  // thinned cumulative regret
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.horizons.empty()) throw std::invalid_argument("no horizons configured");
  if (config.seeds.empty()) throw std::invalid_argument("no seeds configured");
  if (config.curve_stride < 1) throw std::invalid_argument("curve_stride must be >= 1");

  struct HorizonContext {
    env::RewardModel model;
    std::optional<ground_truth::PhaseAnnotation> annotation;
  };
  std::vector<HorizonContext> contexts;
  contexts.reserve(config.horizons.size());
  for (Round T : config.horizons) {
    HorizonContext ctx{env::expand_for_horizon(config.env, T), std::nullopt};
    const bool needs_annotation = config.policy_name == "oracle" ||
                                  config.policy_name == "safe-singleton";
    if (config.with_ground_truth || needs_annotation) {
      ctx.annotation = ground_truth::annotate(ctx.model, config.ground_truth_cap);
    }
    contexts.push_back(std::move(ctx));
  }

  const size_t num_seeds = config.seeds.size();
  const size_t num_cells = config.horizons.size() * num_seeds;
  std::vector<CellOutput> cells(num_cells);

  auto run_cell = [&](size_t cell) {
    const size_t h = cell / num_seeds;
    const size_t s = cell % num_seeds;
    const Round T = config.horizons[h];
    const HorizonContext& ctx = contexts[h];
    const std::uint64_t seed = config.seeds[s];

    auto policy = make_policy(config.policy_name, ctx.model.num_arms(), T,
                              config.eviction, seed,
                              ctx.annotation ? &*ctx.annotation : nullptr);
    RegretTrace trace = run_trial(ctx.model, *policy, seed, T);

    CellOutput out;
    out.trial = {T, seed, trace.final_regret(),
                 static_cast<long>(trace.restart_rounds.size()), 0};
    for (const auto& [m, count] : trace.replay_counts) out.trial.num_replays += count;
    out.restart_rounds = trace.restart_rounds;
    out.replay_counts = trace.replay_counts;
    if (config.record_curve) {
      const auto cum = trace.cumulative();
      for (size_t i = static_cast<size_t>(config.curve_stride) - 1; i < cum.size();
           i += static_cast<size_t>(config.curve_stride)) {
        out.curve.push_back(cum[i]);
      }
    }
    cells[cell] = std::move(out);
  };

  const int workers =
      std::max(1, std::min<int>(config.parallelism, static_cast<int>(num_cells)));
  if (workers == 1) {
    for (size_t cell = 0; cell < num_cells; ++cell) run_cell(cell);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t cell = next.fetch_add(1); cell < num_cells;
             cell = next.fetch_add(1)) {
          run_cell(cell);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  ExperimentResult result;
  for (size_t h = 0; h < config.horizons.size(); ++h) {
    HorizonSummary summary;
    summary.T = config.horizons[h];
    summary.num_seeds = static_cast<long>(num_seeds);
    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> curve_sum;
    for (size_t s = 0; s < num_seeds; ++s) {
      const CellOutput& cell = cells[h * num_seeds + s];
      result.trials.push_back(cell.trial);
      sum += cell.trial.final_regret;
      sum_sq += cell.trial.final_regret * cell.trial.final_regret;
      summary.restart_rounds.push_back(cell.restart_rounds);
      for (const auto& [m, count] : cell.replay_counts) summary.replay_counts[m] += count;
      if (config.record_curve) {
        if (curve_sum.empty()) curve_sum.assign(cell.curve.size(), 0.0);
        for (size_t i = 0; i < cell.curve.size(); ++i) curve_sum[i] += cell.curve[i];
      }
    }
    const double n = static_cast<double>(num_seeds);
    summary.mean_regret = sum / n;
    if (num_seeds > 1) {
      const double var = std::max(0.0, (sum_sq - n * summary.mean_regret *
                                                     summary.mean_regret) /
                                           (n - 1.0));
      summary.std_error = std::sqrt(var / n);
    }
    if (config.record_curve) {
      for (double& v : curve_sum) v /= n;
      summary.mean_curve = std::move(curve_sum);
    }
    const auto& ann = contexts[h].annotation;
    if (ann) {
      summary.num_shifts = ann->num_shifts();
      summary.best_arm_switches = ann->best_arm_switches;
      summary.total_variation = ann->total_variation;
      summary.bounds = ground_truth::theoretical_bounds(*ann, ann->num_arms,
                                                        ann->horizon);
      const double log_t = std::log(static_cast<double>(summary.T));
      summary.bound_ratio =
          summary.mean_regret / (log_t * log_t * log_t * summary.bounds->sum_sqrt);
    }
    result.per_horizon.push_back(std::move(summary));
  }

  if (config.horizons.size() >= 3) {
    std::vector<std::pair<Round, double>> points;
    bool positive = true;
    for (const auto& s : result.per_horizon) {
      points.emplace_back(s.T, s.mean_regret);
      positive = positive && s.mean_regret > 0.0;
    }
    const auto [min_it, max_it] = std::minmax_element(
        config.horizons.begin(), config.horizons.end());
    if (positive && *max_it >= 8 * *min_it) {
      result.scaling_exponent = fit_scaling_exponent(points);
    }
  }
  return result;
}

double fit_scaling_exponent(const std::vector<std::pair<Round, double>>& points) {
  if (points.size() < 3) {
    throw std::invalid_argument("fit_scaling_exponent: need at least 3 horizons");
  }
  Round min_t = points[0].first, max_t = points[0].first;
  for (const auto& [T, r] : points) {
    min_t = std::min(min_t, T);
    max_t = std::max(max_t, T);
    if (!(r > 0.0)) {
      throw std::domain_error("fit_scaling_exponent: non-positive regret value");
    }
    if (T < 1) throw std::invalid_argument("fit_scaling_exponent: bad horizon");
  }
  if (max_t < 8 * min_t) {
    throw std::invalid_argument(
        "fit_scaling_exponent: horizons must span at least an 8x range");
  }
  const double n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [T, r] : points) {
    const double x = std::log(static_cast<double>(T));
    const double y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

E1Report diagnostics_e1(const RegretTrace& trace, const env::RewardModel& model,
                        long num_windows, std::uint64_t seed,
                        std::vector<double> c_grid) {
  const Round T = trace.rounds();
  const int K = model.num_arms();
  if (trace.extras.candidate_sizes.size() != static_cast<size_t>(T) ||
      trace.extras.candidate_masks.size() != static_cast<size_t>(T)) {
    throw std::invalid_argument(
        "diagnostics_e1: trace lacks per-round candidate sets (META with "
        "record_candidates and K <= 64 required)");
  }
  if (num_windows < 1) throw std::invalid_argument("diagnostics_e1: num_windows");
  std::sort(c_grid.begin(), c_grid.end());

  // Realized estimator prefix sums and conditional-mean prefix sums:
  //   What(b, t) = sum_{s<=t} |A_s| Y_s 1{pi_s = b}
  //   Q(b, t)    = sum_{s<=t} mu_s(b) 1{b in A_s}
  std::vector<double> what(static_cast<size_t>(T + 1) * K, 0.0);
  std::vector<double> q(static_cast<size_t>(T + 1) * K, 0.0);
  for (Round t = 1; t <= T; ++t) {
    const size_t row = static_cast<size_t>(t) * K;
    const size_t prev = static_cast<size_t>(t - 1) * K;
    const std::uint64_t mask = trace.extras.candidate_masks[static_cast<size_t>(t - 1)];
    for (Arm b = 0; b < K; ++b) {
      what[row + b] = what[prev + b];
      q[row + b] = q[prev + b] +
                   ((mask >> b) & 1 ? model.mean(t, b) : 0.0);
    }
    const Arm played = trace.arms[static_cast<size_t>(t - 1)];
    what[row + played] +=
        static_cast<double>(trace.extras.candidate_sizes[static_cast<size_t>(t - 1)]) *
        trace.rewards[static_cast<size_t>(t - 1)];
  }

  rng::Stream stream(seed, rng::kHarness);
  const double log_t = std::log(static_cast<double>(T));
  std::vector<long> violations(c_grid.size(), 0);
  double max_norm = 0.0;

  for (long w = 0; w < num_windows; ++w) {
    const Round s1 = 1 + stream.next_index(T);
    const Round s2 = s1 + stream.next_index(T - s1 + 1);
    const Arm a = static_cast<Arm>(stream.next_index(K));
    Arm ap = K > 1 ? static_cast<Arm>(stream.next_index(K - 1)) : 0;
    if (K > 1 && ap >= a) ++ap;

    auto range = [&](const std::vector<double>& tab, Arm b) {
      return tab[static_cast<size_t>(s2) * K + b] -
             tab[static_cast<size_t>(s1 - 1) * K + b];
    };
    const double realized = (range(what, ap) - range(what, a));
    const double expected = (range(q, ap) - range(q, a));
    const double dev = std::abs(realized - expected);
    const double scale =
        log_t * (std::sqrt(static_cast<double>(K) * static_cast<double>(s2 - s1)) +
                 static_cast<double>(K));
    max_norm = std::max(max_norm, dev / scale);
    for (size_t c = 0; c < c_grid.size(); ++c) {
      if (dev > c_grid[c] * scale) ++violations[c];
    }
  }

  E1Report report;
  report.num_windows = num_windows;
  report.c_grid = std::move(c_grid);
  for (long v : violations) {
    report.violation_fraction.push_back(static_cast<double>(v) /
                                        static_cast<double>(num_windows));
  }
  report.max_normalized_deviation = max_norm;
  return report;
}

void write_trials_csv(std::ostream& out, const ExperimentResult& result) {
  out << "T,seed,final_regret,num_restarts,num_replays\n";
  char buf[40];
  for (const TrialResult& t : result.trials) {
    std::snprintf(buf, sizeof(buf), "%.10f", t.final_regret);
    out << t.T << ',' << t.seed << ',' << buf << ',' << t.num_restarts << ','
        << t.num_replays << "\n";
  }
}

std::string result_to_json(const ExperimentResult& result,
                           const ExperimentConfig& config) {
  nlohmann::json j;
  j["policy"] = config.policy_name;
  j["env"] = nlohmann::json::parse(env::env_spec_to_json(config.env));
  j["eviction"] = {
      {"C0", config.eviction.c0},
      {"threshold_variant",
       config.eviction.variant == meta::ThresholdVariant::kMain ? "main" : "remark"},
      {"scan_mode",
       config.eviction.scan == meta::ScanMode::kExact ? "exact" : "dyadic"}};
  j["num_seeds"] = config.seeds.size();

  nlohmann::json horizons = nlohmann::json::array();
  for (const auto& s : result.per_horizon) {
    nlohmann::json h;
    h["T"] = s.T;
    h["mean_regret"] = s.mean_regret;
    h["std_error"] = s.std_error;
    h["num_seeds"] = s.num_seeds;
    long restarts = 0, with_restart = 0;
    for (const auto& rounds : s.restart_rounds) {
      restarts += static_cast<long>(rounds.size());
      with_restart += rounds.empty() ? 0 : 1;
    }
    h["total_restarts"] = restarts;
    h["seeds_with_restart"] = with_restart;
    nlohmann::json replays = nlohmann::json::object();
    for (const auto& [m, count] : s.replay_counts) {
      replays[std::to_string(m)] = count;
    }
    h["replay_counts"] = replays;
    if (s.num_shifts) {
      h["num_significant_shifts"] = *s.num_shifts;
      h["best_arm_switches"] = *s.best_arm_switches;
      h["total_variation"] = *s.total_variation;
      h["bounds"] = {{"sum_sqrt", s.bounds->sum_sqrt},
                     {"jensen_bound", s.bounds->jensen_bound},
                     {"tv_bound", s.bounds->tv_bound}};
      h["bound_ratio"] = *s.bound_ratio;
    }
    if (!s.mean_curve.empty()) h["mean_curve"] = s.mean_curve;
    horizons.push_back(std::move(h));
  }
  j["per_horizon"] = horizons;
  if (result.scaling_exponent) j["scaling_exponent"] = *result.scaling_exponent;
  return j.dump(2);
}

}  // namespace shiftband::harness
