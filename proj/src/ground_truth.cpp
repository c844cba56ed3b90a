#include "shiftband/ground_truth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace shiftband::ground_truth {

namespace {

// Worst gaps delta_t(a) = max_a' mu_t(a') - mu_t(a) for one arm, t = 1..T.
std::vector<double> worst_gaps(const env::RewardModel& model, Arm a) {
  const Round T = model.horizon();
  const int K = model.num_arms();
  const auto& flat = model.means_flat();
  std::vector<double> gaps(static_cast<size_t>(T));
  for (Round t = 1; t <= T; ++t) {
    const double* row = flat.data() + static_cast<size_t>(t - 1) * K;
    double best = row[0];
    for (Arm b = 1; b < K; ++b) best = std::max(best, row[b]);
    gaps[static_cast<size_t>(t - 1)] = best - row[a];
  }
  return gaps;
}

std::vector<double> sqrt_k_len_table(int K, Round max_len) {
  std::vector<double> tab(static_cast<size_t>(max_len) + 1);
  for (Round len = 0; len <= max_len; ++len) {
    tab[static_cast<size_t>(len)] = std::sqrt(static_cast<double>(K) * len);
  }
  return tab;
}

// Core scan shared by the public trigger and the recursion: first s2 in
// (phase_start, limit] with a triggering interval, given prefix sums of
// the arm's gaps (D[t] = sum of gaps over rounds 1..t).
std::optional<Round> first_trigger_scan(const std::vector<double>& D,
                                        const std::vector<double>& sqrt_tab,
                                        Round phase_start, Round limit) {
  for (Round s2 = phase_start + 1; s2 <= limit; ++s2) {
    const double d2 = D[static_cast<size_t>(s2)];
    for (Round s1 = phase_start; s1 < s2; ++s1) {
      if (d2 - D[static_cast<size_t>(s1 - 1)] >= sqrt_tab[static_cast<size_t>(s2 - s1)]) {
        return s2;
      }
    }
  }
  return std::nullopt;
}

std::vector<double> gap_prefix(const std::vector<double>& gaps) {
  std::vector<double> D(gaps.size() + 1, 0.0);
  for (size_t t = 0; t < gaps.size(); ++t) D[t + 1] = D[t] + gaps[t];
  return D;
}

}  // namespace

std::optional<Round> significant_regret_trigger(const env::RewardModel& model,
                                                Round phase_start, Arm a) {
  if (phase_start < 1 || phase_start > model.horizon()) {
    throw std::out_of_range("phase_start outside [1,T]");
  }
  if (a < 0 || a >= model.num_arms()) throw std::out_of_range("arm out of range");
  const auto D = gap_prefix(worst_gaps(model, a));
  const auto tab = sqrt_k_len_table(model.num_arms(), model.horizon());
  return first_trigger_scan(D, tab, phase_start, model.horizon());
}

PhaseAnnotation compute_significant_shifts(const env::RewardModel& model, Round cap) {
  const Round T = model.horizon();
  const int K = model.num_arms();
  if (T > cap) {
    throw resource_error("compute_significant_shifts: T=" + std::to_string(T) +
                         " exceeds the exact O(T^2 K) scan cap of " +
                         std::to_string(cap) +
                         "; pass a larger cap to accept the cost");
  }

  std::vector<std::vector<double>> prefixes;
  prefixes.reserve(static_cast<size_t>(K));
  for (Arm a = 0; a < K; ++a) prefixes.push_back(gap_prefix(worst_gaps(model, a)));
  const auto tab = sqrt_k_len_table(K, T);

  PhaseAnnotation ann;
  ann.horizon = T;
  ann.num_arms = K;
  ann.env_hash = model.matrix_hash();
  ann.tau.push_back(1);

  const Round kNever = T + 1;
  Round phase_start = 1;
  while (true) {
    std::vector<Round> e(static_cast<size_t>(K), kNever);
    bool all_triggered = phase_start <= T;
    for (Arm a = 0; a < K; ++a) {
      auto hit = phase_start <= T
                     ? first_trigger_scan(prefixes[static_cast<size_t>(a)], tab,
                                          phase_start, T)
                     : std::nullopt;
      if (hit) e[static_cast<size_t>(a)] = *hit;
      else all_triggered = false;
    }
    // Last safe arm: argmax of e_a, ties to the smallest arm index. In the
    // final phase never-triggered arms carry e_a = T+1 and win.
    Arm sharp = 0;
    for (Arm a = 1; a < K; ++a) {
      if (e[static_cast<size_t>(a)] > e[static_cast<size_t>(sharp)]) sharp = a;
    }
    ann.first_trigger.push_back(e);
    ann.last_safe_arm.push_back(sharp);
    if (!all_triggered) break;  // final phase
    const Round next_tau = e[static_cast<size_t>(sharp)];
    ann.tau.push_back(next_tau);
    phase_start = next_tau;
  }
  ann.tau.push_back(T + 1);
  ann.total_variation = compute_total_variation(model);
  ann.best_arm_switches = count_best_arm_switches(model);
  return ann;
}

double compute_total_variation(const env::RewardModel& model) {
  const Round T = model.horizon();
  const int K = model.num_arms();
  const auto& flat = model.means_flat();
  double v = 0.0;
  for (Round t = 2; t <= T; ++t) {
    const double* cur = flat.data() + static_cast<size_t>(t - 1) * K;
    const double* prev = cur - K;
    double m = 0.0;
    for (Arm a = 0; a < K; ++a) m = std::max(m, std::abs(cur[a] - prev[a]));
    v += m;
  }
  return v;
}

long count_best_arm_switches(const env::RewardModel& model) {
  const Round T = model.horizon();
  const int K = model.num_arms();
  const auto& flat = model.means_flat();
  auto best_of = [&](Round t) {
    const double* row = flat.data() + static_cast<size_t>(t - 1) * K;
    Arm best = 0;
    for (Arm a = 1; a < K; ++a) {
      if (row[a] > row[best]) best = a;
    }
    return best;
  };
  long s = 0;
  Arm prev = best_of(1);
  for (Round t = 2; t <= T; ++t) {
    const Arm cur = best_of(t);
    if (cur != prev) ++s;
    prev = cur;
  }
  return s;
}

TheoreticalBounds theoretical_bounds(const PhaseAnnotation& ann, int K, Round T) {
  if (ann.num_arms != K || ann.horizon != T) {
    throw std::invalid_argument("theoretical_bounds: annotation does not match (K,T)");
  }
  TheoreticalBounds b;
  const double kd = static_cast<double>(K);
  for (size_t i = 0; i + 1 < ann.tau.size(); ++i) {
    b.sum_sqrt += std::sqrt(kd * static_cast<double>(ann.tau[i + 1] - ann.tau[i]));
  }
  const double phases = static_cast<double>(ann.num_phases());
  b.jensen_bound = std::sqrt(phases * kd * static_cast<double>(T));
  b.tv_bound = std::sqrt(kd * static_cast<double>(T)) +
               std::cbrt(2.0 * kd * ann.total_variation) *
                   std::pow(static_cast<double>(T), 2.0 / 3.0);
  return b;
}

PhaseAnnotation annotate(const env::RewardModel& model, Round cap) {
  return compute_significant_shifts(model, cap);
}

int PhaseAnnotation::phase_of(Round t) const {
  if (t < 1 || t > horizon) throw std::out_of_range("round outside [1,T]");
  // tau is ascending; phase i covers [tau[i], tau[i+1]).
  auto it = std::upper_bound(tau.begin(), tau.end(), t);
  return static_cast<int>(it - tau.begin()) - 1;
}

bool PhaseAnnotation::is_safe(Round t, Arm a) const {
  const int i = phase_of(t);
  return first_trigger[static_cast<size_t>(i)][static_cast<size_t>(a)] > t;
}

std::vector<Arm> PhaseAnnotation::safe_set(Round t) const {
  const int i = phase_of(t);
  std::vector<Arm> out;
  for (Arm a = 0; a < num_arms; ++a) {
    if (first_trigger[static_cast<size_t>(i)][static_cast<size_t>(a)] > t) {
      out.push_back(a);
    }
  }
  return out;
}

std::string annotation_to_json(const PhaseAnnotation& ann) {
  nlohmann::json j;
  j["T"] = ann.horizon;
  j["K"] = ann.num_arms;
  j["tau"] = ann.tau;
  j["L"] = ann.num_shifts();
  nlohmann::json arms = nlohmann::json::array();
  for (Arm a : ann.last_safe_arm) arms.push_back(a + 1);
  j["last_safe_arm"] = arms;
  j["first_trigger"] = ann.first_trigger;
  j["total_variation"] = ann.total_variation;
  j["best_arm_switches"] = ann.best_arm_switches;
  j["env_hash"] = ann.env_hash;
  const auto b = theoretical_bounds(ann, ann.num_arms, ann.horizon);
  j["bounds"] = {{"sum_sqrt", b.sum_sqrt},
                 {"jensen_bound", b.jensen_bound},
                 {"tv_bound", b.tv_bound}};
  return j.dump(2);
}

PhaseAnnotation parse_annotation(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  PhaseAnnotation ann;
  ann.horizon = j.at("T").get<Round>();
  ann.num_arms = j.at("K").get<int>();
  ann.tau = j.at("tau").get<std::vector<Round>>();
  for (int a : j.at("last_safe_arm").get<std::vector<int>>()) {
    ann.last_safe_arm.push_back(a - 1);
  }
  ann.first_trigger = j.at("first_trigger").get<std::vector<std::vector<Round>>>();
  ann.total_variation = j.at("total_variation").get<double>();
  ann.best_arm_switches = j.at("best_arm_switches").get<long>();
  ann.env_hash = j.at("env_hash").get<std::uint64_t>();
  return ann;
}

}  // namespace shiftband::ground_truth
