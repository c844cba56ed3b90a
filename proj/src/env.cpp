#include "shiftband/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace shiftband::env {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const void* data, size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<NoiseSpec> expand_noise(const std::vector<NoiseSpec>& noise, int K) {
  if (noise.size() == 1) return std::vector<NoiseSpec>(static_cast<size_t>(K), noise[0]);
  if (noise.size() == static_cast<size_t>(K)) return noise;
  throw std::invalid_argument("noise: expected 1 or K entries, got " +
                              std::to_string(noise.size()));
}

void check_mean_value(double mu, Round t, Arm a) {
  if (!(mu >= 0.0 && mu <= 1.0)) {
    throw std::invalid_argument("mean out of [0,1] at t=" + std::to_string(t) +
                                " arm=" + std::to_string(a + 1) + ": " +
                                std::to_string(mu));
  }
}

}  // namespace

RewardModel::RewardModel(Round horizon, int num_arms, std::vector<double> means,
                         std::vector<NoiseSpec> noise_per_arm)
    : horizon_(horizon),
      num_arms_(num_arms),
      means_(std::move(means)),
      noise_(expand_noise(noise_per_arm, num_arms)) {
  if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");
  if (num_arms_ < 1) throw std::invalid_argument("num_arms must be >= 1");
  if (means_.size() != static_cast<size_t>(horizon_) * static_cast<size_t>(num_arms_)) {
    throw std::invalid_argument("mean matrix size mismatch");
  }
  for (Round t = 1; t <= horizon_; ++t) {
    for (Arm a = 0; a < num_arms_; ++a) {
      check_mean_value(means_[static_cast<size_t>(t - 1) * num_arms_ + a], t, a);
    }
  }
  std::uint64_t h = 1469598103934665603ull;
  h = fnv1a(&horizon_, sizeof(horizon_), h);
  h = fnv1a(&num_arms_, sizeof(num_arms_), h);
  h = fnv1a(means_.data(), means_.size() * sizeof(double), h);
  hash_ = h;
}

void RewardModel::check_range(Round t, Arm a) const {
  if (t < 1 || t > horizon_) {
    throw std::out_of_range("round " + std::to_string(t) + " outside [1," +
                            std::to_string(horizon_) + "]");
  }
  if (a < 0 || a >= num_arms_) {
    throw std::out_of_range("arm index " + std::to_string(a) + " outside [0," +
                            std::to_string(num_arms_) + ")");
  }
}

double RewardModel::mean(Round t, Arm a) const {
  check_range(t, a);
  return means_[static_cast<size_t>(t - 1) * num_arms_ + a];
}

double RewardModel::sample(Round t, Arm a, rng::Stream& stream) const {
  check_range(t, a);
  const double mu = means_[static_cast<size_t>(t - 1) * num_arms_ + a];
  const NoiseSpec& ns = noise_[static_cast<size_t>(a)];
  switch (ns.kind) {
    case NoiseKind::kDeterministic:
      return mu;
    case NoiseKind::kBernoulli:
      return stream.next_bernoulli(mu) ? 1.0 : 0.0;
    case NoiseKind::kUniform: {
      const double w = std::min({ns.halfwidth, mu, 1.0 - mu});
      return mu + w * (2.0 * stream.next_uniform01() - 1.0);
    }
  }
  throw std::logic_error("unreachable noise kind");
}

RewardModel gen_custom(const std::vector<std::vector<double>>& mean_rows,
                       const std::vector<NoiseSpec>& noise) {
  if (mean_rows.empty()) throw std::invalid_argument("mean matrix must be non-empty");
  const size_t K = mean_rows[0].size();
  if (K == 0) throw std::invalid_argument("mean matrix needs at least one arm");
  std::vector<double> flat;
  flat.reserve(mean_rows.size() * K);
  for (const auto& row : mean_rows) {
    if (row.size() != K) throw std::invalid_argument("ragged mean matrix");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return RewardModel(static_cast<Round>(mean_rows.size()), static_cast<int>(K),
                     std::move(flat), noise);
}

RewardModel make_piecewise(Round T, int K, const std::vector<Round>& boundaries,
                           const std::vector<std::vector<double>>& segment_means,
                           const std::vector<NoiseSpec>& noise) {
  if (segment_means.size() != boundaries.size() + 1) {
    throw std::invalid_argument("piecewise: need one mean vector per segment (" +
                                std::to_string(boundaries.size() + 1) + ")");
  }
  Round prev = 1;
  for (Round b : boundaries) {
    if (b <= prev || b > T) {
      throw std::invalid_argument("piecewise: boundaries must be ascending in (1,T]");
    }
    prev = b;
  }
  std::vector<double> flat(static_cast<size_t>(T) * K);
  size_t seg = 0;
  for (Round t = 1; t <= T; ++t) {
    if (seg < boundaries.size() && t >= boundaries[seg]) ++seg;
    const auto& mu = segment_means[seg];
    if (mu.size() != static_cast<size_t>(K)) {
      throw std::invalid_argument("piecewise: segment mean vector size != K");
    }
    std::copy(mu.begin(), mu.end(), flat.begin() + static_cast<size_t>(t - 1) * K);
  }
  return RewardModel(T, K, std::move(flat), noise);
}

RewardModel gen_piecewise(std::uint64_t seed, Round T, int K, int num_segments,
                          double min_gap, const std::vector<NoiseSpec>& noise) {
  if (num_segments < 1) throw std::invalid_argument("num_segments must be >= 1");
  if (num_segments > T) {
    throw std::invalid_argument("num_segments=" + std::to_string(num_segments) +
                                " exceeds T=" + std::to_string(T));
  }
  if (!(min_gap > 0.0 && min_gap <= 1.0)) {
    throw std::invalid_argument("min_gap must be in (0,1]");
  }
  if (K < 1) throw std::invalid_argument("K must be >= 1");

  rng::Stream stream(seed, rng::kGenerator);

  // Boundaries drawn without replacement from {2..T}.
  std::vector<Round> boundaries;
  boundaries.reserve(static_cast<size_t>(num_segments) - 1);
  while (boundaries.size() + 1 < static_cast<size_t>(num_segments)) {
    Round b = 2 + stream.next_index(T - 1);
    if (std::find(boundaries.begin(), boundaries.end(), b) == boundaries.end()) {
      boundaries.push_back(b);
    }
  }
  std::sort(boundaries.begin(), boundaries.end());

  // Per segment: a best arm with margin >= min_gap over every other arm.
  // Forcing the best arm to change between consecutive segments makes each
  // boundary a visible change of size >= min_gap in some arm.
  std::vector<std::vector<double>> segment_means;
  Arm prev_best = -1;
  for (int s = 0; s < num_segments; ++s) {
    Arm best;
    if (K == 1) {
      best = 0;
    } else {
      do {
        best = static_cast<Arm>(stream.next_index(K));
      } while (best == prev_best);
    }
    const double mu_best = stream.next_uniform(min_gap, 1.0);
    std::vector<double> mu(static_cast<size_t>(K));
    for (Arm a = 0; a < K; ++a) {
      mu[static_cast<size_t>(a)] =
          (a == best) ? mu_best : stream.next_uniform(0.0, mu_best - min_gap);
    }
    segment_means.push_back(std::move(mu));
    prev_best = best;
  }
  return make_piecewise(T, K, boundaries, segment_means, noise);
}

RewardModel gen_drifting(std::uint64_t seed, Round T, int K, double tv_budget,
                         const std::vector<NoiseSpec>& noise) {
  if (tv_budget < 0.0) throw std::invalid_argument("tv_budget must be >= 0");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (T > 1 && tv_budget > 0.25 * static_cast<double>(T - 1)) {
    throw std::invalid_argument("tv_budget " + std::to_string(tv_budget) +
                                " too large for T=" + std::to_string(T) +
                                " (limit 0.25*(T-1))");
  }

  rng::Stream stream(seed, rng::kGenerator);
  std::vector<double> start(static_cast<size_t>(K));
  for (auto& x : start) x = stream.next_uniform(0.25, 0.75);

  std::vector<double> flat(static_cast<size_t>(T) * K);
  std::copy(start.begin(), start.end(), flat.begin());
  if (T == 1 || tv_budget == 0.0) {
    for (Round t = 2; t <= T; ++t) {
      std::copy(start.begin(), start.end(),
                flat.begin() + static_cast<size_t>(t - 1) * K);
    }
    return RewardModel(T, K, std::move(flat), noise);
  }

  // Raw step magnitudes, then one exact rescale so that
  // sum_t max_a |step_t(a)| equals the budget before walking.
  std::vector<double> raw(static_cast<size_t>(T - 1) * K);
  double raw_tv = 0.0;
  for (Round t = 0; t < T - 1; ++t) {
    double row_max = 0.0;
    for (Arm a = 0; a < K; ++a) {
      const double r = stream.next_uniform(-1.0, 1.0);
      raw[static_cast<size_t>(t) * K + a] = r;
      row_max = std::max(row_max, std::abs(r));
    }
    raw_tv += row_max;
  }
  const double alpha = raw_tv > 0.0 ? tv_budget / raw_tv : 0.0;

  std::vector<double> x = start;
  for (Round t = 2; t <= T; ++t) {
    for (Arm a = 0; a < K; ++a) {
      double step = alpha * raw[static_cast<size_t>(t - 2) * K + a];
      if (std::abs(step) > 0.5) {
        // Cannot happen for the accepted budget range; kept as a hard check.
        throw std::logic_error("drifting step exceeds 0.5 after rescale");
      }
      double next = x[static_cast<size_t>(a)] + step;
      if (next < 0.0 || next > 1.0) next = x[static_cast<size_t>(a)] - step;
      x[static_cast<size_t>(a)] = next;
      flat[static_cast<size_t>(t - 1) * K + a] = next;
    }
  }
  return RewardModel(T, K, std::move(flat), noise);
}

namespace {

std::vector<Round> frac_to_boundaries(const std::vector<double>& frac, Round T) {
  std::vector<Round> out;
  out.reserve(frac.size());
  for (double f : frac) {
    if (!(f > 0.0 && f < 1.0)) {
      throw std::invalid_argument("boundaries_frac entries must be in (0,1)");
    }
    out.push_back(static_cast<Round>(std::floor(f * static_cast<double>(T))) + 1);
  }
  return out;
}

RewardModel expand_at(const EnvSpec& spec, Round T) {
  switch (spec.kind) {
    case EnvKind::kPiecewise:
      if (spec.num_segments > 0) {
        return gen_piecewise(spec.seed, T, spec.K, spec.num_segments, spec.min_gap,
                             spec.noise);
      } else {
        std::vector<Round> b = spec.boundaries;
        if (!spec.boundaries_frac.empty()) b = frac_to_boundaries(spec.boundaries_frac, T);
        return make_piecewise(T, spec.K, b, spec.segment_means, spec.noise);
      }
    case EnvKind::kDrifting:
      return gen_drifting(spec.seed, T, spec.K, spec.tv_budget, spec.noise);
    case EnvKind::kCustom:
      return gen_custom(spec.mean_rows, spec.noise);
  }
  throw std::logic_error("unreachable env kind");
}

}  // namespace

RewardModel expand(const EnvSpec& spec) { return expand_at(spec, spec.T); }

RewardModel expand_for_horizon(const EnvSpec& spec, Round T) {
  if (T == spec.T) return expand(spec);
  const bool fixed_shape =
      spec.kind == EnvKind::kCustom ||
      (spec.kind == EnvKind::kPiecewise && spec.num_segments == 0 &&
       spec.boundaries_frac.empty());
  if (fixed_shape) {
    if (T > spec.T) {
      throw std::invalid_argument("horizon " + std::to_string(T) +
                                  " exceeds env horizon " + std::to_string(spec.T));
    }
    return expand(spec);  // harness runs the first T rounds
  }
  return expand_at(spec, T);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw std::invalid_argument("unknown field " + path + "." + it.key());
    }
  }
}

NoiseSpec parse_one_noise(const json& j, const std::string& path) {
  NoiseSpec ns;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "bernoulli") ns.kind = NoiseKind::kBernoulli;
    else if (s == "deterministic") ns.kind = NoiseKind::kDeterministic;
    else if (s == "uniform") ns.kind = NoiseKind::kUniform;
    else throw std::invalid_argument(path + ": unknown noise kind '" + s + "'");
    return ns;
  }
  if (!j.is_object()) throw std::invalid_argument(path + ": noise must be string or object");
  reject_unknown(j, {"kind", "halfwidth"}, path);
  ns = parse_one_noise(j.at("kind"), path + ".kind");
  if (j.contains("halfwidth")) ns.halfwidth = j.at("halfwidth").get<double>();
  if (!(ns.halfwidth >= 0.0)) throw std::invalid_argument(path + ".halfwidth must be >= 0");
  return ns;
}

std::vector<NoiseSpec> parse_noise(const json& j, const std::string& path) {
  if (j.is_array()) {
    std::vector<NoiseSpec> out;
    for (size_t i = 0; i < j.size(); ++i) {
      out.push_back(parse_one_noise(j[i], path + "[" + std::to_string(i) + "]"));
    }
    if (out.empty()) throw std::invalid_argument(path + ": empty noise list");
    return out;
  }
  return {parse_one_noise(j, path)};
}

json noise_to_json(const std::vector<NoiseSpec>& noise) {
  auto one = [](const NoiseSpec& ns) -> json {
    switch (ns.kind) {
      case NoiseKind::kBernoulli: return "bernoulli";
      case NoiseKind::kDeterministic: return "deterministic";
      case NoiseKind::kUniform:
        return json{{"kind", "uniform"}, {"halfwidth", ns.halfwidth}};
    }
    return nullptr;
  };
  if (noise.size() == 1) return one(noise[0]);
  json arr = json::array();
  for (const auto& ns : noise) arr.push_back(one(ns));
  return arr;
}

}  // namespace

EnvSpec parse_env_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("env spec: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("env spec: expected a JSON object");
  reject_unknown(j, {"kind", "T", "K", "seed", "segments", "random", "tv_budget",
                     "drift_path", "means", "noise"},
                 "env");

  EnvSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "piecewise") spec.kind = EnvKind::kPiecewise;
  else if (kind == "drifting") spec.kind = EnvKind::kDrifting;
  else if (kind == "custom") spec.kind = EnvKind::kCustom;
  else throw std::invalid_argument("env.kind: unknown kind '" + kind + "'");

  spec.T = j.at("T").get<Round>();
  spec.K = j.at("K").get<int>();
  spec.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("noise")) spec.noise = parse_noise(j.at("noise"), "env.noise");

  switch (spec.kind) {
    case EnvKind::kPiecewise: {
      const bool has_seg = j.contains("segments");
      const bool has_rand = j.contains("random");
      if (has_seg == has_rand) {
        throw std::invalid_argument(
            "env: piecewise requires exactly one of 'segments' or 'random'");
      }
      if (has_seg) {
        const json& s = j.at("segments");
        reject_unknown(s, {"boundaries", "boundaries_frac", "means"}, "env.segments");
        if (s.contains("boundaries") == s.contains("boundaries_frac")) {
          throw std::invalid_argument(
              "env.segments: exactly one of 'boundaries' or 'boundaries_frac'");
        }
        if (s.contains("boundaries")) {
          spec.boundaries = s.at("boundaries").get<std::vector<Round>>();
        } else {
          spec.boundaries_frac = s.at("boundaries_frac").get<std::vector<double>>();
        }
        spec.segment_means =
            s.at("means").get<std::vector<std::vector<double>>>();
      } else {
        const json& r = j.at("random");
        reject_unknown(r, {"num_segments", "min_gap"}, "env.random");
        spec.num_segments = r.at("num_segments").get<int>();
        spec.min_gap = r.at("min_gap").get<double>();
        if (spec.num_segments < 1) {
          throw std::invalid_argument("env.random.num_segments must be >= 1");
        }
      }
      break;
    }
    case EnvKind::kDrifting:
      spec.tv_budget = j.at("tv_budget").get<double>();
      spec.drift_path = j.value("drift_path", std::string("random_walk"));
      if (spec.drift_path != "random_walk") {
        throw std::invalid_argument("env.drift_path: unsupported path '" +
                                    spec.drift_path + "'");
      }
      break;
    case EnvKind::kCustom:
      spec.mean_rows = j.at("means").get<std::vector<std::vector<double>>>();
      if (spec.T != static_cast<Round>(spec.mean_rows.size())) {
        throw std::invalid_argument("env.T does not match the mean matrix row count");
      }
      if (!spec.mean_rows.empty() &&
          spec.K != static_cast<int>(spec.mean_rows[0].size())) {
        throw std::invalid_argument("env.K does not match the mean matrix column count");
      }
      break;
  }
  return spec;
}

std::string env_spec_to_json(const EnvSpec& spec) {
  json j;
  j["T"] = spec.T;
  j["K"] = spec.K;
  j["seed"] = spec.seed;
  j["noise"] = noise_to_json(spec.noise);
  switch (spec.kind) {
    case EnvKind::kPiecewise: {
      j["kind"] = "piecewise";
      if (spec.num_segments > 0) {
        j["random"] = {{"num_segments", spec.num_segments}, {"min_gap", spec.min_gap}};
      } else {
        json s;
        if (!spec.boundaries_frac.empty()) s["boundaries_frac"] = spec.boundaries_frac;
        else s["boundaries"] = spec.boundaries;
        s["means"] = spec.segment_means;
        j["segments"] = s;
      }
      break;
    }
    case EnvKind::kDrifting:
      j["kind"] = "drifting";
      j["tv_budget"] = spec.tv_budget;
      j["drift_path"] = spec.drift_path;
      break;
    case EnvKind::kCustom:
      j["kind"] = "custom";
      j["means"] = spec.mean_rows;
      break;
  }
  return j.dump(2);
}

void write_mean_matrix_csv(std::ostream& out, const RewardModel& model) {
  out << "t";
  for (Arm a = 0; a < model.num_arms(); ++a) out << ",arm_" << (a + 1);
  out << "\n";
  char buf[32];
  for (Round t = 1; t <= model.horizon(); ++t) {
    out << t;
    for (Arm a = 0; a < model.num_arms(); ++a) {
      std::snprintf(buf, sizeof(buf), "%.10f", model.mean(t, a));
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace shiftband::env
