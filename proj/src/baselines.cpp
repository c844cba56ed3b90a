#include "shiftband/baselines.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>

namespace shiftband::baselines {

namespace {

class UniformSetPolicy : public Policy {
 public:
  UniformSetPolicy(std::string name, std::uint64_t seed)
      : name_(std::move(name)), stream_(seed, rng::kPolicy) {}

  Arm select_arm() override {
    guard_.on_select();
    const auto& set = current_set();
    if (set.empty()) throw std::logic_error(name_ + ": empty arm set at round " +
                                            std::to_string(t_));
    pending_ = set[static_cast<size_t>(
        stream_.next_index(static_cast<std::int64_t>(set.size())))];
    return pending_;
  }

  void observe(Arm arm, double reward) override {
    guard_.on_observe(arm, reward, pending_);
    ++t_;
  }

  std::string name() const override { return name_; }

 protected:
  virtual const std::vector<Arm>& current_set() = 0;

  Round t_ = 1;

 private:
  std::string name_;
  rng::Stream stream_;
  ProtocolGuard guard_;
  Arm pending_ = -1;
};

class OraclePolicy final : public UniformSetPolicy {
 public:
  OraclePolicy(ground_truth::PhaseAnnotation annotation, std::uint64_t seed)
      : UniformSetPolicy("oracle", seed), annotation_(std::move(annotation)) {}

  std::optional<std::uint64_t> expected_env_hash() const override {
    return annotation_.env_hash;
  }

 protected:
  const std::vector<Arm>& current_set() override {
    if (t_ > annotation_.horizon) throw end_of_horizon{};
    cached_ = annotation_.safe_set(t_);
    return cached_;
  }

 private:
  ground_truth::PhaseAnnotation annotation_;
  std::vector<Arm> cached_;
};

class SetSequencePolicy final : public UniformSetPolicy {
 public:
  SetSequencePolicy(SafeSetSequence sets, std::uint64_t env_hash,
                    std::uint64_t seed)
      : UniformSetPolicy("set-sequence", seed),
        sets_(std::move(sets)),
        env_hash_(env_hash) {}

  std::optional<std::uint64_t> expected_env_hash() const override {
    return env_hash_;
  }

 protected:
  const std::vector<Arm>& current_set() override {
    if (t_ > static_cast<Round>(sets_.size())) throw end_of_horizon{};
    return sets_[static_cast<size_t>(t_ - 1)];
  }

 private:
  SafeSetSequence sets_;
  std::uint64_t env_hash_;
};

class UniformPolicy final : public UniformSetPolicy {
 public:
  UniformPolicy(int K, std::uint64_t seed)
      : UniformSetPolicy("uniform", seed) {
    if (K < 1) throw std::invalid_argument("uniform: K must be >= 1");
    for (Arm a = 0; a < K; ++a) all_.push_back(a);
  }

 protected:
  const std::vector<Arm>& current_set() override { return all_; }

 private:
  std::vector<Arm> all_;
};

}  // namespace

void validate_set_sequence(const SafeSetSequence& sets,
                           const ground_truth::PhaseAnnotation& annotation) {
  if (static_cast<Round>(sets.size()) != annotation.horizon) {
    throw std::invalid_argument("set sequence length != horizon");
  }
  for (Round t = 1; t <= annotation.horizon; ++t) {
    const auto& s = sets[static_cast<size_t>(t - 1)];
    if (s.empty()) {
      throw std::invalid_argument("set sequence: empty set at round " +
                                  std::to_string(t));
    }
    for (Arm a : s) {
      if (a < 0 || a >= annotation.num_arms) {
        throw std::invalid_argument("set sequence: arm out of range at round " +
                                    std::to_string(t));
      }
      if (!annotation.is_safe(t, a)) {
        throw std::invalid_argument("set sequence: arm " + std::to_string(a + 1) +
                                    " is not safe at round " + std::to_string(t));
      }
    }
    // No growth within a phase: S_t must contain S_{t+1}.
    if (t < annotation.horizon &&
        annotation.phase_of(t) == annotation.phase_of(t + 1)) {
      const auto& next = sets[static_cast<size_t>(t)];
      for (Arm a : next) {
        if (std::find(s.begin(), s.end(), a) == s.end()) {
          throw std::invalid_argument(
              "set sequence grows mid-phase at round " + std::to_string(t + 1));
        }
      }
    }
  }
}

SafeSetSequence singleton_safe_sequence(
    const ground_truth::PhaseAnnotation& annotation) {
  SafeSetSequence sets(static_cast<size_t>(annotation.horizon));
  for (Round t = 1; t <= annotation.horizon; ++t) {
    const int i = annotation.phase_of(t);
    sets[static_cast<size_t>(t - 1)] = {
        annotation.last_safe_arm[static_cast<size_t>(i)]};
  }
  return sets;
}

std::unique_ptr<Policy> oracle_policy(ground_truth::PhaseAnnotation annotation,
                                      std::uint64_t seed) {
  return std::make_unique<OraclePolicy>(std::move(annotation), seed);
}

std::unique_ptr<Policy> set_sequence_policy(
    SafeSetSequence sets, const ground_truth::PhaseAnnotation& annotation,
    std::uint64_t seed) {
  validate_set_sequence(sets, annotation);
  return std::make_unique<SetSequencePolicy>(std::move(sets),
                                             annotation.env_hash, seed);
}

std::unique_ptr<Policy> uniform_policy(int K, std::uint64_t seed) {
  return std::make_unique<UniformPolicy>(K, seed);
}

}  // namespace shiftband::baselines
