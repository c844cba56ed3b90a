#pragma once

#include <memory>
#include <vector>

#include "shiftband/ground_truth.hpp"
#include "shiftband/policy.hpp"
#include "shiftband/rng.hpp"

namespace shiftband::baselines {

// Per-round arm sets S_t, one entry per round 1..T. Valid sequences
// satisfy S_t subset of G_t, are non-empty, and never grow within a
// ground-truth phase.
using SafeSetSequence = std::vector<std::vector<Arm>>;

// Throws std::invalid_argument on any violated invariant.
void validate_set_sequence(const SafeSetSequence& sets,
                           const ground_truth::PhaseAnnotation& annotation);

// S_t = {a_t_sharp}: the singleton last-safe-arm sequence.
SafeSetSequence singleton_safe_sequence(const ground_truth::PhaseAnnotation& annotation);

// Plays uniformly over the safe set G_t each round. Requires the
// annotation of the environment it runs on (the harness checks the hash).
std::unique_ptr<Policy> oracle_policy(ground_truth::PhaseAnnotation annotation,
                                      std::uint64_t seed);

// Plays uniformly over a fixed, validated arm-set sequence.
std::unique_ptr<Policy> set_sequence_policy(
    SafeSetSequence sets, const ground_truth::PhaseAnnotation& annotation,
    std::uint64_t seed);

// Uniform over all K arms every round (control).
std::unique_ptr<Policy> uniform_policy(int K, std::uint64_t seed);

}  // namespace shiftband::baselines
