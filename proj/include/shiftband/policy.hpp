#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shiftband/types.hpp"

namespace shiftband {

// Signalled when select_arm is called past a policy's horizon.
class end_of_horizon : public std::runtime_error {
 public:
  end_of_horizon() : std::runtime_error("policy horizon exhausted") {}
};

enum class EventType {
  kEpisodeStart,
  kReplayStart,
  kReplayEnd,
  kEvictMaster,
  kEvictFrame,
  kRestart,
};

struct Event {
  EventType type;
  Round round = 0;       // bookkeeping round the event fired at
  long episode = -1;
  Arm arm = -1;          // evictions
  Round m0 = 0;          // replay_start: scheduled duration
  Round frame_start = 0; // replay frames
  Round s1 = 0, s2 = 0;  // eviction witness window
  std::string reason;    // replay_end: "duration" | "empty-candidates"
};

const char* event_type_name(EventType type);

// One JSON object per line: {"type":...,"round":...,...}.
void write_event_log(std::ostream& out, const std::vector<Event>& events);

// Internals a trial harvests from a policy after a run; rounds are in the
// trial's global coordinates.
struct TraceExtras {
  std::vector<Event> events;
  std::vector<int> candidate_sizes;            // |A_t| per played round
  std::vector<std::uint64_t> candidate_masks;  // bit a set <=> arm a in A_t (K <= 64)
};

// Online policy protocol: strictly alternating select_arm / observe, one
// pair per round. Protocol misuse throws std::logic_error.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual Arm select_arm() = 0;
  virtual void observe(Arm arm, double reward) = 0;

  virtual std::string name() const = 0;

  // Environment-matrix hash this policy was built against, if any; the
  // harness refuses to run a policy whose hash disagrees with the model.
  virtual std::optional<std::uint64_t> expected_env_hash() const {
    return std::nullopt;
  }

  virtual TraceExtras extras() const { return {}; }
};

// Shared select/observe alternation guard.
class ProtocolGuard {
 public:
  void on_select() {
    if (pending_) throw std::logic_error("select_arm called twice without observe");
    pending_ = true;
  }
  void on_observe(Arm arm, double reward, Arm expected) {
    if (!pending_) throw std::logic_error("observe called without a pending select_arm");
    if (arm != expected) {
      throw std::logic_error("observe: arm " + std::to_string(arm) +
                             " does not match selected arm " + std::to_string(expected));
    }
    if (!(reward >= 0.0 && reward <= 1.0)) {
      throw std::invalid_argument("reward outside [0,1]: " + std::to_string(reward));
    }
    pending_ = false;
  }
  bool pending() const { return pending_; }

 private:
  bool pending_ = false;
};

}  // namespace shiftband
