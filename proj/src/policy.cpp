#include "shiftband/policy.hpp"

#include <ostream>

#include "json.hpp"

namespace shiftband {

const char* event_type_name(EventType type) {
  switch (type) {
    case EventType::kEpisodeStart: return "episode_start";
    case EventType::kReplayStart: return "replay_start";
    case EventType::kReplayEnd: return "replay_end";
    case EventType::kEvictMaster: return "evict_master";
    case EventType::kEvictFrame: return "evict_frame";
    case EventType::kRestart: return "restart";
  }
  return "unknown";
}

void write_event_log(std::ostream& out, const std::vector<Event>& events) {
  for (const Event& e : events) {
    nlohmann::json j;
    j["type"] = event_type_name(e.type);
    j["round"] = e.round;
    if (e.episode >= 0) j["episode"] = e.episode;
    switch (e.type) {
      case EventType::kEvictMaster:
      case EventType::kEvictFrame:
        j["arm"] = e.arm + 1;
        j["s1"] = e.s1;
        j["s2"] = e.s2;
        if (e.type == EventType::kEvictFrame) j["frame_start"] = e.frame_start;
        break;
      case EventType::kReplayStart:
        j["m0"] = e.m0;
        break;
      case EventType::kReplayEnd:
        j["frame_start"] = e.frame_start;
        j["reason"] = e.reason;
        break;
      default:
        break;
    }
    out << j.dump() << "\n";
  }
}

}  // namespace shiftband
