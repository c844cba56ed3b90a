#include "shiftband/meta.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace shiftband::meta {

double eviction_threshold(Round window_len, int K, Round T,
                          const EvictionConfig& cfg) {
  if (window_len < 0) throw std::invalid_argument("window_len must be >= 0");
  const double kd = static_cast<double>(K);
  const double len = static_cast<double>(window_len);
  const double log_t = std::log(static_cast<double>(T));
  switch (cfg.variant) {
    case ThresholdVariant::kMain:
      return log_t * std::sqrt(cfg.c0 * std::max(kd * len, kd * kd));
    case ThresholdVariant::kRemark:
      return std::sqrt(cfg.c0 *
                       std::max(kd * log_t * len, kd * kd * log_t * log_t));
  }
  throw std::logic_error("unreachable threshold variant");
}

PrefixSums::PrefixSums(int K, Round capacity) : K_(K), capacity_(capacity) {
  if (K < 1) throw std::invalid_argument("PrefixSums: K must be >= 1");
  if (capacity < 1) throw std::invalid_argument("PrefixSums: capacity must be >= 1");
  table_.assign(static_cast<size_t>(capacity + 1) * K, 0.0);
}

void PrefixSums::record(Round t, Arm played, double weight) {
  if (t != recorded_ + 1) {
    throw std::logic_error("PrefixSums: rounds must be recorded in order");
  }
  if (t > capacity_) throw std::logic_error("PrefixSums: capacity exceeded");
  if (played < 0 || played >= K_) throw std::out_of_range("PrefixSums: arm");
  if (weight < 0.0) throw std::invalid_argument("PrefixSums: negative weight");
  const double* prev = table_.data() + static_cast<size_t>(t - 1) * K_;
  double* cur = table_.data() + static_cast<size_t>(t) * K_;
  std::copy(prev, prev + K_, cur);
  cur[played] += weight;
  recorded_ = t;
}

double PrefixSums::range_sum(Arm b, Round s1, Round s2) const {
  if (b < 0 || b >= K_) throw std::out_of_range("PrefixSums: arm");
  if (s1 < 1 || s1 > s2 || s2 > recorded_) {
    throw std::out_of_range("PrefixSums: window outside recorded rounds");
  }
  return table_[static_cast<size_t>(s2) * K_ + b] -
         table_[static_cast<size_t>(s1 - 1) * K_ + b];
}

double gap_estimate_sum(const PrefixSums& sums, Arm a_prime, Arm a, Round s1,
                        Round s2) {
  return sums.range_sum(a_prime, s1, s2) - sums.range_sum(a, s1, s2);
}

std::vector<Round> scan_start_points(Round w_start, Round s2, ScanMode mode) {
  if (w_start > s2) return {};
  std::vector<Round> out;
  if (mode == ScanMode::kExact) {
    out.reserve(static_cast<size_t>(s2 - w_start + 1));
    for (Round s1 = w_start; s1 <= s2; ++s1) out.push_back(s1);
    return out;
  }
  out.push_back(w_start);
  for (Round span = 1;; span <<= 1) {  // s1 = s2 + 1 - 2^j
    const Round s1 = s2 + 1 - span;
    if (s1 < w_start) break;
    out.push_back(s1);
    if (span > s2) break;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::optional<Round>> eviction_scan(const PrefixSums& sums,
                                                Round w_start, Round now, Round T,
                                                const EvictionConfig& cfg) {
  const int K = sums.num_arms();
  std::vector<std::optional<Round>> witness(static_cast<size_t>(K));
  const Round s2 = now - 1;
  if (w_start > s2) return witness;

  for (Round s1 : scan_start_points(w_start, s2, cfg.scan)) {
    const double thr = eviction_threshold(s2 - s1, K, T, cfg);
    double max_sum = sums.range_sum(0, s1, s2);
    for (Arm b = 1; b < K; ++b) {
      max_sum = std::max(max_sum, sums.range_sum(b, s1, s2));
    }
    for (Arm a = 0; a < K; ++a) {
      if (witness[static_cast<size_t>(a)]) continue;
      if (max_sum - sums.range_sum(a, s1, s2) > thr) {
        witness[static_cast<size_t>(a)] = s1;
      }
    }
  }
  return witness;
}

bool eviction_trigger(const PrefixSums& sums, Arm a, Round w_start, Round now,
                      Round T, const EvictionConfig& cfg) {
  if (a < 0 || a >= sums.num_arms()) throw std::out_of_range("eviction_trigger: arm");
  return eviction_scan(sums, w_start, now, T, cfg)[static_cast<size_t>(a)].has_value();
}

ReplaySchedule::ReplaySchedule(std::uint64_t key, Round T) : key_(key) {
  Round top = 1;
  int ceil_log = 0;
  while (top < T) {
    top <<= 1;
    ++ceil_log;
  }
  for (int j = 1; j <= ceil_log; ++j) durations_.push_back(Round{1} << j);
}

bool ReplaySchedule::fires(Round offset, Round duration) const {
  if (offset < 1) throw std::invalid_argument("ReplaySchedule: offset must be >= 1");
  int j = 0;
  while ((Round{1} << j) < duration) ++j;
  if ((Round{1} << j) != duration || j < 1 || j > 62) {
    throw std::invalid_argument("ReplaySchedule: duration not on the grid");
  }
  double p = 1.0 / std::sqrt(static_cast<double>(duration) *
                             static_cast<double>(offset));
  p = std::min(p, 1.0);
  const std::uint64_t bits =
      rng::at(key_, static_cast<std::uint64_t>(offset) * 64 +
                        static_cast<std::uint64_t>(j));
  return rng::to_uniform01(bits) < p;
}

std::optional<Round> ReplaySchedule::largest_fired(Round offset) const {
  for (auto it = durations_.rbegin(); it != durations_.rend(); ++it) {
    if (fires(offset, *it)) return *it;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// MetaPolicy
// ---------------------------------------------------------------------------

namespace {

struct Frame {
  Round start = 0;  // sigma
  Round m0 = 0;
  std::vector<Arm> candidates;  // A_t while this frame is active
  std::vector<Arm> saved;       // A_current

  bool expired(Round t) const { return t > start + m0; }
};

std::vector<Arm> full_set(int K) {
  std::vector<Arm> v(static_cast<size_t>(K));
  for (Arm a = 0; a < K; ++a) v[static_cast<size_t>(a)] = a;
  return v;
}

std::uint64_t set_mask(const std::vector<Arm>& arms) {
  std::uint64_t m = 0;
  for (Arm a : arms) m |= std::uint64_t{1} << a;
  return m;
}

}  // namespace

struct MetaPolicy::State {
  int K;
  Round T;
  MetaOptions opts;
  ProtocolGuard guard;
  rng::Stream arm_stream;

  Round t = 1;  // next round to play
  bool done = false;
  long episode = -1;
  Round episode_start = 0;
  std::vector<Arm> master;
  std::vector<Frame> stack;
  std::optional<ReplaySchedule> schedule;
  PrefixSums sums;

  std::vector<Event> events;
  long restarts = 0;
  long cross_violations = 0;

  std::vector<int> sizes;
  std::vector<std::uint64_t> masks;
  Arm pending_arm = -1;
  int pending_size = 0;
  std::uint64_t pending_mask = 0;

  State(int K_in, Round T_in, MetaOptions opts_in)
      : K(K_in),
        T(T_in),
        opts(std::move(opts_in)),
        arm_stream(opts.seed, rng::kPolicy),
        sums(K_in, T_in) {}

  void new_episode() {
    ++episode;
    episode_start = t;
    master = full_set(K);
    schedule.emplace(rng::derive_key(opts.seed, rng::kSchedule,
                                     static_cast<std::uint64_t>(episode)),
                     T);
    stack.clear();
    stack.push_back(Frame{t, T + 1 - t, full_set(K), full_set(K)});
    Event e;
    e.type = EventType::kEpisodeStart;
    e.round = t;
    e.episode = episode;
    events.push_back(std::move(e));
  }

  std::vector<Round> fired_durations(Round offset) const {
    if (opts.schedule_override) return opts.schedule_override(episode, offset);
    std::vector<Round> fired;
    for (Round m : schedule->durations()) {
      if (schedule->fires(offset, m)) fired.push_back(m);
    }
    return fired;
  }

  void remove_from_master(Arm a, Round s1) {
    auto it = std::find(master.begin(), master.end(), a);
    if (it == master.end()) return;
    master.erase(it);
    Event e;
    e.type = EventType::kEvictMaster;
    e.round = t;
    e.episode = episode;
    e.arm = a;
    e.s1 = s1;
    e.s2 = t - 1;
    events.push_back(std::move(e));
  }

  void pop_expired() {
    while (stack.size() > 1 && stack.back().expired(t)) {
      Event e;
      e.type = EventType::kReplayEnd;
      e.round = t;
      e.episode = episode;
      e.frame_start = stack.back().start;
      e.reason = "duration";
      events.push_back(std::move(e));
      stack.pop_back();
    }
  }

  void cross_check(const std::vector<std::optional<Round>>& dyadic_witness,
                   Round w_start) {
    EvictionConfig exact_cfg = opts.eviction;
    exact_cfg.scan = ScanMode::kExact;
    const auto exact = eviction_scan(sums, w_start, t, T, exact_cfg);
    for (Arm a = 0; a < K; ++a) {
      if (dyadic_witness[static_cast<size_t>(a)] && !exact[static_cast<size_t>(a)]) {
        ++cross_violations;
      }
    }
  }

  // Pops, evictions and the restart check for bookkeeping round t.
  void settle_round() {
    const bool checking = opts.eviction.scan == ScanMode::kDyadic &&
                          opts.cross_check_exact;

    pop_expired();

    // Master-set evictions over [t_l, t). The scan grid does not depend on
    // the active frame, so one scan per round covers every resume path.
    const auto mw = eviction_scan(sums, episode_start, t, T, opts.eviction);
    if (checking) cross_check(mw, episode_start);
    for (Arm a = 0; a < K; ++a) {
      if (mw[static_cast<size_t>(a)]) remove_from_master(a, *mw[static_cast<size_t>(a)]);
    }

    while (true) {
      Frame& top = stack.back();
      auto fw = eviction_scan(sums, top.start, t, T, opts.eviction);
      if (checking && top.start <= t - 1) cross_check(fw, top.start);

      std::vector<Arm> kept;
      kept.reserve(top.saved.size());
      for (Arm a : top.saved) {
        if (fw[static_cast<size_t>(a)]) {
          Event e;
          e.type = EventType::kEvictFrame;
          e.round = t;
          e.episode = episode;
          e.arm = a;
          e.frame_start = top.start;
          e.s1 = *fw[static_cast<size_t>(a)];
          e.s2 = t - 1;
          events.push_back(std::move(e));
          // An arm evicted by a replay is evicted from the master set too.
          remove_from_master(a, *fw[static_cast<size_t>(a)]);
        } else {
          kept.push_back(a);
        }
      }
      top.candidates = std::move(kept);

      if (master.empty()) {
        Event e;
        e.type = EventType::kRestart;
        e.round = t;
        e.episode = episode;
        events.push_back(std::move(e));
        ++restarts;
        stack.clear();
        new_episode();
        return;
      }
      if (top.candidates.empty()) {
        if (stack.size() == 1) {
          throw std::logic_error("meta: episode frame emptied while master arms remain");
        }
        Event e;
        e.type = EventType::kReplayEnd;
        e.round = t;
        e.episode = episode;
        e.frame_start = top.start;
        e.reason = "empty-candidates";
        events.push_back(std::move(e));
        stack.pop_back();
        pop_expired();
        continue;
      }
      return;
    }
  }
};

MetaPolicy::MetaPolicy(int K, Round horizon, MetaOptions options)
    : state_(std::make_unique<State>(K, horizon, std::move(options))) {
  if (K < 1) throw std::invalid_argument("meta: K must be >= 1");
  if (horizon < 1) throw std::invalid_argument("meta: horizon must be >= 1");
  if (state_->opts.record_candidates && K > 64) {
    throw std::invalid_argument("meta: candidate-mask recording requires K <= 64");
  }
  state_->new_episode();
}

MetaPolicy::~MetaPolicy() = default;

Arm MetaPolicy::select_arm() {
  State& s = *state_;
  if (s.done) throw end_of_horizon{};
  s.guard.on_select();
  const Frame& top = s.stack.back();
  if (top.candidates.empty()) {
    throw std::logic_error("meta: active frame has no candidate arms");
  }
  const auto idx = s.arm_stream.next_index(static_cast<std::int64_t>(top.candidates.size()));
  s.pending_arm = top.candidates[static_cast<size_t>(idx)];
  s.pending_size = static_cast<int>(top.candidates.size());
  s.pending_mask = s.opts.record_candidates ? set_mask(top.candidates) : 0;
  return s.pending_arm;
}

void MetaPolicy::observe(Arm arm, double reward) {
  State& s = *state_;
  if (s.done) throw std::logic_error("meta: observe called after the horizon");
  s.guard.on_observe(arm, reward, s.pending_arm);

  if (s.opts.record_candidates) {
    s.sizes.push_back(s.pending_size);
    s.masks.push_back(s.pending_mask);
  }
  s.sums.record(s.t, arm, static_cast<double>(s.pending_size) * reward);
  s.stack.back().saved = s.stack.back().candidates;
  ++s.t;
  if (s.t > s.T) {
    s.done = true;
    return;
  }

  // Replay check at the new round; the largest fired duration wins.
  const auto fired = s.fired_durations(s.t - s.episode_start);
  if (!fired.empty()) {
    const Round m = *std::max_element(fired.begin(), fired.end());
    s.stack.push_back(Frame{s.t, m, full_set(s.K), full_set(s.K)});
    Event e;
    e.type = EventType::kReplayStart;
    e.round = s.t;
    e.episode = s.episode;
    e.m0 = m;
    e.frame_start = s.t;
    s.events.push_back(std::move(e));
  }

  s.settle_round();
}

bool MetaPolicy::finished() const { return state_->done; }
Round MetaPolicy::current_round() const { return state_->t; }
long MetaPolicy::num_restarts() const { return state_->restarts; }
const std::vector<Event>& MetaPolicy::events() const { return state_->events; }
const PrefixSums& MetaPolicy::prefix_sums() const { return state_->sums; }
long MetaPolicy::cross_check_violations() const { return state_->cross_violations; }

TraceExtras MetaPolicy::extras() const {
  return {state_->events, state_->sizes, state_->masks};
}

MetaPolicy::DebugView MetaPolicy::debug_view() const {
  DebugView view;
  view.episode = state_->episode;
  view.episode_start = state_->episode_start;
  view.master = state_->master;
  for (const Frame& f : state_->stack) {
    view.frames.push_back({f.start, f.m0, f.candidates});
  }
  return view;
}

// ---------------------------------------------------------------------------
// DoublingPolicy
// ---------------------------------------------------------------------------

DoublingPolicy::DoublingPolicy(PolicyFactory factory)
    : factory_(std::move(factory)) {
  if (!factory_) throw std::invalid_argument("doubling: null policy factory");
}

DoublingPolicy::~DoublingPolicy() = default;

void DoublingPolicy::ensure_instance() {
  if (!inner_) {
    ++instance_;
    inner_ = factory_(Round{1} << instance_, instance_);
    inner_round_ = 0;
  }
}

Round DoublingPolicy::inner_horizon() const {
  return Round{1} << (inner_ ? instance_ : instance_ + 1);
}

Arm DoublingPolicy::select_arm() {
  guard_.on_select();
  ensure_instance();
  pending_arm_ = inner_->select_arm();
  return pending_arm_;
}

namespace {

void merge_extras(TraceExtras& into, TraceExtras&& from, Round base) {
  for (Event& e : from.events) {
    e.round += base;
    if (e.s1 > 0) e.s1 += base;
    if (e.s2 > 0) e.s2 += base;
    if (e.frame_start > 0) e.frame_start += base;
    into.events.push_back(std::move(e));
  }
  into.candidate_sizes.insert(into.candidate_sizes.end(),
                              from.candidate_sizes.begin(),
                              from.candidate_sizes.end());
  into.candidate_masks.insert(into.candidate_masks.end(),
                              from.candidate_masks.begin(),
                              from.candidate_masks.end());
}

}  // namespace

void DoublingPolicy::observe(Arm arm, double reward) {
  guard_.on_observe(arm, reward, pending_arm_);
  inner_->observe(arm, reward);
  ++inner_round_;
  ++global_round_;
  if (inner_round_ == (Round{1} << instance_)) {
    // Instance exhausted: fold its logs into global coordinates and drop it.
    merge_extras(merged_, inner_->extras(), (Round{1} << instance_) - 2);
    inner_.reset();
  }
}

TraceExtras DoublingPolicy::extras() const {
  TraceExtras out = merged_;
  if (inner_) {
    TraceExtras cur = inner_->extras();
    merge_extras(out, std::move(cur), (Round{1} << instance_) - 2);
  }
  return out;
}

}  // namespace shiftband::meta
