/*
 * Copyright 2026 The incsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "incsim/common.hpp"

namespace incsim {

/// Piecewise-linear per-packet latency calibrated against the bridge FIFO
/// measurements (0.25 / 1.1 / 2.5 / 4.7 us at 0 / 1 / 3 / 6 hops).
///
/// The first hop costs more than later hops; the difference is charged once at
/// injection. Serialization is charged per hop on payload bytes; header time is
/// folded into the per-hop constant.
struct LatencyModel {
  SimTime endpoint_overhead_ns = 250;
  SimTime first_hop_ns = 850;
  SimTime per_additional_hop_ns = 720;

  /// Extra delay paid once when a packet enters the fabric.
  SimTime injection_ns() const { return first_hop_ns - per_additional_hop_ns; }

  void validate() const {
    if (endpoint_overhead_ns < 0 || first_hop_ns < 0 || per_additional_hop_ns < 0 ||
        first_hop_ns < per_additional_hop_ns) {
      throw SimError(ErrorCode::InvalidArgument, "latency parameters must be non-negative with first_hop >= per_hop");
    }
  }
};

/// Nanoseconds to move `bytes` over a link of `bandwidth` bytes/s, rounded up.
constexpr SimTime serialization_ns(std::uint64_t bytes, std::uint64_t bandwidth) {
  return bandwidth == 0 ? 0 : static_cast<SimTime>((bytes * 1'000'000'000ULL + bandwidth - 1) / bandwidth);
}

/// Idle-system latency of one packet travelling `hops` hops.
constexpr SimTime packet_latency(const LatencyModel& m, int hops, std::uint64_t payload_bytes,
                                 std::uint64_t bandwidth = 1'000'000'000) {
  SimTime t = m.endpoint_overhead_ns;
  if (hops >= 1) t += m.first_hop_ns + static_cast<SimTime>(hops - 1) * m.per_additional_hop_ns;
  t += static_cast<SimTime>(hops) * serialization_ns(payload_bytes, bandwidth);
  return t;
}

struct RunStats {
  SimTime now = 0;
  std::uint64_t events_executed = 0;
  std::size_t pending = 0;
};

/// Single-threaded discrete-event core. Events run in (time, insertion) order,
/// so a run is a pure function of its inputs and seed.
class Simulator {
 public:
  using Action = std::function<void()>;

  explicit Simulator(std::uint64_t seed = 1) : rng_(seed) {}

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  SimTime now() const { return now_; }
  std::uint64_t events_executed() const { return executed_; }
  std::size_t pending() const { return queue_.size(); }
  bool empty() const { return queue_.empty(); }
  std::mt19937_64& rng() { return rng_; }

  void schedule_at(SimTime t, Action action) {
    if (t < now_) {
      throw SimError(ErrorCode::TimeTravel,
                     "event at " + std::to_string(t) + " ns scheduled at " + std::to_string(now_) + " ns");
    }
    std::uint32_t slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
      actions_[slot] = std::move(action);
    } else {
      slot = static_cast<std::uint32_t>(actions_.size());
      actions_.push_back(std::move(action));
    }
    queue_.push(Entry{t, next_seq_++, slot});
  }

  void schedule_in(SimTime delay, Action action) { schedule_at(now_ + delay, std::move(action)); }

  /// Executes the earliest event. Returns false when the queue is empty.
  bool step() {
    if (queue_.empty()) return false;
    Entry e = queue_.top();
    queue_.pop();
    now_ = e.time;
    Action action = std::move(actions_[e.slot]);
    actions_[e.slot] = nullptr;
    free_.push_back(e.slot);
    ++executed_;
    action();
    return true;
  }

  /// Runs every event with time <= t, then advances the clock to t.
  RunStats run_until(SimTime t) {
    while (!queue_.empty() && queue_.top().time <= t) step();
    if (t > now_) now_ = t;
    return stats();
  }

  /// Runs until the queue drains.
  RunStats run() {
    while (step()) {
    }
    return stats();
  }

  /// Runs until `done()` holds or the queue drains; returns whether `done()` held.
  template <typename Pred>
  bool run_while_not(Pred done) {
    while (!done()) {
      if (!step()) return done();
    }
    return true;
  }

  RunStats stats() const { return RunStats{now_, executed_, queue_.size()}; }

 private:
  struct Entry {
    SimTime time;
    std::uint64_t seq;
    std::uint32_t slot;
    bool operator>(const Entry& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };

  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t executed_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue_;
  std::vector<Action> actions_;
  std::vector<std::uint32_t> free_;
  std::mt19937_64 rng_;
};

}  // namespace incsim
