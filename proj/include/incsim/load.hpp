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
#include <memory>
#include <random>

#include "incsim/system.hpp"

namespace incsim {

/// Cross traffic: every `period_ns` a random node sends a full-size directed
/// packet to another random node on an otherwise unused Ethernet channel.
/// Stops generating at `until`.
class BackgroundLoad {
 public:
  static constexpr std::uint8_t kChannel = 7;

  BackgroundLoad(System& sys, SimTime period_ns, SimTime until, std::uint64_t seed)
      : state_(std::make_shared<State>(State{&sys, std::mt19937_64(seed), period_ns, until, 0, 0})) {
    const Topology& topo = sys.topology();
    for (NodeId n = 0; n < topo.node_count(); ++n) {
      sys.hub().mux(n).register_rx(n, ProtocolId::Ethernet, kChannel, [s = state_](const Packet&) { ++s->received; });
    }
    sys.sim().schedule_in(0, [s = state_] { tick(s); });
  }

  std::uint64_t sent() const { return state_->sent; }
  std::uint64_t received() const { return state_->received; }

 private:
  struct State {
    System* sys;
    std::mt19937_64 rng;
    SimTime period;
    SimTime until;
    std::uint64_t sent;
    std::uint64_t received;
  };

  static void tick(const std::shared_ptr<State>& s) {
    System& sys = *s->sys;
    const Topology& t = sys.topology();
    if (t.node_count() < 2) return;
    const auto src = static_cast<NodeId>(s->rng() % t.node_count());
    auto dst = static_cast<NodeId>(s->rng() % (t.node_count() - 1));
    if (dst >= src) ++dst;
    if (sys.network().can_inject(src)) {
      PacketHeader h;
      h.dst = t.coord(dst);
      h.protocol = ProtocolId::Ethernet;
      h.channel = kChannel;
      sys.network().inject(src, h, Bytes(sys.hub().payload_max(), 0x5A));
      ++s->sent;
    }
    if (sys.sim().now() + s->period <= s->until) sys.sim().schedule_in(s->period, [s] { tick(s); });
  }

  std::shared_ptr<State> state_;
};

}  // namespace incsim
