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
#include <deque>
#include <memory>
#include <vector>

#include "incsim/bridge_fifo.hpp"
#include "incsim/engine.hpp"
#include "incsim/ethernet.hpp"
#include "incsim/mux.hpp"
#include "incsim/postmaster.hpp"
#include "incsim/router.hpp"
#include "incsim/sideband.hpp"
#include "incsim/topology.hpp"

namespace incsim {

struct SystemOptions {
  SystemConfig topology;
  /// rx_capacity and payload_max_bytes are taken from `topology`.
  NetworkConfig network;
  std::uint64_t seed = 1;
  EthConfig ethernet;
  PostmasterConfig postmaster;
  SidebandConfig sideband;
};

/// One simulation instance: engine, topology, fabric and every protocol layer.
/// Endpoints are created on first use and live as long as the system.
class System {
 public:
  explicit System(SystemOptions options)
      : options_(fix(options)),
        sim_(options_.seed),
        topo_(Topology::build(options_.topology)),
        net_(sim_, topo_, options_.network),
        hub_(net_),
        sideband_(hub_, options_.sideband),
        eth_(topo_.node_count()),
        pm_targets_(topo_.node_count()),
        pm_initiators_(topo_.node_count()),
        gateways_(topo_.node_count()) {}

  System(const System&) = delete;
  System& operator=(const System&) = delete;

  const SystemOptions& options() const { return options_; }
  Simulator& sim() { return sim_; }
  const Topology& topology() const { return topo_; }
  Network& network() { return net_; }
  const Network& network() const { return net_; }
  ChannelHub& hub() { return hub_; }
  Sideband& sideband() { return sideband_; }
  const Sideband& sideband() const { return sideband_; }

  NodeId node(const Coord& c) const { return topo_.id(c); }

  EthInterface& ethernet(NodeId n) {
    auto& slot = eth_.at(n);
    if (!slot) {
      slot = std::make_unique<EthInterface>(hub_, n, options_.ethernet);
      slot->set_peer_lookup([this](NodeId m) { return eth_[m].get(); });
    }
    return *slot;
  }
  bool has_ethernet(NodeId n) const { return eth_.at(n) != nullptr; }

  PostmasterTarget& postmaster_target(NodeId n) {
    auto& slot = pm_targets_.at(n);
    if (!slot) slot = std::make_unique<PostmasterTarget>(hub_, n, options_.postmaster);
    return *slot;
  }
  PostmasterTarget* find_postmaster_target(NodeId n) { return pm_targets_.at(n).get(); }

  PostmasterInitiator& postmaster_initiator(NodeId n) {
    auto& slot = pm_initiators_.at(n);
    if (!slot) {
      slot = std::make_unique<PostmasterInitiator>(
          hub_, n, [this](NodeId t) { return pm_targets_.at(t).get(); }, options_.postmaster);
    }
    return *slot;
  }

  Gateway& gateway(NodeId n) {
    require_gateway(topo_, n);
    auto& slot = gateways_.at(n);
    if (!slot) slot = std::make_unique<Gateway>(hub_, ethernet(n));
    return *slot;
  }

  /// The Ethernet gateway node of the card holding `n`.
  NodeId card_gateway(NodeId n) const {
    Coord o = topo_.card_origin(topo_.card_index(n));
    return topo_.id({o.x + 1, o.y, o.z});
  }

  BridgeFifoChannel& open_bridge_fifo(std::uint8_t channel, NodeId src, NodeId dst, BridgeFifoConfig config = {}) {
    bridge_fifos_.push_back(std::make_unique<BridgeFifoChannel>(hub_, channel, src, dst, config));
    return *bridge_fifos_.back();
  }

  const std::deque<std::unique_ptr<BridgeFifoChannel>>& bridge_fifos() const { return bridge_fifos_; }
  const std::vector<std::unique_ptr<EthInterface>>& ethernet_interfaces() const { return eth_; }
  const std::vector<std::unique_ptr<PostmasterTarget>>& postmaster_targets() const { return pm_targets_; }
  const std::vector<std::unique_ptr<PostmasterInitiator>>& postmaster_initiators() const { return pm_initiators_; }

 private:
  static SystemOptions fix(SystemOptions o) {
    o.network.rx_capacity = o.topology.rx_buffer_bytes;
    o.network.payload_max_bytes = o.topology.payload_max_bytes;
    return o;
  }

  SystemOptions options_;
  Simulator sim_;
  Topology topo_;
  Network net_;
  ChannelHub hub_;
  Sideband sideband_;
  std::vector<std::unique_ptr<EthInterface>> eth_;
  std::vector<std::unique_ptr<PostmasterTarget>> pm_targets_;
  std::vector<std::unique_ptr<PostmasterInitiator>> pm_initiators_;
  std::vector<std::unique_ptr<Gateway>> gateways_;
  std::deque<std::unique_ptr<BridgeFifoChannel>> bridge_fifos_;
};

}  // namespace incsim
