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
#include <cstdlib>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "incsim/common.hpp"

namespace incsim {

/// Card edge length in nodes; cards are 3x3x3 blocks.
inline constexpr int kCardEdge = 3;
inline constexpr int kMultiSpanLength = 3;

enum class NodeRole : std::uint8_t { Compute, EthernetGateway, PcieController, PcieAux };

constexpr std::string_view to_string(NodeRole r) {
  switch (r) {
    case NodeRole::Compute: return "Compute";
    case NodeRole::EthernetGateway: return "EthernetGateway";
    case NodeRole::PcieController: return "PcieController";
    case NodeRole::PcieAux: return "PcieAux";
  }
  return "Compute";
}

enum class Span : std::uint8_t { Single = 0, Multi = 1 };

struct LinkSpec {
  Coord src;
  Coord dst;
  Span span = Span::Single;
  Axis axis = Axis::X;
  int dir = +1;                      // +1 or -1
  std::uint64_t bandwidth = 0;       // bytes per second
};

struct SystemConfig {
  Coord dims{3, 3, 3};
  std::uint64_t link_bandwidth = 1'000'000'000;  // 1 GB/s
  std::uint32_t rx_buffer_bytes = 4096;
  std::uint32_t payload_max_bytes = 256;

  static SystemConfig card() { return {}; }
  static SystemConfig inc3000() {
    SystemConfig c;
    c.dims = {12, 12, 3};
    return c;
  }
  static SystemConfig inc9000() {
    SystemConfig c;
    c.dims = {12, 12, 12};
    return c;
  }

  /// "card", "inc3000" or "inc9000" (case-insensitive).
  static SystemConfig preset(std::string_view name) {
    std::string lower;
    for (char ch : name) lower.push_back(static_cast<char>(ch >= 'A' && ch <= 'Z' ? ch - 'A' + 'a' : ch));
    if (lower == "card") return card();
    if (lower == "inc3000") return inc3000();
    if (lower == "inc9000") return inc9000();
    throw SimError(ErrorCode::InvalidArgument, "unknown preset '" + std::string(name) + "'");
  }
};

/// Result of counting links across a card boundary.
struct OffCardCount {
  std::size_t links = 0;     // unidirectional links with exactly one endpoint in the card
  bool boundary_card = false;  // some neighbouring card position lies outside the system
  std::uint64_t bandwidth = 0;
};

/// Immutable 3D mesh with single-span (distance 1) and multi-span (distance 3) links.
/// Boundary nodes simply lack out-of-range links; there is no wraparound.
class Topology {
 public:
  /// Slots per node in the adjacency index: {single, multi} x {X, Y, Z} x {+, -}.
  static constexpr int kSlotsPerNode = 12;

  static constexpr int slot_of(Span span, Axis axis, int dir) {
    return static_cast<int>(span) * 6 + static_cast<int>(axis) * 2 + (dir < 0 ? 1 : 0);
  }

  static Topology build(const SystemConfig& config) {
    const Coord& d = config.dims;
    for (Axis a : kAxes) {
      if (d[a] <= 0 || d[a] % kCardEdge != 0) {
        throw SimError(ErrorCode::InvalidExtent,
                       std::string("extent along ") + axis_name(a) + " is " + std::to_string(d[a]) +
                           ", must be a positive multiple of 3");
      }
      if (d[a] > 255) {
        throw SimError(ErrorCode::InvalidExtent, "extent above 255 does not fit the packet header");
      }
    }
    Topology t;
    t.config_ = config;
    const std::size_t n = static_cast<std::size_t>(d.x) * d.y * d.z;
    t.roles_.assign(n, NodeRole::Compute);
    t.adjacency_.assign(n * kSlotsPerNode, kNoLink);

    for (NodeId id = 0; id < n; ++id) {
      Coord c = t.coord(id);
      Coord local{c.x % kCardEdge, c.y % kCardEdge, c.z % kCardEdge};
      if (local == Coord{1, 0, 0}) t.roles_[id] = NodeRole::EthernetGateway;
      if (local == Coord{0, 0, 0}) t.roles_[id] = NodeRole::PcieController;
      if (local == Coord{2, 0, 0}) t.roles_[id] = NodeRole::PcieAux;
    }

    // Links are created in slot order per node so that link ids sort like the routing tie-break.
    for (NodeId id = 0; id < n; ++id) {
      const Coord c = t.coord(id);
      for (Span span : {Span::Single, Span::Multi}) {
        const int len = span == Span::Single ? 1 : kMultiSpanLength;
        for (Axis axis : kAxes) {
          for (int dir : {+1, -1}) {
            Coord to = c;
            to[axis] += dir * len;
            if (!t.in_bounds(to)) continue;
            LinkId lid = static_cast<LinkId>(t.links_.size());
            t.links_.push_back(LinkSpec{c, to, span, axis, dir, config.link_bandwidth});
            t.link_src_.push_back(id);
            t.link_dst_.push_back(t.id(to));
            t.adjacency_[id * kSlotsPerNode + slot_of(span, axis, dir)] = lid;
          }
        }
      }
    }
    t.reverse_.resize(t.links_.size());
    for (LinkId l = 0; l < t.links_.size(); ++l) {
      const LinkSpec& s = t.links_[l];
      t.reverse_[l] = t.adjacency_[t.link_dst_[l] * kSlotsPerNode + slot_of(s.span, s.axis, -s.dir)];
    }
    t.out_.resize(n);
    for (NodeId id = 0; id < n; ++id) {
      for (int s = 0; s < kSlotsPerNode; ++s) {
        LinkId l = t.adjacency_[id * kSlotsPerNode + s];
        if (l != kNoLink) t.out_[id].push_back(l);
      }
    }
    return t;
  }

  const SystemConfig& config() const { return config_; }
  const Coord& dims() const { return config_.dims; }
  std::size_t node_count() const { return roles_.size(); }
  std::size_t link_count() const { return links_.size(); }

  bool in_bounds(const Coord& c) const {
    const Coord& d = config_.dims;
    return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < d.x && c.y < d.y && c.z < d.z;
  }

  NodeId id(const Coord& c) const {
    if (!in_bounds(c)) {
      std::string s = std::to_string(c.x) + "," + std::to_string(c.y) + "," + std::to_string(c.z);
      throw SimError(ErrorCode::OutOfBounds, "node " + s + " is outside the mesh");
    }
    const Coord& d = config_.dims;
    return static_cast<NodeId>(c.x + d.x * (c.y + d.y * c.z));
  }

  Coord coord(NodeId id) const {
    const Coord& d = config_.dims;
    int i = static_cast<int>(id);
    return Coord{i % d.x, (i / d.x) % d.y, i / (d.x * d.y)};
  }

  NodeRole role(NodeId id) const { return roles_.at(id); }

  const std::vector<LinkSpec>& links() const { return links_; }
  const LinkSpec& link(LinkId l) const { return links_[l]; }
  NodeId link_src(LinkId l) const { return link_src_[l]; }
  NodeId link_dst(LinkId l) const { return link_dst_[l]; }
  LinkId reverse(LinkId l) const { return reverse_[l]; }

  /// Outgoing link ids in routing tie-break order: +X,-X,+Y,-Y,+Z,-Z single, then multi.
  std::span<const LinkId> out_links(NodeId id) const { return out_[id]; }

  LinkId link_at(NodeId id, Span span, Axis axis, int dir) const {
    return adjacency_[id * kSlotsPerNode + slot_of(span, axis, dir)];
  }

  // ---- cards -------------------------------------------------------------

  Coord card_dims() const {
    const Coord& d = config_.dims;
    return {d.x / kCardEdge, d.y / kCardEdge, d.z / kCardEdge};
  }
  std::size_t card_count() const {
    Coord c = card_dims();
    return static_cast<std::size_t>(c.x) * c.y * c.z;
  }
  static Coord card_of(const Coord& c) { return {c.x / kCardEdge, c.y / kCardEdge, c.z / kCardEdge}; }
  static int local_index(const Coord& c) {
    return c.x % kCardEdge + kCardEdge * (c.y % kCardEdge) + kCardEdge * kCardEdge * (c.z % kCardEdge);
  }
  std::size_t card_index(NodeId id) const {
    Coord card = card_of(coord(id));
    Coord cd = card_dims();
    return static_cast<std::size_t>(card.x + cd.x * (card.y + cd.y * card.z));
  }
  Coord card_origin(std::size_t card_index) const {
    Coord cd = card_dims();
    int i = static_cast<int>(card_index);
    if (card_index >= card_count()) {
      throw SimError(ErrorCode::OutOfBounds, "card " + std::to_string(card_index) + " does not exist");
    }
    return {kCardEdge * (i % cd.x), kCardEdge * ((i / cd.x) % cd.y), kCardEdge * (i / (cd.x * cd.y))};
  }
  /// The 27 nodes of a card in ascending card-local index order (x + 3y + 9z).
  std::vector<NodeId> card_nodes(std::size_t card_index) const {
    Coord o = card_origin(card_index);
    std::vector<NodeId> out;
    out.reserve(27);
    for (int z = 0; z < kCardEdge; ++z)
      for (int y = 0; y < kCardEdge; ++y)
        for (int x = 0; x < kCardEdge; ++x) out.push_back(id({o.x + x, o.y + y, o.z + z}));
    return out;
  }

  // ---- metrics -----------------------------------------------------------

  /// Minimal hops along one axis with +-1 and +-3 steps: floor(d/3) + d mod 3.
  static constexpr int axis_hops(int displacement) {
    int d = displacement < 0 ? -displacement : displacement;
    return d / kMultiSpanLength + d % kMultiSpanLength;
  }

  /// Shortest-path hop count. The link graph is the Cartesian product of per-axis
  /// line graphs, so the distance is the sum of per-axis distances; bfs_distances()
  /// is the reference this must agree with.
  int min_hops(const Coord& a, const Coord& b) const {
    if (!in_bounds(a) || !in_bounds(b)) throw SimError(ErrorCode::OutOfBounds, "min_hops endpoint out of bounds");
    return min_hops_unchecked(a, b);
  }
  int min_hops(NodeId a, NodeId b) const { return min_hops_unchecked(coord(a), coord(b)); }

  /// Breadth-first search over the actual link graph.
  std::vector<int> bfs_distances(NodeId src) const {
    std::vector<int> dist(node_count(), -1);
    std::deque<NodeId> frontier{src};
    dist[src] = 0;
    while (!frontier.empty()) {
      NodeId n = frontier.front();
      frontier.pop_front();
      for (LinkId l : out_[n]) {
        NodeId m = link_dst_[l];
        if (dist[m] < 0) {
          dist[m] = dist[n] + 1;
          frontier.push_back(m);
        }
      }
    }
    return dist;
  }

  /// Unidirectional links crossing the mid-plane of `axis`.
  std::size_t bisection_link_count(Axis axis) const {
    int extent = config_.dims[axis];
    if (extent % 2 != 0) {
      throw SimError(ErrorCode::OddExtent, std::string("extent ") + std::to_string(extent) + " along " +
                                               axis_name(axis) + " has no balanced cut");
    }
    int half = extent / 2;
    std::size_t count = 0;
    for (const LinkSpec& s : links_) {
      if ((s.src[axis] < half) != (s.dst[axis] < half)) ++count;
    }
    return count;
  }

  /// Bytes per second across the balanced mid-plane cut, both directions counted.
  std::uint64_t bisection_bandwidth(Axis axis) const {
    bisection_link_count(axis);  // validates the cut
    const int half = config_.dims[axis] / 2;
    std::uint64_t total = 0;
    for (const LinkSpec& s : links_) {
      if ((s.src[axis] < half) != (s.dst[axis] < half)) total += s.bandwidth;
    }
    return total;
  }

  OffCardCount offcard_link_count(const Coord& origin) const {
    if (!in_bounds(origin) || origin.x % kCardEdge || origin.y % kCardEdge || origin.z % kCardEdge) {
      throw SimError(ErrorCode::NotCardOrigin, "card origin must be an in-bounds multiple of 3");
    }
    auto inside = [&](const Coord& c) {
      return c.x >= origin.x && c.x < origin.x + kCardEdge && c.y >= origin.y && c.y < origin.y + kCardEdge &&
             c.z >= origin.z && c.z < origin.z + kCardEdge;
    };
    OffCardCount out;
    for (const LinkSpec& s : links_) {
      if (inside(s.src) != inside(s.dst)) {
        ++out.links;
        out.bandwidth += s.bandwidth;
      }
    }
    for (Axis a : kAxes) {
      for (int dir : {+1, -1}) {
        Coord neighbour = origin;
        neighbour[a] += dir * kCardEdge;
        if (!in_bounds(neighbour)) out.boundary_card = true;
      }
    }
    return out;
  }

  std::size_t count_links(Span span) const {
    std::size_t n = 0;
    for (const LinkSpec& s : links_) n += s.span == span;
    return n;
  }

  nlohmann::json to_json() const {
    using nlohmann::json;
    auto c3 = [](const Coord& c) { return json::array({c.x, c.y, c.z}); };
    json nodes = json::array();
    for (NodeId id = 0; id < node_count(); ++id) {
      nodes.push_back({{"coord", c3(coord(id))}, {"role", std::string(to_string(roles_[id]))}});
    }
    json links = json::array();
    for (const LinkSpec& s : links_) {
      links.push_back({{"src", c3(s.src)},
                       {"dst", c3(s.dst)},
                       {"span", s.span == Span::Single ? "single" : "multi"},
                       {"axis", std::string(1, axis_name(s.axis))},
                       {"dir", s.dir}});
    }
    return json{{"dims", c3(config_.dims)}, {"nodes", std::move(nodes)}, {"links", std::move(links)}};
  }

 private:
  Topology() = default;

  static int min_hops_unchecked(const Coord& a, const Coord& b) {
    return axis_hops(b.x - a.x) + axis_hops(b.y - a.y) + axis_hops(b.z - a.z);
  }

  SystemConfig config_;
  std::vector<NodeRole> roles_;
  std::vector<LinkSpec> links_;
  std::vector<NodeId> link_src_;
  std::vector<NodeId> link_dst_;
  std::vector<LinkId> reverse_;
  std::vector<LinkId> adjacency_;
  std::vector<std::vector<LinkId>> out_;
};

inline Topology build_topology(const SystemConfig& config) { return Topology::build(config); }

}  // namespace incsim
