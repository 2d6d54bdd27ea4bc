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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "incsim/topology.hpp"
#include "oracles.hpp"

namespace incsim {
namespace {

TEST(Topology, PresetNodeCounts) {
  EXPECT_EQ(build_topology(SystemConfig::card()).node_count(), 27u);
  EXPECT_EQ(build_topology(SystemConfig::inc3000()).node_count(), 432u);
  EXPECT_EQ(build_topology(SystemConfig::inc9000()).node_count(), 1728u);
}

TEST(Topology, RejectsExtentsThatDoNotTileCards) {
  for (Coord dims : {Coord{4, 3, 3}, Coord{0, 3, 3}, Coord{3, 3, -3}, Coord{3, 5, 3}}) {
    SystemConfig c;
    c.dims = dims;
    try {
      build_topology(c);
      FAIL() << "expected InvalidExtent";
    } catch (const SimError& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidExtent);
    }
  }
}

TEST(Topology, CardRolesAndLabels) {
  Topology t = build_topology(SystemConfig::inc3000());
  std::map<NodeRole, int> per_role;
  for (NodeId n = 0; n < t.node_count(); ++n) per_role[t.role(n)]++;
  EXPECT_EQ(per_role[NodeRole::EthernetGateway], 16);
  EXPECT_EQ(per_role[NodeRole::PcieController], 16);
  EXPECT_EQ(per_role[NodeRole::PcieAux], 16);

  Topology card = build_topology(SystemConfig::card());
  EXPECT_EQ(card.role(card.id({1, 0, 0})), NodeRole::EthernetGateway);
  EXPECT_EQ(card.role(card.id({0, 0, 0})), NodeRole::PcieController);
  EXPECT_EQ(card.role(card.id({2, 0, 0})), NodeRole::PcieAux);
  EXPECT_EQ(card.role(card.id({1, 1, 1})), NodeRole::Compute);
  EXPECT_EQ(card.coord(card.id({1, 0, 0})).label(), "100");
}

TEST(Topology, SingleCardHasNoMultiSpanLinks) {
  Topology t = build_topology(SystemConfig::card());
  EXPECT_EQ(t.count_links(Span::Multi), 0u);
  // 3 axes * 9 lines * 2 adjacent pairs * 2 directions
  EXPECT_EQ(t.count_links(Span::Single), 108u);
  const NodeId centre = t.id({1, 1, 1});
  EXPECT_EQ(t.out_links(centre).size(), 6u);
}

TEST(Topology, LinkSetMatchesCoordinateEnumeration) {
  for (SystemConfig cfg : {SystemConfig::card(), SystemConfig::inc3000()}) {
    Topology t = build_topology(cfg);
    std::set<std::pair<Coord, Coord>> expected;
    for (auto& l : oracle::all_links(cfg.dims)) expected.insert(l);
    std::set<std::pair<Coord, Coord>> actual;
    for (const LinkSpec& s : t.links()) actual.emplace(s.src, s.dst);
    EXPECT_EQ(actual, expected);
  }
}

TEST(Topology, StructuralInvariants) {
  for (SystemConfig cfg : {SystemConfig::card(), SystemConfig::inc3000(), SystemConfig::inc9000()}) {
    Topology t = build_topology(cfg);
    std::vector<int> single(t.node_count()), multi(t.node_count());
    for (LinkId l = 0; l < t.link_count(); ++l) {
      const LinkSpec& s = t.link(l);
      int delta = s.dst[s.axis] - s.src[s.axis];
      int off_axis = 0;
      for (Axis a : kAxes)
        if (a != s.axis) off_axis += std::abs(s.dst[a] - s.src[a]);
      EXPECT_EQ(off_axis, 0);
      EXPECT_EQ(delta, s.dir * (s.span == Span::Single ? 1 : 3));
      if (s.span == Span::Multi) {
        EXPECT_NE(Topology::card_of(s.src), Topology::card_of(s.dst));
        ++multi[t.link_src(l)];
      } else {
        ++single[t.link_src(l)];
      }
      // Pairing: the reverse link exists with the same span, axis and bandwidth.
      LinkId r = t.reverse(l);
      ASSERT_NE(r, kNoLink);
      EXPECT_EQ(t.link(r).src, s.dst);
      EXPECT_EQ(t.link(r).dst, s.src);
      EXPECT_EQ(t.link(r).span, s.span);
      EXPECT_EQ(t.link(r).axis, s.axis);
      EXPECT_EQ(t.link(r).bandwidth, s.bandwidth);
    }
    for (NodeId n = 0; n < t.node_count(); ++n) {
      EXPECT_LE(single[n], 6);
      EXPECT_LE(multi[n], 6);
    }
  }
}

TEST(Topology, InteriorNodeOfLargeSystemHasTwelveLinks) {
  Topology t = build_topology(SystemConfig::inc9000());
  EXPECT_EQ(t.out_links(t.id({5, 5, 5})).size(), 12u);
}

TEST(Topology, OutLinksFollowTieBreakOrder) {
  Topology t = build_topology(SystemConfig::inc3000());
  const NodeId n = t.id({4, 4, 1});
  auto out = t.out_links(n);
  int last = -1;
  for (LinkId l : out) {
    const LinkSpec& s = t.link(l);
    int slot = Topology::slot_of(s.span, s.axis, s.dir);
    EXPECT_GT(slot, last);
    last = slot;
  }
}

TEST(Topology, MinHopsExamples) {
  Topology card = build_topology(SystemConfig::card());
  EXPECT_EQ(card.min_hops(Coord{1, 2, 0}, Coord{1, 2, 0}), 0);
  EXPECT_EQ(card.min_hops(Coord{0, 0, 0}, Coord{2, 2, 2}), 6);
  Topology inc = build_topology(SystemConfig::inc3000());
  EXPECT_EQ(inc.min_hops(Coord{0, 0, 0}, Coord{4, 0, 0}), 2);
  EXPECT_THROW(inc.min_hops(Coord{0, 0, 0}, Coord{12, 0, 0}), SimError);
}

TEST(Topology, MinHopsAgreesWithOracleBfsExhaustively) {
  for (SystemConfig cfg : {SystemConfig::card(), SystemConfig::inc3000()}) {
    Topology t = build_topology(cfg);
    for (NodeId a = 0; a < t.node_count(); ++a) {
      std::vector<int> ref = oracle::bfs(cfg.dims, t.coord(a));
      std::vector<int> lib_bfs = t.bfs_distances(a);
      for (NodeId b = 0; b < t.node_count(); ++b) {
        ASSERT_EQ(t.min_hops(a, b), ref[b]) << t.coord(a) << " -> " << t.coord(b);
        ASSERT_EQ(lib_bfs[b], ref[b]);
      }
    }
  }
}

TEST(Topology, ClosedFormMatchesBfsOnSampledInc9000Pairs) {
  Topology t = build_topology(SystemConfig::inc9000());
  std::mt19937 rng(7);
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(t.node_count() - 1));
  int checked = 0;
  for (int s = 0; s < 40; ++s) {
    NodeId a = pick(rng);
    std::vector<int> ref = t.bfs_distances(a);
    for (int k = 0; k < 300; ++k) {
      NodeId b = pick(rng);
      ASSERT_EQ(t.min_hops(a, b), ref[b]);
      ++checked;
    }
  }
  EXPECT_GE(checked, 10'000);
}

TEST(Topology, MinHopsIsSymmetricAndObeysTriangleInequality) {
  Topology t = build_topology(SystemConfig::inc3000());
  std::mt19937 rng(11);
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(t.node_count() - 1));
  for (int i = 0; i < 20'000; ++i) {
    NodeId a = pick(rng), b = pick(rng), c = pick(rng);
    ASSERT_EQ(t.min_hops(a, b), t.min_hops(b, a));
    ASSERT_LE(t.min_hops(a, c), t.min_hops(a, b) + t.min_hops(b, c));
  }
}

TEST(Topology, Inc3000BisectionIs288GBps) {
  Topology t = build_topology(SystemConfig::inc3000());
  EXPECT_EQ(t.bisection_link_count(Axis::X), 288u);
  EXPECT_EQ(t.bisection_bandwidth(Axis::X), 288'000'000'000ull);
  EXPECT_EQ(t.bisection_bandwidth(Axis::Y), 288'000'000'000ull);
}

TEST(Topology, OddExtentHasNoBisection) {
  Topology card = build_topology(SystemConfig::card());
  try {
    card.bisection_bandwidth(Axis::X);
    FAIL();
  } catch (const SimError& e) {
    EXPECT_EQ(e.code(), ErrorCode::OddExtent);
  }
  Topology inc = build_topology(SystemConfig::inc3000());
  EXPECT_THROW(inc.bisection_bandwidth(Axis::Z), SimError);
}

TEST(Topology, Inc9000BisectionMatchesEnumeration) {
  const Coord dims{12, 12, 12};
  std::size_t crossing = 0;
  for (auto& [a, b] : oracle::all_links(dims)) crossing += (a.z < 6) != (b.z < 6);
  Topology t = build_topology(SystemConfig::inc9000());
  EXPECT_EQ(t.bisection_link_count(Axis::Z), crossing);
  EXPECT_EQ(crossing, 1152u);
  EXPECT_EQ(t.bisection_bandwidth(Axis::Z), crossing * 1'000'000'000ull);
}

TEST(Topology, OffCardLinks) {
  Topology inc9 = build_topology(SystemConfig::inc9000());
  OffCardCount interior = inc9.offcard_link_count({3, 3, 3});
  EXPECT_EQ(interior.links, 432u);
  EXPECT_EQ(interior.bandwidth, 432'000'000'000ull);
  EXPECT_FALSE(interior.boundary_card);

  Topology card = build_topology(SystemConfig::card());
  OffCardCount single = card.offcard_link_count({0, 0, 0});
  EXPECT_EQ(single.links, 0u);
  EXPECT_TRUE(single.boundary_card);

  Topology inc3 = build_topology(SystemConfig::inc3000());
  OffCardCount corner = inc3.offcard_link_count({0, 0, 0});
  EXPECT_LT(corner.links, 432u);
  EXPECT_TRUE(corner.boundary_card);
  // Corner card: the +X and +Y faces only, 9 single + 27 multi pairs each.
  EXPECT_EQ(corner.links, 2u * 2u * (9u + 27u));

  EXPECT_THROW(inc3.offcard_link_count({1, 0, 0}), SimError);
}

TEST(Topology, JsonExport) {
  Topology t = build_topology(SystemConfig::card());
  nlohmann::json j = t.to_json();
  EXPECT_EQ(j["dims"], nlohmann::json::array({3, 3, 3}));
  EXPECT_EQ(j["nodes"].size(), 27u);
  EXPECT_EQ(j["links"].size(), t.link_count());
  EXPECT_EQ(j["nodes"][1]["role"], "EthernetGateway");
  EXPECT_EQ(j["links"][0]["span"], "single");
  EXPECT_EQ(j["links"][0]["axis"], "X");
  EXPECT_EQ(j["links"][0]["dir"], 1);
}

TEST(Topology, CardNodesInRingOrder) {
  Topology t = build_topology(SystemConfig::inc3000());
  auto nodes = t.card_nodes(5);
  ASSERT_EQ(nodes.size(), 27u);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    EXPECT_EQ(Topology::local_index(t.coord(nodes[i])), static_cast<int>(i));
    EXPECT_EQ(t.card_index(nodes[i]), 5u);
  }
}

}  // namespace
}  // namespace incsim
