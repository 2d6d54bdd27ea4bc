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

#include "incsim/system.hpp"
#include "traffic.hpp"

namespace incsim {
namespace {

using testing::options_for;

SimTime single_word_latency(const Coord& src, const Coord& dst, int width) {
  System sys(options_for(SystemConfig::card()));
  auto& ch = sys.open_bridge_fifo(0, sys.node(src), sys.node(dst), {.width = width});
  EXPECT_EQ(ch.push(0x55), PushResult::Accepted);
  sys.sim().run();
  EXPECT_EQ(ch.pop(), std::optional<std::uint64_t>(0x55));
  EXPECT_EQ(ch.latency().count(), 1u);
  return ch.latency().samples().front();
}

TEST(BridgeFifo, SingleWordLatencyMatchesTable) {
  EXPECT_EQ(single_word_latency({0, 0, 0}, {0, 0, 0}, 8), 250);
  EXPECT_EQ(single_word_latency({0, 0, 0}, {1, 0, 0}, 8), 1101);
  EXPECT_EQ(single_word_latency({0, 0, 0}, {1, 0, 0}, 32), 1104);
  EXPECT_EQ(single_word_latency({0, 0, 0}, {2, 2, 2}, 8), 4706);
}

TEST(BridgeFifo, PopOnUnusedChannelIsEmpty) {
  System sys(options_for(SystemConfig::card()));
  auto& ch = sys.open_bridge_fifo(3, 0, 5);
  EXPECT_FALSE(ch.pop().has_value());
}

TEST(BridgeFifo, WidthLimits) {
  System sys(options_for(SystemConfig::card()));
  EXPECT_THROW(sys.open_bridge_fifo(0, 0, 1, {.width = 6}), SimError);
  EXPECT_THROW(sys.open_bridge_fifo(1, 0, 1, {.width = 65}), SimError);
  auto& w7 = sys.open_bridge_fifo(2, 0, 1, {.width = 7});
  EXPECT_EQ(w7.push(127), PushResult::Accepted);
  try {
    w7.push(128);
    FAIL();
  } catch (const SimError& e) {
    EXPECT_EQ(e.code(), ErrorCode::WordTooWide);
  }
  auto& w64 = sys.open_bridge_fifo(3, 0, 1, {.width = 64});
  w64.push(~0ull);
  sys.sim().run();
  EXPECT_EQ(w7.pop(), std::optional<std::uint64_t>(127));
  EXPECT_EQ(w64.pop(), std::optional<std::uint64_t>(~0ull));
}

TEST(BridgeFifo, StagingBackpressure) {
  System sys(options_for(SystemConfig::card()));
  auto& ch = sys.open_bridge_fifo(0, 0, 26, {.width = 32, .tx_staging_words = 4, .aggregation_window_ns = 100});
  for (int i = 0; i < 4; ++i) EXPECT_EQ(ch.push(i), PushResult::Accepted);
  EXPECT_EQ(ch.push(4), PushResult::Backpressured);
  EXPECT_EQ(ch.stats().backpressure_events, 1u);
  sys.sim().run();
  for (std::uint64_t i = 0; i < 4; ++i) EXPECT_EQ(ch.pop(), std::optional<std::uint64_t>(i));
  EXPECT_FALSE(ch.pop().has_value());
}

TEST(BridgeFifo, ReorderBufferHoldsEarlyPacket) {
  System sys(options_for(SystemConfig::card()));
  const NodeId src = 0;
  const NodeId dst = sys.node({2, 2, 2});
  auto& ch = sys.open_bridge_fifo(9, src, dst);
  auto send = [&](std::uint32_t seq, std::uint32_t word) {
    PacketHeader h;
    h.dst = {2, 2, 2};
    h.protocol = ProtocolId::BridgeFifo;
    h.channel = 9;
    h.seq = seq;
    Bytes payload{static_cast<std::uint8_t>(word), 0, 0, 0};
    ASSERT_EQ(sys.network().inject(src, h, payload), InjectResult::Accepted);
  };
  send(1, 22);
  sys.sim().run();
  EXPECT_FALSE(ch.pop().has_value());
  EXPECT_EQ(ch.stats().max_reorder_occupancy, 1u);
  send(0, 11);
  sys.sim().run();
  EXPECT_EQ(ch.pop(), std::optional<std::uint64_t>(11));
  EXPECT_EQ(ch.pop(), std::optional<std::uint64_t>(22));
  EXPECT_FALSE(ch.pop().has_value());
}

TEST(BridgeFifo, OrderSurvivesCongestion) {
  System sys(options_for(SystemConfig::inc3000(), 11));
  auto noise = testing::background_load(sys, 2, 400'000, 99);
  auto& ch = sys.open_bridge_fifo(0, sys.node({0, 0, 0}), sys.node({11, 11, 2}), {.width = 16});
  std::vector<std::uint64_t> popped;
  for (int i = 0; i < 100; ++i) {
    sys.sim().schedule_at(1000 + i * 50, [&ch, i] { ASSERT_EQ(ch.push(static_cast<std::uint64_t>(i)), PushResult::Accepted); });
  }
  sys.sim().run();
  while (auto w = ch.pop()) popped.push_back(*w);
  ASSERT_EQ(popped.size(), 100u);
  for (std::size_t i = 0; i < popped.size(); ++i) EXPECT_EQ(popped[i], i);
  EXPECT_GT(noise->received(), 0u);
  EXPECT_TRUE(sys.network().credits_conserved());
}

TEST(BridgeFifo, ThirtyTwoChannelsThroughOneMuxPair) {
  System sys(options_for(SystemConfig::inc3000(), 4));
  const NodeId a = sys.node({1, 1, 0});
  const NodeId b = sys.node({9, 10, 2});
  std::vector<BridgeFifoChannel*> chans;
  for (std::uint8_t c = 0; c < 32; ++c) chans.push_back(&sys.open_bridge_fifo(c, a, b, {.width = 24}));
  try {
    sys.open_bridge_fifo(32, a, b);
    FAIL();
  } catch (const SimError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ChannelExhausted);
  }
  auto noise = testing::background_load(sys, 3, 300'000, 5);
  std::mt19937 rng(8);
  std::vector<std::uint64_t> next(32, 0);
  for (int k = 0; k < 3200; ++k) {
    const std::size_t c = rng() % 32;
    const std::uint64_t w = next[c]++;
    sys.sim().schedule_at(500 + k * 20, [ch = chans[c], w] { ASSERT_EQ(ch->push(w), PushResult::Accepted); });
  }
  sys.sim().run();
  for (std::size_t c = 0; c < 32; ++c) {
    std::uint64_t expect = 0;
    while (auto w = chans[c]->pop()) {
      ASSERT_EQ(*w, expect++) << "channel " << c;
    }
    EXPECT_EQ(expect, next[c]);
  }
  EXPECT_GT(noise->received(), 0u);
}

TEST(PacketMux, RegistrationLimits) {
  PacketMux mux;
  for (std::uint8_t c = 0; c < 32; ++c) mux.register_tx(0, ProtocolId::BridgeFifo, c);
  EXPECT_THROW(mux.register_tx(0, ProtocolId::BridgeFifo, 32), SimError);
  EXPECT_THROW(mux.register_tx(0, ProtocolId::BridgeFifo, 3), SimError);
  mux.register_tx(0, ProtocolId::Ethernet, 3);
}

TEST(PacketMux, UnknownProtocolDroppedAndCounted) {
  System sys(options_for(SystemConfig::card()));
  PacketHeader h;
  h.dst = {1, 0, 0};
  h.protocol = static_cast<ProtocolId>(9);
  sys.network().inject(0, h, Bytes{1, 2, 3});
  h.protocol = ProtocolId::BridgeFifo;
  h.channel = 30;
  sys.network().inject(0, h, Bytes{1, 2, 3});
  sys.sim().run();
  EXPECT_EQ(sys.hub().unknown_dropped(), 2u);
  EXPECT_EQ(sys.network().stats().delivered, 2u);
}

TEST(PacketMux, EthernetAndBridgeFifoShareANode) {
  System sys(options_for(SystemConfig::card()));
  const NodeId a = sys.node({0, 1, 0});
  const NodeId b = sys.node({2, 1, 2});
  auto& ch = sys.open_bridge_fifo(0, a, b);
  auto& tx = sys.ethernet(a);
  auto& rx = sys.ethernet(b);
  Bytes frame(700);
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = static_cast<std::uint8_t>(i * 7);
  for (int i = 0; i < 50; ++i) {
    ch.push(static_cast<std::uint64_t>(i));
    if (i % 10 == 0) {
      ASSERT_EQ(tx.send({2, 1, 2}, frame), EthInterface::SendStatus::Queued);
    }
  }
  sys.sim().run();
  auto frames = rx.poll();
  ASSERT_EQ(frames.size(), 5u);
  for (const Frame& f : frames) EXPECT_EQ(f.data, frame);
  for (std::uint64_t i = 0; i < 50; ++i) EXPECT_EQ(ch.pop(), std::optional<std::uint64_t>(i));
  EXPECT_EQ(sys.hub().unknown_dropped(), 0u);
}

}  // namespace
}  // namespace incsim
