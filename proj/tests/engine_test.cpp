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
#include <sstream>

#include "incsim/engine.hpp"

namespace incsim {
namespace {

TEST(Simulator, EmptyRunUntilAdvancesClock) {
  Simulator sim;
  RunStats s = sim.run_until(5'000);
  EXPECT_EQ(s.now, 5'000);
  EXPECT_EQ(s.events_executed, 0u);
  EXPECT_EQ(sim.now(), 5'000);
}

TEST(Simulator, EqualTimesRunInInsertionOrder) {
  Simulator sim;
  std::vector<int> order;
  for (int i = 0; i < 10; ++i) sim.schedule_at(100, [&, i] { order.push_back(i); });
  sim.schedule_at(50, [&] { order.push_back(-1); });
  sim.run();
  EXPECT_EQ(order, (std::vector<int>{-1, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

TEST(Simulator, RejectsEventsInThePast) {
  Simulator sim;
  sim.run_until(1'000);
  try {
    sim.schedule_at(999, [] {});
    FAIL();
  } catch (const SimError& e) {
    EXPECT_EQ(e.code(), ErrorCode::TimeTravel);
  }
  EXPECT_NO_THROW(sim.schedule_at(1'000, [] {}));
}

TEST(Simulator, RunUntilStopsAtHorizon) {
  Simulator sim;
  int fired = 0;
  sim.schedule_at(10, [&] { ++fired; });
  sim.schedule_at(20, [&] { ++fired; });
  sim.schedule_at(30, [&] { ++fired; });
  sim.run_until(20);
  EXPECT_EQ(fired, 2);
  EXPECT_EQ(sim.pending(), 1u);
}

std::string random_trace(std::uint64_t seed) {
  Simulator sim(seed);
  std::ostringstream trace;
  SimTime last = 0;
  bool monotone = true;
  std::function<void(int)> tick = [&](int depth) {
    monotone = monotone && sim.now() >= last;
    last = sim.now();
    trace << sim.now() << ':' << depth << ';';
    if (depth < 6) {
      int fan = static_cast<int>(sim.rng()() % 3);
      for (int i = 0; i < fan; ++i) {
        sim.schedule_in(static_cast<SimTime>(sim.rng()() % 50), [&, depth] { tick(depth + 1); });
      }
    }
  };
  for (int i = 0; i < 20; ++i) sim.schedule_at(static_cast<SimTime>(sim.rng()() % 100), [&] { tick(0); });
  sim.run();
  EXPECT_TRUE(monotone);
  return trace.str();
}

TEST(Simulator, SameSeedSameTrace) {
  EXPECT_EQ(random_trace(42), random_trace(42));
  EXPECT_NE(random_trace(42), random_trace(43));
}

TEST(LatencyModel, ReproducesBridgeFifoTable) {
  LatencyModel m;
  EXPECT_EQ(packet_latency(m, 0, 0), 250);
  EXPECT_EQ(packet_latency(m, 1, 0), 1100);
  EXPECT_EQ(packet_latency(m, 6, 0), 4700);
  EXPECT_EQ(packet_latency(m, 3, 0), 2540);
  EXPECT_NEAR(static_cast<double>(packet_latency(m, 3, 0)), 2500.0, 2500.0 * 0.02);
}

TEST(LatencyModel, SerializationIsStoreAndForward) {
  LatencyModel m;
  // 256 payload bytes at 1 GB/s: 256 ns per hop.
  EXPECT_EQ(packet_latency(m, 2, 256), 250 + 850 + 720 + 2 * 256);
  EXPECT_EQ(packet_latency(m, 0, 256), 250);
  EXPECT_EQ(serialization_ns(1, 1'000'000'000), 1);
  EXPECT_EQ(serialization_ns(3, 2'000'000'000), 2);  // rounds up
}

TEST(LatencyModel, RejectsNegativeParameters) {
  LatencyModel m;
  m.first_hop_ns = 100;  // below per-hop
  EXPECT_THROW(m.validate(), SimError);
}

}  // namespace
}  // namespace incsim
