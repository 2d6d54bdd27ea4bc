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

#include "credit_stress.hpp"
#include "incsim/fabric.hpp"

namespace incsim {
namespace {

LinkSpec test_spec() { return LinkSpec{{0, 0, 0}, {1, 0, 0}, Span::Single, Axis::X, +1, 1'000'000'000}; }

CreditedLink make_link(std::uint32_t capacity = 4096, std::uint32_t threshold = 256) {
  FabricConfig fc;
  fc.rx_capacity = capacity;
  fc.credit_return_threshold = threshold;
  return CreditedLink(test_spec(), fc);
}

TEST(CreditedLink, AcceptsWithinCredit) {
  CreditedLink l = make_link();
  TransmitResult r = l.try_transmit(256, 0);
  ASSERT_TRUE(std::holds_alternative<Accepted>(r));
  EXPECT_EQ(l.tx_credits(), 3840u);
  EXPECT_EQ(l.in_flight(), 256u);
  // 256 bytes at 1 GB/s, then one hop.
  EXPECT_EQ(std::get<Accepted>(r).tx_done, 256);
  EXPECT_EQ(std::get<Accepted>(r).arrival, 256 + 720);
  EXPECT_TRUE(l.conserves_credits());
}

TEST(CreditedLink, BlocksWithoutEnoughCreditAndLeavesStateAlone) {
  CreditedLink l = make_link(100);
  TransmitResult r = l.try_transmit(256, 0);
  ASSERT_TRUE(std::holds_alternative<Blocked>(r));
  EXPECT_EQ(std::get<Blocked>(r).reason, BlockReason::InsufficientCredits);
  EXPECT_EQ(l.tx_credits(), 100u);
  EXPECT_EQ(l.in_flight(), 0u);
}

TEST(CreditedLink, ZeroCreditsBlockEverything) {
  CreditedLink l = make_link(256);
  ASSERT_TRUE(std::holds_alternative<Accepted>(l.try_transmit(256, 0)));
  EXPECT_EQ(l.tx_credits(), 0u);
  for (std::uint32_t n : {1u, 16u, 256u}) {
    auto r = l.try_transmit(n, 10'000);
    ASSERT_TRUE(std::holds_alternative<Blocked>(r));
    EXPECT_EQ(std::get<Blocked>(r).reason, BlockReason::InsufficientCredits);
  }
}

TEST(CreditedLink, BusyWhileSerializing) {
  CreditedLink l = make_link();
  ASSERT_TRUE(std::holds_alternative<Accepted>(l.try_transmit(256, 0)));
  auto r = l.try_transmit(16, 100);
  ASSERT_TRUE(std::holds_alternative<Blocked>(r));
  EXPECT_EQ(std::get<Blocked>(r).reason, BlockReason::LinkBusy);
  EXPECT_TRUE(std::holds_alternative<Accepted>(l.try_transmit(16, 256)));
}

TEST(CreditedLink, CompleteTransferMovesBytesIntoBuffer) {
  CreditedLink l = make_link();
  l.try_transmit(256, 0);
  l.complete_transfer(256, 976);
  EXPECT_EQ(l.in_flight(), 0u);
  EXPECT_EQ(l.rx_buffered(), 256u);
  EXPECT_TRUE(l.conserves_credits());
  try {
    l.complete_transfer(1, 977);
    FAIL();
  } catch (const SimError& e) {
    EXPECT_EQ(e.code(), ErrorCode::InternalInvariantViolation);
  }
}

TEST(CreditedLink, FullBufferBlocksUntilCreditReturns) {
  CreditedLink l = make_link(512);
  l.try_transmit(256, 0);
  l.try_transmit(256, 256);
  l.complete_transfer(256, 976);
  l.complete_transfer(256, 1232);
  EXPECT_EQ(l.rx_buffered(), 512u);
  EXPECT_TRUE(std::holds_alternative<Blocked>(l.try_transmit(1, 2000)));
  auto batch = l.free_and_credit(512, 2000);
  ASSERT_TRUE(batch.has_value());
  EXPECT_TRUE(std::holds_alternative<Blocked>(l.try_transmit(1, 2001)));  // credit still in transit
  l.credit_returned(*batch, 2720);
  EXPECT_EQ(l.tx_credits(), 512u);
  EXPECT_TRUE(std::holds_alternative<Accepted>(l.try_transmit(1, 2720)));
  EXPECT_EQ(l.stats().credit_stall_ns, 2720 - 2000);
}

TEST(CreditedLink, FreeRestoresFullCredit) {
  CreditedLink l = make_link();
  l.try_transmit(256, 0);
  l.complete_transfer(256, 976);
  auto batch = l.free_and_credit(256, 1000);
  ASSERT_TRUE(batch.has_value());
  EXPECT_EQ(*batch, 256u);
  EXPECT_TRUE(l.conserves_credits());
  l.credit_returned(*batch, 1720);
  EXPECT_EQ(l.tx_credits(), 4096u);
}

TEST(CreditedLink, FreeZeroIsNoOp) {
  CreditedLink l = make_link();
  EXPECT_FALSE(l.free_and_credit(0, 0).has_value());
  EXPECT_EQ(l.tx_credits(), 4096u);
}

TEST(CreditedLink, OverFreeIsRejected) {
  CreditedLink l = make_link();
  l.try_transmit(64, 0);
  l.complete_transfer(64, 800);
  try {
    l.free_and_credit(65, 900);
    FAIL();
  } catch (const SimError& e) {
    EXPECT_EQ(e.code(), ErrorCode::OverFree);
  }
  EXPECT_EQ(l.rx_buffered(), 64u);
}

TEST(CreditedLink, CreditReturnsAreBatched) {
  CreditedLink l = make_link();
  l.try_transmit(300, 0);
  l.complete_transfer(300, 1100);
  EXPECT_FALSE(l.free_and_credit(100, 1200).has_value());  // below threshold, buffer not empty
  EXPECT_EQ(l.credits_returning(), 100u);
  EXPECT_TRUE(l.conserves_credits());
  auto batch = l.free_and_credit(200, 1300);  // buffer empties
  ASSERT_TRUE(batch.has_value());
  EXPECT_EQ(*batch, 300u);
}

TEST(CreditedLink, RandomizedAdversarialTrafficKeepsInvariants) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto r = stress::run_credit_stress(60'000, seed);
    EXPECT_EQ(r.attempts, 60'000u);
    EXPECT_GT(r.blocked, 0u) << "adversary never hit the credit limit";
    EXPECT_EQ(r.conservation_violations, 0u);
    EXPECT_EQ(r.overruns, 0u);
    EXPECT_EQ(r.accepted_bytes, r.delivered_bytes);
    EXPECT_TRUE(r.drained);
  }
}

TEST(CreditedLink, GoodputNeverExceedsBandwidth) {
  // Saturate one link for 2 ms with a receiver that frees instantly.
  Simulator sim;
  CreditedLink l = make_link();
  std::uint64_t bytes = 0;
  const SimTime horizon = 2'000'000;
  std::function<void()> pump = [&] {
    if (sim.now() >= horizon) return;
    auto r = l.try_transmit(256, sim.now());
    if (auto* ok = std::get_if<Accepted>(&r)) {
      bytes += 256;
      sim.schedule_at(ok->arrival, [&] {
        l.complete_transfer(256, sim.now());
        if (auto b = l.free_and_credit(256, sim.now())) {
          std::uint32_t amount = *b;
          sim.schedule_in(720, [&, amount] { l.credit_returned(amount, sim.now()); });
        }
      });
      sim.schedule_at(ok->tx_done, pump);
    } else {
      sim.schedule_in(1, pump);
    }
  };
  sim.schedule_at(0, pump);
  sim.run_until(horizon);
  const double rate = static_cast<double>(bytes) / (static_cast<double>(horizon) * 1e-9);
  EXPECT_LE(rate, 1e9 * 1.0001);
  EXPECT_GT(rate, 0.5e9);
}

}  // namespace
}  // namespace incsim
