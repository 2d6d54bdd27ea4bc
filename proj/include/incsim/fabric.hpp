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
#include <optional>
#include <string>
#include <variant>

#include "incsim/common.hpp"
#include "incsim/engine.hpp"
#include "incsim/topology.hpp"

namespace incsim {

struct FabricConfig {
  std::uint32_t rx_capacity = 4096;
  /// Freed bytes are announced once at least this many accumulate, or when the buffer empties.
  std::uint32_t credit_return_threshold = 256;
  /// Wire latency of one hop, also used for credit-return messages.
  SimTime hop_latency_ns = 720;
};

enum class BlockReason : std::uint8_t { InsufficientCredits, LinkBusy };

struct Accepted {
  SimTime tx_done;   // link becomes idle again
  SimTime arrival;   // last byte reaches the receiver
};

struct Blocked {
  BlockReason reason;
};

using TransmitResult = std::variant<Accepted, Blocked>;

struct LinkStats {
  std::uint64_t bytes_carried = 0;
  std::uint64_t packets = 0;
  SimTime busy_ns = 0;
  SimTime credit_stall_ns = 0;
};

/// One unidirectional serial connection under byte-credit flow control.
///
/// Credits move through four places and always sum to rx_capacity:
/// transmitter balance, bytes on the wire, bytes buffered at the receiver, and
/// freed bytes whose credit has not reached the transmitter yet.
class CreditedLink {
 public:
  CreditedLink(LinkSpec spec, FabricConfig config)
      : spec_(spec), config_(config), tx_credits_(config.rx_capacity) {}

  const LinkSpec& spec() const { return spec_; }
  const FabricConfig& config() const { return config_; }

  std::uint32_t tx_credits() const { return tx_credits_; }
  std::uint32_t in_flight() const { return in_flight_; }
  std::uint32_t rx_buffered() const { return rx_buffered_; }
  std::uint32_t rx_capacity() const { return config_.rx_capacity; }
  std::uint32_t credits_returning() const { return unannounced_ + returning_; }
  SimTime busy_until() const { return busy_until_; }
  bool idle_at(SimTime now) const { return busy_until_ <= now; }
  const LinkStats& stats() const { return stats_; }

  bool conserves_credits() const {
    return std::uint64_t{tx_credits_} + in_flight_ + rx_buffered_ + unannounced_ + returning_ ==
           config_.rx_capacity;
  }

  /// Starts a transfer if the link is idle and holds enough credits; otherwise
  /// reports why and leaves the state untouched.
  TransmitResult try_transmit(std::uint32_t nbytes, std::uint64_t payload_bytes, SimTime now) {
    if (nbytes == 0) throw SimError(ErrorCode::InvalidArgument, "try_transmit of zero bytes");
    if (tx_credits_ < nbytes) {
      if (stall_since_ < 0) stall_since_ = now;
      return Blocked{BlockReason::InsufficientCredits};
    }
    if (!idle_at(now)) return Blocked{BlockReason::LinkBusy};
    tx_credits_ -= nbytes;
    in_flight_ += nbytes;
    SimTime ser = serialization_ns(payload_bytes, spec_.bandwidth);
    busy_until_ = now + ser;
    stats_.bytes_carried += payload_bytes;
    stats_.packets += 1;
    stats_.busy_ns += ser;
    return Accepted{busy_until_, busy_until_ + config_.hop_latency_ns};
  }

  TransmitResult try_transmit(std::uint32_t nbytes, SimTime now) { return try_transmit(nbytes, nbytes, now); }

  /// Arrival half of a transfer: bytes leave the wire and land in the rx buffer.
  void complete_transfer(std::uint32_t nbytes, SimTime /*now*/) {
    if (nbytes > in_flight_) {
      throw SimError(ErrorCode::InternalInvariantViolation,
                     "completing " + std::to_string(nbytes) + " bytes with only " + std::to_string(in_flight_) +
                         " in flight");
    }
    in_flight_ -= nbytes;
    rx_buffered_ += nbytes;
    if (rx_buffered_ > config_.rx_capacity) {
      throw SimError(ErrorCode::InternalInvariantViolation, "rx buffer overrun");
    }
  }

  /// Receiver frees buffer space. Returns the credit batch to send back over the
  /// paired link, if the batching rule releases one now.
  std::optional<std::uint32_t> free_and_credit(std::uint32_t nbytes, SimTime /*now*/) {
    if (nbytes > rx_buffered_) {
      throw SimError(ErrorCode::OverFree, "freeing " + std::to_string(nbytes) + " bytes with only " +
                                              std::to_string(rx_buffered_) + " buffered");
    }
    if (nbytes == 0) return std::nullopt;
    rx_buffered_ -= nbytes;
    unannounced_ += nbytes;
    if (unannounced_ >= config_.credit_return_threshold || rx_buffered_ == 0) {
      std::uint32_t batch = unannounced_;
      unannounced_ = 0;
      returning_ += batch;
      return batch;
    }
    return std::nullopt;
  }

  /// A credit message arrived at the transmitter.
  void credit_returned(std::uint32_t nbytes, SimTime now) {
    if (nbytes > returning_) {
      throw SimError(ErrorCode::InternalInvariantViolation, "credit return exceeds outstanding credits");
    }
    returning_ -= nbytes;
    tx_credits_ += nbytes;
    if (stall_since_ >= 0) {
      stats_.credit_stall_ns += now - stall_since_;
      stall_since_ = -1;
    }
  }

 private:
  LinkSpec spec_;
  FabricConfig config_;
  std::uint32_t tx_credits_;
  std::uint32_t in_flight_ = 0;
  std::uint32_t rx_buffered_ = 0;
  std::uint32_t unannounced_ = 0;
  std::uint32_t returning_ = 0;
  SimTime busy_until_ = 0;
  SimTime stall_since_ = -1;
  LinkStats stats_;
};

}  // namespace incsim
