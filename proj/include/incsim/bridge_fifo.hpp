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
#include <map>
#include <optional>
#include <vector>

#include "incsim/mux.hpp"

namespace incsim {

struct BridgeFifoConfig {
  int width = 32;                         // bits per word, 7..64
  std::uint32_t tx_staging_words = 1024;
  SimTime aggregation_window_ns = 0;      // 0: packetize each batch of same-instant pushes
};

enum class PushResult { Accepted, Backpressured };

struct BridgeFifoStats {
  std::uint64_t words_pushed = 0;
  std::uint64_t words_popped = 0;
  std::uint64_t packets_sent = 0;
  std::uint64_t packets_received = 0;
  std::uint64_t backpressure_events = 0;
  std::size_t max_reorder_occupancy = 0;  // packets parked waiting for a lower sequence number
};

/// A bridge FIFO transmit/receive pair joined over the fabric.
///
/// Words are packed into BridgeFifo packets tagged with the channel id and a
/// per-channel sequence number. The fabric may reorder packets; the receive side
/// holds early packets until every lower sequence number has arrived, so words
/// pop in push order.
class BridgeFifoChannel {
 public:
  BridgeFifoChannel(ChannelHub& hub, std::uint8_t channel, NodeId src, NodeId dst, BridgeFifoConfig config = {})
      : hub_(hub), channel_(channel), src_(src), dst_(dst), config_(config) {
    if (config_.width < 7 || config_.width > 64) {
      throw SimError(ErrorCode::InvalidWidth, "bridge FIFO width " + std::to_string(config_.width) + " not in 7..64");
    }
    bytes_per_word_ = static_cast<std::uint32_t>((config_.width + 7) / 8);
    words_per_packet_ = hub.payload_max() / bytes_per_word_;
    hub_.mux(src_).register_tx(src_, ProtocolId::BridgeFifo, channel_);
    hub_.mux(dst_).register_rx(dst_, ProtocolId::BridgeFifo, channel_, [this](const Packet& p) { receive(p); });
    hub_.add_waiter(src_, [this] {
      if (!staged_.empty() && !flush_scheduled_) flush();
    });
  }

  BridgeFifoChannel(const BridgeFifoChannel&) = delete;
  BridgeFifoChannel& operator=(const BridgeFifoChannel&) = delete;

  std::uint8_t channel() const { return channel_; }
  NodeId src() const { return src_; }
  NodeId dst() const { return dst_; }
  int width() const { return config_.width; }
  const BridgeFifoStats& stats() const { return stats_; }
  const LatencyRecorder& latency() const { return latency_; }

  std::size_t staged() const { return staged_.size(); }
  std::size_t available() const { return out_.size(); }

  PushResult push(std::uint64_t word) {
    if (config_.width < 64 && (word >> config_.width) != 0) {
      throw SimError(ErrorCode::WordTooWide, "word does not fit in " + std::to_string(config_.width) + " bits");
    }
    if (staged_.size() >= config_.tx_staging_words) {
      ++stats_.backpressure_events;
      return PushResult::Backpressured;
    }
    Simulator& sim = hub_.simulator();
    staged_.push_back(word);
    push_times_.push_back(sim.now());
    ++stats_.words_pushed;
    if (!flush_scheduled_) {
      flush_scheduled_ = true;
      sim.schedule_in(config_.aggregation_window_ns, [this] {
        flush_scheduled_ = false;
        flush();
      });
    }
    return PushResult::Accepted;
  }

  std::optional<std::uint64_t> pop() {
    if (out_.empty()) return std::nullopt;
    std::uint64_t w = out_.front();
    out_.pop_front();
    ++stats_.words_popped;
    return w;
  }

 private:
  void flush() {
    Network& net = hub_.network();
    const Coord dst = hub_.topology().coord(dst_);
    while (!staged_.empty()) {
      if (src_ != dst_ && !net.reserve_wakeup(src_)) return;  // resumed by the hub waiter
      const std::size_t n = std::min<std::size_t>(staged_.size(), words_per_packet_);
      Bytes payload;
      payload.reserve(n * bytes_per_word_);
      for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t w = staged_[i];
        for (std::uint32_t b = 0; b < bytes_per_word_; ++b) payload.push_back(static_cast<std::uint8_t>(w >> (8 * b)));
      }
      PacketHeader h;
      h.dst = dst;
      h.protocol = ProtocolId::BridgeFifo;
      h.channel = channel_;
      h.seq = tx_seq_;
      if (net.inject(src_, h, std::move(payload)) != InjectResult::Accepted) return;
      ++tx_seq_;
      ++stats_.packets_sent;
      staged_.erase(staged_.begin(), staged_.begin() + static_cast<std::ptrdiff_t>(n));
    }
  }

  void receive(const Packet& p) {
    ++stats_.packets_received;
    if (p.header.seq < next_expected_ || reorder_.count(p.header.seq)) {
      throw SimError(ErrorCode::InternalInvariantViolation, "duplicate bridge FIFO sequence number");
    }
    std::vector<std::uint64_t> words;
    words.reserve(p.payload.size() / bytes_per_word_);
    for (std::size_t off = 0; off + bytes_per_word_ <= p.payload.size(); off += bytes_per_word_) {
      std::uint64_t w = 0;
      for (std::uint32_t b = 0; b < bytes_per_word_; ++b) w |= std::uint64_t{p.payload[off + b]} << (8 * b);
      words.push_back(w);
    }
    reorder_.emplace(p.header.seq, std::move(words));
    const SimTime now = hub_.simulator().now();
    for (auto it = reorder_.find(next_expected_); it != reorder_.end(); it = reorder_.find(next_expected_)) {
      for (std::uint64_t w : it->second) {
        out_.push_back(w);
        if (!push_times_.empty()) {
          latency_.add(now - push_times_.front());
          push_times_.pop_front();
        }
      }
      reorder_.erase(it);
      ++next_expected_;
    }
    stats_.max_reorder_occupancy = std::max(stats_.max_reorder_occupancy, reorder_.size());
  }

  ChannelHub& hub_;
  std::uint8_t channel_;
  NodeId src_;
  NodeId dst_;
  BridgeFifoConfig config_;
  std::uint32_t bytes_per_word_ = 4;
  std::uint32_t words_per_packet_ = 64;

  std::deque<std::uint64_t> staged_;
  std::deque<SimTime> push_times_;
  bool flush_scheduled_ = false;
  std::uint32_t tx_seq_ = 0;

  std::map<std::uint32_t, std::vector<std::uint64_t>> reorder_;
  std::uint32_t next_expected_ = 0;
  std::deque<std::uint64_t> out_;

  BridgeFifoStats stats_;
  LatencyRecorder latency_;
};

}  // namespace incsim
