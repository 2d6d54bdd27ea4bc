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
#include <vector>

#include "incsim/mux.hpp"

namespace incsim {

struct PostmasterConfig {
  std::uint32_t max_record_bytes = 2048;
  std::uint32_t initiator_queue_records = 64;
  std::uint64_t target_buffer_bytes = 16ull << 20;  // 16 MiB, linear, no wrap
  /// Prefix each stored record with an 8-byte (initiator, length) header.
  bool record_headers = true;
  std::uint64_t queue_address = 0x4000'0000;  // fixed initiator write port
};

inline constexpr std::size_t kRecordHeaderBytes = 8;

enum class SendResult { Accepted, Backpressured };

/// Where one record landed in a target's stream.
struct StoredRecord {
  Coord initiator;
  std::uint32_t seq = 0;
  std::uint64_t offset = 0;   // start of the record, including its header if enabled
  std::uint32_t length = 0;   // payload bytes
  SimTime stored_at = 0;
};

struct PostmasterTargetStats {
  std::uint64_t records = 0;
  std::uint64_t bytes = 0;
  std::uint64_t buffer_full_events = 0;
  std::size_t max_held_records = 0;
};

/// Receives tunneled-queue traffic into a linear buffer. Each record's bytes are
/// written contiguously; records of one initiator are stored in send order,
/// records of different initiators interleave in arrival order.
class PostmasterTarget {
 public:
  PostmasterTarget(ChannelHub& hub, NodeId node, PostmasterConfig config = {})
      : hub_(hub), node_(node), config_(config) {
    hub_.mux(node_).register_rx(node_, ProtocolId::Postmaster, 0, [this](const Packet& p) { receive(p); });
  }

  PostmasterTarget(const PostmasterTarget&) = delete;
  PostmasterTarget& operator=(const PostmasterTarget&) = delete;

  NodeId node() const { return node_; }
  const PostmasterConfig& config() const { return config_; }
  const Bytes& stream() const { return buffer_; }
  std::uint64_t write_offset() const { return buffer_.size(); }
  const std::vector<StoredRecord>& records() const { return records_; }
  const PostmasterTargetStats& stats() const { return stats_; }
  std::size_t held_records() const { return held_count_; }

  /// Payload bytes of a stored record.
  Bytes record_bytes(const StoredRecord& r) const {
    std::uint64_t start = r.offset + (config_.record_headers ? kRecordHeaderBytes : 0);
    return Bytes(buffer_.begin() + static_cast<std::ptrdiff_t>(start),
                 buffer_.begin() + static_cast<std::ptrdiff_t>(start + r.length));
  }

  /// Host consumed the buffer: start a new session at offset 0 and resume draining.
  void reset_session() {
    buffer_.clear();
    records_.clear();
    stalled_ = false;
    drain();
  }

  /// Send time of a record, registered by the initiator for latency accounting.
  void note_send(NodeId initiator, std::uint32_t seq, SimTime t) { sent_at_[{initiator, seq}] = t; }
  const LatencyRecorder& latency() const { return latency_; }

 private:
  struct Source {
    std::uint32_t next_seq = 0;
    std::map<std::uint32_t, Bytes> ready;  // reassembled, waiting for order or space
  };

  void receive(const Packet& p) {
    NodeId from = hub_.topology().id(p.header.src);
    auto complete = assembler_.add(from, p.header, p.payload, hub_.simulator().now());
    if (!complete) return;
    Source& s = sources_[from];
    s.ready.emplace(p.header.seq, std::move(*complete));
    ++held_count_;
    stats_.max_held_records = std::max(stats_.max_held_records, held_count_);
    drain();
  }

  void drain() {
    bool progress = true;
    while (progress && !stalled_) {
      progress = false;
      for (auto& [from, s] : sources_) {
        auto it = s.ready.find(s.next_seq);
        if (it == s.ready.end()) continue;
        const std::uint64_t need = it->second.size() + (config_.record_headers ? kRecordHeaderBytes : 0);
        if (buffer_.size() + need > config_.target_buffer_bytes) {
          stalled_ = true;
          ++stats_.buffer_full_events;
          return;
        }
        store(from, s.next_seq, it->second);
        s.ready.erase(it);
        --held_count_;
        ++s.next_seq;
        progress = true;
      }
    }
  }

  void store(NodeId from, std::uint32_t seq, const Bytes& data) {
    const SimTime now = hub_.simulator().now();
    StoredRecord r;
    r.initiator = hub_.topology().coord(from);
    r.seq = seq;
    r.offset = buffer_.size();
    r.length = static_cast<std::uint32_t>(data.size());
    r.stored_at = now;
    if (config_.record_headers) {
      buffer_.push_back(static_cast<std::uint8_t>(r.initiator.x));
      buffer_.push_back(static_cast<std::uint8_t>(r.initiator.y));
      buffer_.push_back(static_cast<std::uint8_t>(r.initiator.z));
      buffer_.push_back(0);
      for (int i = 0; i < 4; ++i) buffer_.push_back(static_cast<std::uint8_t>(r.length >> (8 * i)));
    }
    buffer_.insert(buffer_.end(), data.begin(), data.end());
    records_.push_back(r);
    ++stats_.records;
    stats_.bytes += data.size();
    if (auto it = sent_at_.find({from, seq}); it != sent_at_.end()) {
      latency_.add(now - it->second);
      sent_at_.erase(it);
    }
  }

  ChannelHub& hub_;
  NodeId node_;
  PostmasterConfig config_;
  Bytes buffer_;
  std::vector<StoredRecord> records_;
  Reassembler assembler_;
  std::map<NodeId, Source> sources_;
  std::size_t held_count_ = 0;
  bool stalled_ = false;
  std::map<std::pair<NodeId, std::uint32_t>, SimTime> sent_at_;
  PostmasterTargetStats stats_;
  LatencyRecorder latency_;
};

struct PostmasterInitiatorStats {
  std::uint64_t records_sent = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t packets_sent = 0;
  std::uint64_t backpressure_events = 0;
};

/// Initiator side: software writes a record to one fixed address and the
/// hardware moves it to the target's buffer.
class PostmasterInitiator {
 public:
  /// `targets` resolves a node to its registered PostmasterTarget (null if none).
  using TargetLookup = std::function<PostmasterTarget*(NodeId)>;

  PostmasterInitiator(ChannelHub& hub, NodeId node, TargetLookup targets, PostmasterConfig config = {})
      : hub_(hub), node_(node), targets_(std::move(targets)), config_(config) {
    hub_.mux(node_).register_tx(node_, ProtocolId::Postmaster, 0);
    hub_.add_waiter(node_, [this] { pump(); });
  }

  PostmasterInitiator(const PostmasterInitiator&) = delete;
  PostmasterInitiator& operator=(const PostmasterInitiator&) = delete;

  NodeId node() const { return node_; }
  std::uint64_t queue_address() const { return config_.queue_address; }
  const PostmasterInitiatorStats& stats() const { return stats_; }
  std::size_t pending() const { return queue_.size(); }

  /// Store to the write port. Only the fixed queue address is accepted.
  SendResult write(std::uint64_t address, NodeId target, const Bytes& data) {
    if (address != config_.queue_address) {
      throw SimError(ErrorCode::WrongAddress, "postmaster writes must target the fixed queue address");
    }
    return send(target, data);
  }

  SendResult send(NodeId target, const Bytes& data) {
    if (data.empty()) throw SimError(ErrorCode::ZeroLength, "postmaster record is empty");
    if (data.size() > config_.max_record_bytes) {
      throw SimError(ErrorCode::RecordTooLarge, std::to_string(data.size()) + " bytes exceeds the record limit");
    }
    if ((data.size() + hub_.payload_max() - 1) / hub_.payload_max() > 255) {
      throw SimError(ErrorCode::RecordTooLarge, "record needs more than 255 fragments");
    }
    PostmasterTarget* t = targets_ ? targets_(target) : nullptr;
    if (t == nullptr) throw SimError(ErrorCode::UnknownTarget, "no postmaster target registered at that node");
    if (queue_.size() >= config_.initiator_queue_records) {
      ++stats_.backpressure_events;
      return SendResult::Backpressured;
    }
    const std::uint32_t seq = next_seq_[target]++;
    t->note_send(node_, seq, hub_.simulator().now());
    queue_.push_back(Pending{target, seq, fragment(data, hub_.payload_max()), 0});
    ++stats_.records_sent;
    stats_.bytes_sent += data.size();
    pump();
    return SendResult::Accepted;
  }

 private:
  struct Pending {
    NodeId target;
    std::uint32_t seq;
    std::vector<Bytes> fragments;
    std::size_t next = 0;
  };

  void pump() {
    Network& net = hub_.network();
    while (!queue_.empty()) {
      Pending& p = queue_.front();
      while (p.next < p.fragments.size()) {
        PacketHeader h;
        h.dst = hub_.topology().coord(p.target);
        h.protocol = ProtocolId::Postmaster;
        h.seq = p.seq;
        h.frag_index = static_cast<std::uint8_t>(p.next);
        h.frag_count = static_cast<std::uint8_t>(p.fragments.size());
        if (p.target != node_ && !net.reserve_wakeup(node_)) return;
        if (net.inject(node_, h, p.fragments[p.next]) != InjectResult::Accepted) return;
        ++p.next;
        ++stats_.packets_sent;
      }
      queue_.pop_front();
    }
  }

  ChannelHub& hub_;
  NodeId node_;
  TargetLookup targets_;
  PostmasterConfig config_;
  std::deque<Pending> queue_;
  std::map<NodeId, std::uint32_t> next_seq_;
  PostmasterInitiatorStats stats_;
};

}  // namespace incsim
