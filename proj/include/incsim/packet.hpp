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

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "incsim/common.hpp"

namespace incsim {

enum class ProtocolId : std::uint8_t {
  Ethernet = 1,
  Postmaster = 2,
  BridgeFifo = 3,
  NetTunnel = 4,
};

constexpr std::string_view to_string(ProtocolId p) {
  switch (p) {
    case ProtocolId::Ethernet: return "ethernet";
    case ProtocolId::Postmaster: return "postmaster";
    case ProtocolId::BridgeFifo: return "bridge_fifo";
    case ProtocolId::NetTunnel: return "net_tunnel";
  }
  return "reserved";
}

constexpr bool is_known_protocol(std::uint8_t p) { return p >= 1 && p <= 4; }

inline constexpr int kMaxChannels = 32;
inline constexpr std::size_t kHeaderBytes = 16;

struct PacketHeader {
  Coord src;
  Coord dst;              // ignored when broadcast
  bool broadcast = false;
  ProtocolId protocol = ProtocolId::Ethernet;
  std::uint8_t channel = 0;     // 0..31
  std::uint32_t seq = 0;
  std::uint16_t payload_len = 0;
  std::uint8_t frag_index = 0;  // fragment position for protocols that split messages
  std::uint8_t frag_count = 1;

  friend bool operator==(const PacketHeader&, const PacketHeader&) = default;
};

/// Fixed 16-byte header layout, little-endian:
///
///   byte 0      protocol id in bits 0-3, broadcast flag in bit 4
///   byte 1      channel (0-31)
///   bytes 2-4   source x, y, z
///   bytes 5-7   destination x, y, z (zero for broadcast)
///   bytes 8-11  sequence number
///   bytes 12-13 payload length
///   byte 14     fragment index
///   byte 15     fragment count
inline std::array<std::uint8_t, kHeaderBytes> encode_header(const PacketHeader& h) {
  std::array<std::uint8_t, kHeaderBytes> b{};
  b[0] = static_cast<std::uint8_t>((static_cast<std::uint8_t>(h.protocol) & 0x0F) | (h.broadcast ? 0x10 : 0));
  b[1] = h.channel;
  b[2] = static_cast<std::uint8_t>(h.src.x);
  b[3] = static_cast<std::uint8_t>(h.src.y);
  b[4] = static_cast<std::uint8_t>(h.src.z);
  if (!h.broadcast) {
    b[5] = static_cast<std::uint8_t>(h.dst.x);
    b[6] = static_cast<std::uint8_t>(h.dst.y);
    b[7] = static_cast<std::uint8_t>(h.dst.z);
  }
  for (int i = 0; i < 4; ++i) b[8 + i] = static_cast<std::uint8_t>(h.seq >> (8 * i));
  b[12] = static_cast<std::uint8_t>(h.payload_len);
  b[13] = static_cast<std::uint8_t>(h.payload_len >> 8);
  b[14] = h.frag_index;
  b[15] = h.frag_count;
  return b;
}

inline PacketHeader decode_header(std::span<const std::uint8_t> b) {
  if (b.size() < kHeaderBytes) throw SimError(ErrorCode::InvalidHeader, "short header");
  if (b[0] & 0xE0) throw SimError(ErrorCode::InvalidHeader, "reserved flag bits set");
  if (b[1] >= kMaxChannels) throw SimError(ErrorCode::InvalidHeader, "channel out of range");
  PacketHeader h;
  h.protocol = static_cast<ProtocolId>(b[0] & 0x0F);
  h.broadcast = (b[0] & 0x10) != 0;
  h.channel = b[1];
  h.src = {b[2], b[3], b[4]};
  h.dst = h.broadcast ? Coord{} : Coord{b[5], b[6], b[7]};
  h.seq = 0;
  for (int i = 0; i < 4; ++i) h.seq |= std::uint32_t{b[8 + i]} << (8 * i);
  h.payload_len = static_cast<std::uint16_t>(b[12] | (b[13] << 8));
  h.frag_index = b[14];
  h.frag_count = b[15];
  return h;
}

using Bytes = std::vector<std::uint8_t>;

/// A packet as it moves through the simulated fabric. Only `header` and
/// `payload` are on the wire; the rest is simulator bookkeeping.
struct Packet {
  PacketHeader header;
  Bytes payload;

  std::uint64_t id = 0;
  SimTime injected_at = 0;
  std::uint32_t hops = 0;
  std::vector<std::uint32_t> path;  // node ids visited, source first; filled only when tracing

  std::uint32_t wire_bytes() const { return static_cast<std::uint32_t>(kHeaderBytes + payload.size()); }
};

}  // namespace incsim
