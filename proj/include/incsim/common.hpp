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
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace incsim {

/// Virtual time in nanoseconds.
using SimTime = std::int64_t;

/// Dense node index: x + dims.x * (y + dims.y * z).
using NodeId = std::uint32_t;
using LinkId = std::uint32_t;

inline constexpr LinkId kNoLink = ~LinkId{0};

enum class ErrorCode {
  InvalidExtent,
  OutOfBounds,
  OddExtent,
  NotCardOrigin,
  InternalInvariantViolation,
  OverFree,
  Unroutable,
  PayloadTooLarge,
  InvalidHeader,
  TimeTravel,
  InvalidWidth,
  WordTooWide,
  ChannelExhausted,
  ChannelInUse,
  ZeroLength,
  RecordTooLarge,
  WrongAddress,
  UnknownTarget,
  FrameTooLarge,
  NotGateway,
  OffCardTarget,
  UnalignedAddress,
  InvalidWorkload,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidExtent: return "InvalidExtent";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::OddExtent: return "OddExtent";
    case ErrorCode::NotCardOrigin: return "NotCardOrigin";
    case ErrorCode::InternalInvariantViolation: return "InternalInvariantViolation";
    case ErrorCode::OverFree: return "OverFree";
    case ErrorCode::Unroutable: return "Unroutable";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::InvalidHeader: return "InvalidHeader";
    case ErrorCode::TimeTravel: return "TimeTravel";
    case ErrorCode::InvalidWidth: return "InvalidWidth";
    case ErrorCode::WordTooWide: return "WordTooWide";
    case ErrorCode::ChannelExhausted: return "ChannelExhausted";
    case ErrorCode::ChannelInUse: return "ChannelInUse";
    case ErrorCode::ZeroLength: return "ZeroLength";
    case ErrorCode::RecordTooLarge: return "RecordTooLarge";
    case ErrorCode::WrongAddress: return "WrongAddress";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::FrameTooLarge: return "FrameTooLarge";
    case ErrorCode::NotGateway: return "NotGateway";
    case ErrorCode::OffCardTarget: return "OffCardTarget";
    case ErrorCode::UnalignedAddress: return "UnalignedAddress";
    case ErrorCode::InvalidWorkload: return "InvalidWorkload";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the simulator carries a machine-readable code.
class SimError : public std::runtime_error {
 public:
  SimError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class Axis : std::uint8_t { X = 0, Y = 1, Z = 2 };

inline constexpr std::array<Axis, 3> kAxes{Axis::X, Axis::Y, Axis::Z};

constexpr char axis_name(Axis a) { return "XYZ"[static_cast<int>(a)]; }

struct Coord {
  int x = 0;
  int y = 0;
  int z = 0;

  constexpr int operator[](Axis a) const {
    return a == Axis::X ? x : (a == Axis::Y ? y : z);
  }
  constexpr int& operator[](Axis a) {
    return a == Axis::X ? x : (a == Axis::Y ? y : z);
  }

  friend constexpr bool operator==(const Coord&, const Coord&) = default;
  friend constexpr auto operator<=>(const Coord&, const Coord&) = default;

  /// Three-digit label used for single-card nodes, e.g. "100" for x=1.
  std::string label() const {
    return std::to_string(x) + std::to_string(y) + std::to_string(z);
  }
};

inline std::ostream& operator<<(std::ostream& os, const Coord& c) {
  return os << c.x << ',' << c.y << ',' << c.z;
}

/// Parses "x,y,z".
inline Coord parse_coord(std::string_view text) {
  Coord c;
  int* parts[3] = {&c.x, &c.y, &c.z};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    std::size_t end = text.find(',', pos);
    if ((i < 2) != (end != std::string_view::npos)) {
      throw SimError(ErrorCode::InvalidArgument, "expected x,y,z but got '" + std::string(text) + "'");
    }
    auto piece = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
    if (piece.empty()) throw SimError(ErrorCode::InvalidArgument, "empty coordinate component");
    int value = 0;
    for (char ch : piece) {
      if (ch < '0' || ch > '9') {
        throw SimError(ErrorCode::InvalidArgument, "bad coordinate '" + std::string(text) + "'");
      }
      value = value * 10 + (ch - '0');
      if (value > 1'000'000) throw SimError(ErrorCode::InvalidArgument, "coordinate too large");
    }
    *parts[i] = value;
    pos = end + 1;
  }
  return c;
}

}  // namespace incsim
