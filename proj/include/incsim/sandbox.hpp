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
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "incsim/system.hpp"

namespace incsim {

/// Operator console over a running system, in the style of the host PCIe
/// sandbox. The host sits at card 0's PCIe controller node (0,0,0): targets on
/// that card are reached over the Ring Bus, all others over NetTunnel. Each
/// command advances virtual time until it completes.
class Sandbox {
 public:
  Sandbox(System& sys, std::ostream& out, std::ostream& err) : sys_(sys), out_(out), err_(err) {}

  static constexpr NodeId kHost = 0;

  /// Runs one command line. Returns false once `quit` has been entered.
  bool execute(const std::string& line) {
    std::istringstream in(line);
    std::vector<std::string> args{std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
    if (args.empty() || args[0][0] == '#') return true;
    const std::string cmd = args[0];
    try {
      if (cmd == "quit" || cmd == "exit") return false;
      if (cmd == "help") {
        help();
      } else if (cmd == "rd") {
        need(args, 3, "rd <x,y,z> <addr>");
        cmd_rd(node_arg(args[1]), number_arg(args[2]));
      } else if (cmd == "wr") {
        need(args, 4, "wr <x,y,z> <addr> <word>");
        cmd_wr(node_arg(args[1]), number_arg(args[2]), number_arg(args[3]));
      } else if (cmd == "rdall") {
        need(args, 3, "rdall <card> <addr>");
        cmd_rdall(card_arg(args[1]), number_arg(args[2]));
      } else if (cmd == "bwr") {
        need(args, 3, "bwr <addr> <word>");
        cmd_bwr(number_arg(args[1]), number_arg(args[2]));
      } else if (cmd == "load") {
        need(args, 3, "load <file> <addr>");
        cmd_load(args[1], number_arg(args[2]));
      } else if (cmd == "boot") {
        need(args, 1, "boot");
        cmd_bwr(regs::kBootCommand, regs::kBootMagic);
      } else if (cmd == "info") {
        need(args, 1, "info");
        cmd_info();
      } else {
        err_ << "unknown command '" << cmd << "'\n";
        help(err_);
        ++errors_;
      }
    } catch (const SimError& e) {
      err_ << "error: " << e.what() << '\n';
      ++errors_;
    }
    return true;
  }

  /// Reads commands until end of input or `quit`.
  void run(std::istream& in, bool prompt) {
    std::string line;
    while (true) {
      if (prompt) out_ << "incsim> " << std::flush;
      if (!std::getline(in, line)) break;
      if (!execute(line)) break;
    }
  }

  std::uint64_t errors() const { return errors_; }

  void help(std::ostream& os) const {
    os << "commands:\n"
          "  rd <x,y,z> <addr>          read one word\n"
          "  wr <x,y,z> <addr> <word>   write one word\n"
          "  rdall <card> <addr>        Ring Bus read of the word at every node of a card\n"
          "  bwr <addr> <word>          broadcast write to every node\n"
          "  load <file> <addr>         broadcast a file image to every node\n"
          "  boot                       broadcast the boot command\n"
          "  info                       system configuration\n"
          "  quit\n";
  }

 private:
  void help() const { help(out_); }

  static void need(const std::vector<std::string>& args, std::size_t n, const char* usage) {
    if (args.size() != n) throw SimError(ErrorCode::InvalidArgument, std::string("usage: ") + usage);
  }

  NodeId node_arg(const std::string& s) const { return sys_.topology().id(parse_coord(s)); }

  std::size_t card_arg(const std::string& s) const {
    std::uint64_t v = number_arg(s);
    if (v >= sys_.topology().card_count()) {
      throw SimError(ErrorCode::OutOfBounds, "card " + s + " does not exist");
    }
    return static_cast<std::size_t>(v);
  }

  static std::uint32_t number_arg(const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used, 0);
    } catch (const std::exception&) {
      throw SimError(ErrorCode::InvalidArgument, "not a number: '" + s + "'");
    }
    if (used != s.size() || v > 0xFFFF'FFFFull) {
      throw SimError(ErrorCode::InvalidArgument, "not a 32-bit number: '" + s + "'");
    }
    return static_cast<std::uint32_t>(v);
  }

  static std::string hex(std::uint32_t v) {
    std::ostringstream os;
    os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
    return os.str();
  }

  bool on_host_card(NodeId n) const { return sys_.topology().card_index(n) == sys_.topology().card_index(kHost); }

  template <typename Pred>
  void wait(Pred done) {
    if (!sys_.sim().run_while_not(done)) throw SimError(ErrorCode::InternalInvariantViolation, "command never completed");
  }

  void cmd_rd(NodeId n, Address addr) {
    std::optional<Word> value;
    SimTime t0 = sys_.sim().now();
    SimTime t1 = t0;
    auto cb = [&](Word w, SimTime t) {
      value = w;
      t1 = t;
    };
    const bool ring = on_host_card(n);
    if (ring) {
      sys_.sideband().ring_read(kHost, n, addr, cb);
    } else {
      sys_.sideband().tunnel_read(kHost, n, addr, cb);
    }
    wait([&] { return value.has_value(); });
    out_ << sys_.topology().coord(n) << " " << hex(addr) << " = " << hex(*value) << " (" << *value << ") via "
         << (ring ? "ring" : "tunnel") << ", " << (t1 - t0) << " ns\n";
  }

  void cmd_wr(NodeId n, Address addr, Word word) {
    std::optional<SimTime> done;
    const SimTime t0 = sys_.sim().now();
    auto cb = [&](SimTime t) { done = t; };
    const bool ring = on_host_card(n);
    if (ring) {
      sys_.sideband().ring_write(kHost, n, addr, word, cb);
    } else {
      sys_.sideband().tunnel_write(kHost, n, addr, word, cb);
    }
    wait([&] { return done.has_value(); });
    out_ << "ok " << sys_.topology().coord(n) << " " << hex(addr) << " <- " << hex(word) << " via "
         << (ring ? "ring" : "tunnel") << ", " << (*done - t0) << " ns\n";
  }

  void cmd_rdall(std::size_t card, Address addr) {
    const Topology& topo = sys_.topology();
    const NodeId origin = topo.id(topo.card_origin(card));
    std::optional<std::vector<Word>> values;
    sys_.sideband().ring_read_all(origin, addr, [&](std::vector<Word> v, SimTime) { values = std::move(v); });
    wait([&] { return values.has_value(); });
    const std::vector<NodeId> ring = topo.card_nodes(card);
    for (std::size_t i = 0; i < ring.size(); ++i) {
      out_ << std::setw(2) << i << "  " << topo.coord(ring[i]) << "  " << hex((*values)[i]) << '\n';
    }
  }

  void cmd_bwr(Address addr, Word word) {
    std::optional<SimTime> done;
    const SimTime t0 = sys_.sim().now();
    sys_.sideband().tunnel_broadcast_write(kHost, addr, word, [&](SimTime t) { done = t; });
    wait([&] { return done.has_value(); });
    out_ << "ok broadcast " << hex(addr) << " <- " << hex(word) << " to " << sys_.topology().node_count() << " nodes, "
         << (*done - t0) << " ns\n";
  }

  void cmd_load(const std::string& path, Address addr) {
    NodeMemory::check_aligned(addr);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw SimError(ErrorCode::InvalidArgument, "cannot open '" + path + "'");
    Bytes image{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    if (static_cast<std::uint64_t>(addr) + image.size() > 0x1'0000'0000ull) {
      throw SimError(ErrorCode::OutOfBounds, "image does not fit below 4 GB");
    }
    const std::size_t chunk = sys_.sideband().max_block_bytes();
    const SimTime t0 = sys_.sim().now();
    std::size_t remaining = 0;
    std::size_t blocks = 0;
    for (std::size_t off = 0; off < image.size(); off += chunk) {
      Bytes part(image.begin() + static_cast<std::ptrdiff_t>(off),
                 image.begin() + static_cast<std::ptrdiff_t>(std::min(image.size(), off + chunk)));
      ++remaining;
      ++blocks;
      sys_.sideband().tunnel_broadcast_block(kHost, static_cast<Address>(addr + off), std::move(part),
                                             [&](SimTime) { --remaining; });
    }
    wait([&] { return remaining == 0; });
    out_ << "loaded " << image.size() << " bytes at " << hex(addr) << " on " << sys_.topology().node_count()
         << " nodes in " << blocks << " broadcast blocks, " << (sys_.sim().now() - t0) << " ns\n";
  }

  void cmd_info() {
    const Topology& topo = sys_.topology();
    std::size_t single = 0;
    for (const LinkSpec& s : topo.links()) single += s.span == Span::Single;
    out_ << "dims " << topo.dims() << '\n'
         << "cards " << topo.card_count() << '\n'
         << "nodes " << topo.node_count() << '\n'
         << "links " << topo.link_count() << " (" << single << " single-span, " << topo.link_count() - single
         << " multi-span)\n"
         << "host " << topo.coord(kHost) << '\n'
         << "build-id " << hex(sys_.sideband().memory(kHost).read(regs::kBuildId)) << '\n'
         << "time " << sys_.sim().now() << " ns\n";
  }

  System& sys_;
  std::ostream& out_;
  std::ostream& err_;
  std::uint64_t errors_ = 0;
};

}  // namespace incsim
