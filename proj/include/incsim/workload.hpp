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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "incsim/system.hpp"

namespace incsim {

enum class Pattern { UniformRandom, NearestNeighbor, BroadcastStorm, PostmasterScatter, BridgeFifoPairs, EthernetMesh };

inline constexpr std::string_view to_string(Pattern p) {
  switch (p) {
    case Pattern::UniformRandom: return "UniformRandom";
    case Pattern::NearestNeighbor: return "NearestNeighbor";
    case Pattern::BroadcastStorm: return "BroadcastStorm";
    case Pattern::PostmasterScatter: return "PostmasterScatter";
    case Pattern::BridgeFifoPairs: return "BridgeFifoPairs";
    case Pattern::EthernetMesh: return "EthernetMesh";
  }
  return "?";
}

struct TrafficSpec {
  Pattern pattern = Pattern::UniformRandom;
  double rate = 0;                     // messages per second per source
  std::uint32_t size = 0;              // bytes, or words for BridgeFifoPairs
  std::optional<std::uint64_t> count;  // per-source message cap
  double jitter = 0.1;                 // fraction of the period added at random
  // Pattern parameters.
  std::uint32_t pairs = 1;
  int width = 32;
  std::optional<Coord> target;
  std::uint32_t initiators = 8;
  std::optional<std::uint32_t> sources;
};

struct WorkloadSpec {
  std::string preset;  // empty when dims were given
  SystemConfig topology;
  std::uint64_t seed = 1;
  double duration_us = 0;
  EthMode ethernet_mode = EthMode::Interrupt;
  std::vector<TrafficSpec> traffic;
};

namespace detail {

using PathStep = std::variant<std::string, std::size_t>;

inline std::size_t skip_ws(std::string_view t, std::size_t p) {
  while (p < t.size() && (t[p] == ' ' || t[p] == '\t' || t[p] == '\n' || t[p] == '\r')) ++p;
  return p;
}

inline std::size_t skip_string(std::string_view t, std::size_t p) {
  for (++p; p < t.size() && t[p] != '"'; ++p) {
    if (t[p] == '\\') ++p;
  }
  return p + 1;
}

inline std::size_t skip_value(std::string_view t, std::size_t p) {
  p = skip_ws(t, p);
  if (p >= t.size()) return p;
  if (t[p] == '"') return skip_string(t, p);
  if (t[p] == '{' || t[p] == '[') {
    int depth = 0;
    while (p < t.size()) {
      char c = t[p];
      if (c == '"') {
        p = skip_string(t, p);
        continue;
      }
      if (c == '{' || c == '[') ++depth;
      if (c == '}' || c == ']') {
        if (--depth == 0) return p + 1;
      }
      ++p;
    }
    return p;
  }
  while (p < t.size() && t[p] != ',' && t[p] != '}' && t[p] != ']' && t[p] != ' ' && t[p] != '\n' && t[p] != '\r' &&
         t[p] != '\t') {
    ++p;
  }
  return p;
}

/// Byte offset of the value at `path` in already-validated JSON text. For an
/// object member the offset of its key is returned.
inline std::size_t locate(std::string_view t, const std::vector<PathStep>& path) {
  std::size_t p = skip_ws(t, 0);
  for (const PathStep& step : path) {
    if (p >= t.size()) return p;
    if (const auto* key = std::get_if<std::string>(&step)) {
      if (t[p] != '{') return p;
      p = skip_ws(t, p + 1);
      bool found = false;
      while (p < t.size() && t[p] == '"') {
        const std::size_t key_at = p;
        const std::size_t end = skip_string(t, p);
        const bool match = t.substr(p + 1, end - p - 2) == *key;
        p = skip_ws(t, end);
        p = skip_ws(t, p + 1);  // ':'
        if (match) {
          if (&step == &path.back()) return key_at;
          found = true;
          break;
        }
        p = skip_ws(t, skip_value(t, p));
        if (p < t.size() && t[p] == ',') p = skip_ws(t, p + 1);
      }
      if (!found) return p;
    } else {
      if (t[p] != '[') return p;
      p = skip_ws(t, p + 1);
      for (std::size_t i = 0; i < std::get<std::size_t>(step); ++i) {
        p = skip_ws(t, skip_value(t, p));
        if (p < t.size() && t[p] == ',') p = skip_ws(t, p + 1);
      }
    }
  }
  return p;
}

inline std::pair<std::size_t, std::size_t> line_col(std::string_view t, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < offset && i < t.size(); ++i) {
    if (t[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline std::string path_string(const std::vector<PathStep>& path) {
  std::string s;
  for (const PathStep& step : path) {
    if (const auto* key = std::get_if<std::string>(&step)) {
      if (!s.empty()) s += '.';
      s += *key;
    } else {
      s += '[' + std::to_string(std::get<std::size_t>(step)) + ']';
    }
  }
  return s.empty() ? "<root>" : s;
}

/// Validation context: knows where it is in the document so errors carry a line and column.
class Checker {
 public:
  Checker(std::string_view text, std::string_view name) : text_(text), name_(name) {}

  [[noreturn]] void fail(const std::vector<PathStep>& path, const std::string& msg) const {
    auto [line, col] = line_col(text_, locate(text_, path));
    throw SimError(ErrorCode::InvalidWorkload, std::string(name_) + ":" + std::to_string(line) + ":" +
                                                   std::to_string(col) + ": " + path_string(path) + ": " + msg);
  }

  void allow_only(const nlohmann::json& obj, const std::vector<PathStep>& path,
                  std::initializer_list<std::string_view> keys) const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool known = false;
      for (std::string_view k : keys) known = known || it.key() == k;
      if (!known) {
        auto p = path;
        p.emplace_back(it.key());
        fail(p, "unknown field");
      }
    }
  }

  double positive_number(const nlohmann::json& obj, const std::vector<PathStep>& path, const std::string& key) const {
    auto p = path;
    p.emplace_back(key);
    if (!obj.contains(key)) fail(path, "missing required field '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number()) fail(p, "must be a number");
    double d = v.get<double>();
    if (!(d > 0) || !std::isfinite(d)) fail(p, "must be positive");
    return d;
  }

  std::uint64_t positive_integer(const nlohmann::json& obj, const std::vector<PathStep>& path, const std::string& key,
                                 std::uint64_t max) const {
    auto p = path;
    p.emplace_back(key);
    if (!obj.contains(key)) fail(path, "missing required field '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) fail(p, "must be a positive integer");
    auto n = v.get<std::uint64_t>();
    if (n > max) fail(p, "must be at most " + std::to_string(max));
    return n;
  }

  Coord coord(const nlohmann::json& v, const std::vector<PathStep>& path) const {
    if (!v.is_array() || v.size() != 3) fail(path, "must be an array [x, y, z]");
    Coord c;
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number_integer() || v[i].get<std::int64_t>() < 0 || v[i].get<std::int64_t>() > 100000) {
        auto p = path;
        p.emplace_back(i);
        fail(p, "must be a non-negative integer");
      }
    }
    c.x = v[0].get<int>();
    c.y = v[1].get<int>();
    c.z = v[2].get<int>();
    return c;
  }

 private:
  std::string_view text_;
  std::string_view name_;
};

inline std::optional<Pattern> parse_pattern(std::string_view s) {
  for (Pattern p : {Pattern::UniformRandom, Pattern::NearestNeighbor, Pattern::BroadcastStorm,
                    Pattern::PostmasterScatter, Pattern::BridgeFifoPairs, Pattern::EthernetMesh}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses and validates a workload document. Errors carry "name:line:column:".
inline WorkloadSpec parse_workload(std::string_view text, std::string_view name = "workload") {
  using nlohmann::json;
  using detail::PathStep;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    std::string what = e.what();
    if (auto colon = what.find(": "); colon != std::string::npos) what = what.substr(colon + 2);
    throw SimError(ErrorCode::InvalidWorkload,
                   std::string(name) + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
  detail::Checker chk(text, name);
  const std::vector<PathStep> root;
  if (!doc.is_object()) chk.fail(root, "top level must be an object");
  chk.allow_only(doc, root,
                 {"schema", "preset", "dims", "seed", "duration_us", "traffic", "ethernet_mode", "link_bandwidth",
                  "rx_buffer_bytes", "payload_max_bytes"});
  if (!doc.contains("schema")) chk.fail(root, "missing required field 'schema'");
  if (doc["schema"] != 1) chk.fail({PathStep{"schema"}}, "unsupported schema version (expected 1)");

  WorkloadSpec spec;
  if (doc.contains("preset") == doc.contains("dims")) chk.fail(root, "exactly one of 'preset' or 'dims' is required");
  if (doc.contains("preset")) {
    if (!doc["preset"].is_string()) chk.fail({PathStep{"preset"}}, "must be a string");
    spec.preset = doc["preset"].get<std::string>();
    try {
      spec.topology = SystemConfig::preset(spec.preset);
    } catch (const SimError& e) {
      chk.fail({PathStep{"preset"}}, e.what());
    }
  } else {
    spec.topology.dims = chk.coord(doc["dims"], {PathStep{"dims"}});
  }
  if (doc.contains("link_bandwidth")) {
    spec.topology.link_bandwidth = static_cast<std::uint64_t>(chk.positive_integer(doc, root, "link_bandwidth", 1ull << 50));
  }
  if (doc.contains("rx_buffer_bytes")) {
    spec.topology.rx_buffer_bytes = static_cast<std::uint32_t>(chk.positive_integer(doc, root, "rx_buffer_bytes", 1u << 30));
  }
  if (doc.contains("payload_max_bytes")) {
    spec.topology.payload_max_bytes = static_cast<std::uint32_t>(chk.positive_integer(doc, root, "payload_max_bytes", 0xFFFF));
  }
  try {
    Topology::build(spec.topology);
  } catch (const SimError& e) {
    chk.fail({PathStep{doc.contains("dims") ? "dims" : "preset"}}, e.what());
  }
  if (spec.topology.payload_max_bytes + kHeaderBytes > spec.topology.rx_buffer_bytes) {
    chk.fail(root, "a full packet must fit the receive buffer");
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) chk.fail({PathStep{"seed"}}, "must be a non-negative integer");
    spec.seed = doc["seed"].get<std::uint64_t>();
  }
  spec.duration_us = chk.positive_number(doc, root, "duration_us");
  if (spec.duration_us > 1e9) chk.fail({PathStep{"duration_us"}}, "must be at most 1e9");
  if (doc.contains("ethernet_mode")) {
    const auto& m = doc["ethernet_mode"];
    if (m == "interrupt") {
      spec.ethernet_mode = EthMode::Interrupt;
    } else if (m == "polling") {
      spec.ethernet_mode = EthMode::Polling;
    } else {
      chk.fail({PathStep{"ethernet_mode"}}, "must be \"interrupt\" or \"polling\"");
    }
  }

  if (!doc.contains("traffic")) chk.fail(root, "missing required field 'traffic'");
  if (!doc["traffic"].is_array()) chk.fail({PathStep{"traffic"}}, "must be an array");
  const Topology topo = Topology::build(spec.topology);
  for (std::size_t i = 0; i < doc["traffic"].size(); ++i) {
    const json& e = doc["traffic"][i];
    const std::vector<PathStep> at{PathStep{"traffic"}, PathStep{i}};
    if (!e.is_object()) chk.fail(at, "must be an object");
    chk.allow_only(e, at, {"pattern", "rate", "size", "count", "jitter", "params"});
    TrafficSpec t;
    if (!e.contains("pattern") || !e["pattern"].is_string()) chk.fail(at, "missing or non-string 'pattern'");
    auto pat = detail::parse_pattern(e["pattern"].get<std::string>());
    auto pat_at = at;
    pat_at.emplace_back("pattern");
    if (!pat) chk.fail(pat_at, "unknown pattern '" + e["pattern"].get<std::string>() + "'");
    t.pattern = *pat;
    t.rate = chk.positive_number(e, at, "rate");
    t.size = static_cast<std::uint32_t>(chk.positive_integer(e, at, "size", 1u << 24));
    if (e.contains("count")) t.count = chk.positive_integer(e, at, "count", 1ull << 40);
    if (e.contains("jitter")) {
      auto p = at;
      p.emplace_back("jitter");
      if (!e["jitter"].is_number() || e["jitter"].get<double>() < 0 || e["jitter"].get<double>() > 1) {
        chk.fail(p, "must be a number in [0, 1]");
      }
      t.jitter = e["jitter"].get<double>();
    }
    const json params = e.value("params", json::object());
    auto pat_params = at;
    pat_params.emplace_back("params");
    if (!params.is_object()) chk.fail(pat_params, "must be an object");
    auto size_at = at;
    size_at.emplace_back("size");
    switch (t.pattern) {
      case Pattern::UniformRandom:
      case Pattern::NearestNeighbor:
      case Pattern::EthernetMesh:
        chk.allow_only(params, pat_params, {});
        break;
      case Pattern::BroadcastStorm:
        chk.allow_only(params, pat_params, {"sources"});
        if (params.contains("sources")) {
          t.sources = static_cast<std::uint32_t>(chk.positive_integer(params, pat_params, "sources", topo.node_count()));
        }
        break;
      case Pattern::PostmasterScatter:
        chk.allow_only(params, pat_params, {"target", "initiators"});
        if (params.contains("target")) {
          auto p = pat_params;
          p.emplace_back("target");
          t.target = chk.coord(params["target"], p);
          if (!topo.in_bounds(*t.target)) chk.fail(p, "target is outside the mesh");
        }
        if (params.contains("initiators")) {
          t.initiators = static_cast<std::uint32_t>(
              chk.positive_integer(params, pat_params, "initiators", topo.node_count() - 1));
        }
        break;
      case Pattern::BridgeFifoPairs:
        chk.allow_only(params, pat_params, {"pairs", "width"});
        if (params.contains("pairs")) {
          t.pairs = static_cast<std::uint32_t>(chk.positive_integer(params, pat_params, "pairs", kMaxChannels));
        }
        if (params.contains("width")) {
          t.width = static_cast<int>(chk.positive_integer(params, pat_params, "width", 64));
          if (t.width < 7) {
            auto p = pat_params;
            p.emplace_back("width");
            chk.fail(p, "must be in 7..64");
          }
        }
        break;
    }
    const bool ethernet = t.pattern == Pattern::NearestNeighbor || t.pattern == Pattern::EthernetMesh;
    const bool postmaster = t.pattern == Pattern::UniformRandom || t.pattern == Pattern::PostmasterScatter;
    if (ethernet && t.size > EthConfig{}.mtu) chk.fail(size_at, "exceeds the Ethernet MTU");
    if (postmaster && t.size > PostmasterConfig{}.max_record_bytes) chk.fail(size_at, "exceeds the postmaster record limit");
    if (t.pattern == Pattern::BroadcastStorm && t.size > (spec.topology.payload_max_bytes - 12) / 4 * 4) {
      chk.fail(size_at, "exceeds one NetTunnel block");
    }
    if (t.pattern == Pattern::BridgeFifoPairs && t.size > BridgeFifoConfig{}.tx_staging_words) {
      chk.fail(size_at, "exceeds the bridge FIFO staging depth");
    }
    if (topo.node_count() < 2 && t.pattern != Pattern::BroadcastStorm) chk.fail(at, "needs at least two nodes");
    spec.traffic.push_back(t);
  }
  return spec;
}

/// Runs a workload: traffic is generated until the horizon, then the system
/// drains. Produces the stats document and, optionally, a packet trace.
class WorkloadRunner {
 public:
  using ordered_json = nlohmann::ordered_json;

  explicit WorkloadRunner(WorkloadSpec spec, std::ostream* trace = nullptr)
      : spec_(std::move(spec)), trace_(trace), sys_(options(spec_, trace != nullptr)) {
    sys_.network().set_trace_sink([this](NodeId at, const Packet& p, SimTime t) { on_delivery(at, p, t); });
  }

  System& system() { return sys_; }

  ordered_json run() {
    const Topology& topo = sys_.topology();
    horizon_ = static_cast<SimTime>(std::llround(spec_.duration_us * 1000.0));
    std::mt19937_64& rng = sys_.sim().rng();
    for (std::size_t i = 0; i < spec_.traffic.size(); ++i) {
      const TrafficSpec& t = spec_.traffic[i];
      switch (t.pattern) {
        case Pattern::UniformRandom:
          for (NodeId n = 0; n < topo.node_count(); ++n) sys_.postmaster_target(n);
          for (NodeId n = 0; n < topo.node_count(); ++n) start_source(t, n);
          break;
        case Pattern::NearestNeighbor:
        case Pattern::EthernetMesh:
          for (NodeId n = 0; n < topo.node_count(); ++n) sys_.ethernet(n);
          for (NodeId n = 0; n < topo.node_count(); ++n) start_source(t, n);
          break;
        case Pattern::BroadcastStorm: {
          std::vector<NodeId> nodes = all_nodes();
          if (t.sources) {
            std::shuffle(nodes.begin(), nodes.end(), rng);
            nodes.resize(*t.sources);
            std::sort(nodes.begin(), nodes.end());
          }
          for (NodeId n : nodes) start_source(t, n);
          break;
        }
        case Pattern::PostmasterScatter: {
          Coord c = t.target.value_or(Coord{topo.dims().x / 2, topo.dims().y / 2, topo.dims().z / 2});
          const NodeId target = topo.id(c);
          sys_.postmaster_target(target);
          std::vector<NodeId> nodes = all_nodes();
          nodes.erase(nodes.begin() + target);
          std::shuffle(nodes.begin(), nodes.end(), rng);
          nodes.resize(std::min<std::size_t>(nodes.size(), t.initiators));
          std::sort(nodes.begin(), nodes.end());
          for (NodeId n : nodes) start_source(t, n, target);
          break;
        }
        case Pattern::BridgeFifoPairs:
          for (std::uint32_t k = 0; k < t.pairs; ++k) {
            const auto a = static_cast<NodeId>(rng() % topo.node_count());
            auto b = static_cast<NodeId>(rng() % (topo.node_count() - 1));
            if (b >= a) ++b;
            const auto ch = next_fifo_channel_++;
            if (ch >= kMaxChannels) {
              throw SimError(ErrorCode::InvalidWorkload, "more than 32 bridge FIFO pairs in one workload");
            }
            auto& fifo = sys_.open_bridge_fifo(static_cast<std::uint8_t>(ch), a, b, {.width = t.width});
            fifos_.push_back({&fifo, i});
            start_source(t, a, b, &fifo);
          }
          break;
      }
    }
    sys_.sim().run_until(horizon_);
    sys_.sim().run();
    for (auto& f : fifos_) {
      while (auto w = f.fifo->pop()) {
        if (*w != f.next_expected) ++f.order_errors;
        f.next_expected = (f.next_expected + 1) & mask(f.fifo->width());
      }
    }
    return report();
  }

 private:
  struct ProtoAcc {
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;
    LatencyRecorder latency;
  };

  struct FifoUse {
    BridgeFifoChannel* fifo;
    std::size_t traffic;
    std::uint64_t next_expected = 0;
    std::uint64_t order_errors = 0;
  };

  static SystemOptions options(const WorkloadSpec& w, bool paths) {
    SystemOptions o;
    o.topology = w.topology;
    o.seed = w.seed;
    o.ethernet.mode = w.ethernet_mode;
    o.network.record_paths = paths;
    return o;
  }

  static std::uint64_t mask(int width) { return width >= 64 ? ~0ull : (1ull << width) - 1; }

  std::vector<NodeId> all_nodes() const {
    std::vector<NodeId> v(sys_.topology().node_count());
    for (NodeId n = 0; n < v.size(); ++n) v[n] = n;
    return v;
  }

  // Schedules the periodic message source for one node.
  void start_source(const TrafficSpec& t, NodeId node, NodeId peer = 0, BridgeFifoChannel* fifo = nullptr) {
    std::mt19937_64& rng = sys_.sim().rng();
    const auto period = std::max<SimTime>(1, static_cast<SimTime>(std::llround(1e9 / t.rate)));
    const SimTime first = static_cast<SimTime>(rng() % static_cast<std::uint64_t>(period));
    auto src = std::make_shared<Source>(Source{&t, node, peer, fifo, period, 0, 0});
    sources_.push_back(src);
    if (first <= horizon_) sys_.sim().schedule_at(first, [this, src] { fire(*src); });
  }

  struct Source {
    const TrafficSpec* spec;
    NodeId node;
    NodeId peer;
    BridgeFifoChannel* fifo;
    SimTime period;
    std::uint64_t sent;
    std::uint64_t word;
  };

  void fire(Source& s) {
    const TrafficSpec& t = *s.spec;
    const Topology& topo = sys_.topology();
    std::mt19937_64& rng = sys_.sim().rng();
    bool refused = false;
    switch (t.pattern) {
      case Pattern::UniformRandom: {
        NodeId dst = static_cast<NodeId>(rng() % (topo.node_count() - 1));
        if (dst >= s.node) ++dst;
        refused = sys_.postmaster_initiator(s.node).send(dst, payload(t.size, s)) != SendResult::Accepted;
        break;
      }
      case Pattern::PostmasterScatter:
        refused = sys_.postmaster_initiator(s.node).send(s.peer, payload(t.size, s)) != SendResult::Accepted;
        break;
      case Pattern::NearestNeighbor: {
        std::vector<NodeId> nbrs;
        for (LinkId l : topo.out_links(s.node)) {
          if (topo.link(l).span == Span::Single) nbrs.push_back(topo.link_dst(l));
        }
        const NodeId dst = nbrs[rng() % nbrs.size()];
        refused = sys_.ethernet(s.node).send(topo.coord(dst), payload(t.size, s)) != EthInterface::SendStatus::Queued;
        break;
      }
      case Pattern::EthernetMesh: {
        NodeId dst = static_cast<NodeId>(rng() % (topo.node_count() - 1));
        if (dst >= s.node) ++dst;
        const auto n = static_cast<std::uint32_t>(1 + rng() % t.size);
        refused = sys_.ethernet(s.node).send(topo.coord(dst), payload(n, s)) != EthInterface::SendStatus::Queued;
        break;
      }
      case Pattern::BroadcastStorm:
        sys_.sideband().tunnel_broadcast_block(s.node, 0x0010'0000, payload(t.size, s), nullptr);
        break;
      case Pattern::BridgeFifoPairs:
        for (std::uint32_t k = 0; k < t.size; ++k) {
          if (s.fifo->push(s.word & mask(s.fifo->width())) != PushResult::Accepted) {
            refused = true;
            break;
          }
          ++s.word;
        }
        break;
    }
    refused_ += refused ? 1 : 0;
    ++s.sent;
    if (t.count && s.sent >= *t.count) return;
    SimTime gap = s.period;
    const auto spread = static_cast<std::uint64_t>(static_cast<double>(s.period) * t.jitter);
    if (spread > 0) gap += static_cast<SimTime>(rng() % (spread + 1));
    const SimTime next = sys_.sim().now() + gap;
    if (next <= horizon_) sys_.sim().schedule_at(next, [this, &s] { fire(s); });
  }

  static Bytes payload(std::uint32_t n, const Source& s) {
    Bytes b(n);
    for (std::uint32_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(s.node * 31 + s.sent * 7 + i);
    return b;
  }

  void on_delivery(NodeId at, const Packet& p, SimTime t) {
    const auto proto = static_cast<std::size_t>(p.header.protocol);
    if (proto < acc_.size()) {
      ProtoAcc& a = acc_[proto];
      ++a.packets;
      a.bytes += p.payload.size();
      a.latency.add(t - p.injected_at);
    }
    last_delivery_ = std::max(last_delivery_, t);
    if (trace_ == nullptr) return;
    auto c3 = [](const Coord& c) { return nlohmann::ordered_json::array({c.x, c.y, c.z}); };
    const Topology& topo = sys_.topology();
    ordered_json rec;
    rec["t_inject"] = p.injected_at;
    rec["t_deliver"] = t;
    rec["src"] = c3(p.header.src);
    rec["dst"] = c3(topo.coord(at));
    rec["broadcast"] = p.header.broadcast;
    rec["protocol"] = std::string(to_string(p.header.protocol));
    rec["channel"] = p.header.channel;
    rec["seq"] = p.header.seq;
    rec["bytes"] = p.payload.size();
    rec["hops"] = p.hops;
    ordered_json path = ordered_json::array();
    for (NodeId n : p.path) path.push_back(c3(topo.coord(n)));
    rec["path"] = std::move(path);
    *trace_ << rec.dump() << '\n';
  }

  static ordered_json summary(const LatencyRecorder& r) {
    ordered_json j;
    j["count"] = r.count();
    j["mean"] = r.mean();
    j["p50"] = r.percentile(50);
    j["p99"] = r.percentile(99);
    return j;
  }

  ordered_json report() {
    const Topology& topo = sys_.topology();
    const NetworkStats& ns = sys_.network().stats();
    const SimTime elapsed = std::max(horizon_, last_delivery_);
    auto c3 = [](const Coord& c) { return ordered_json::array({c.x, c.y, c.z}); };
    ordered_json out;
    out["schema"] = 1;
    out["preset"] = spec_.preset.empty() ? ordered_json(nullptr) : ordered_json(spec_.preset);
    out["dims"] = c3(topo.dims());
    out["nodes"] = topo.node_count();
    out["links"] = topo.link_count();
    out["seed"] = spec_.seed;
    out["horizon_ns"] = horizon_;
    out["last_delivery_ns"] = last_delivery_;
    out["events"] = sys_.sim().events_executed();

    ordered_json fabric;
    fabric["injected"] = ns.injected;
    fabric["injected_directed"] = ns.injected - ns.injected_broadcasts;
    fabric["injected_broadcasts"] = ns.injected_broadcasts;
    fabric["delivered"] = ns.delivered;
    fabric["directed_delivered"] = ns.directed_delivered;
    fabric["broadcast_deliveries"] = ns.broadcast_deliveries;
    fabric["dropped"] = (ns.injected - ns.injected_broadcasts) - ns.directed_delivered +
                        ns.injected_broadcasts * topo.node_count() - ns.broadcast_deliveries;
    fabric["misdeliveries"] = ns.misdeliveries;
    fabric["minimality_violations"] = ns.minimality_violations;
    fabric["broadcast_multispan_hops"] = ns.broadcast_multispan_hops;
    fabric["unknown_protocol_dropped"] = sys_.hub().unknown_dropped();
    fabric["injection_backpressure"] = ns.injection_backpressure;
    fabric["credits_conserved"] = sys_.network().credits_conserved();
    out["fabric"] = std::move(fabric);

    ordered_json queues;
    queues["max_injection_depth"] = ns.max_injection_depth;
    queues["max_transit_depth"] = ns.max_transit_depth;
    queues["max_rx_blocked"] = ns.max_rx_blocked;
    std::size_t eth_backlog = 0;
    for (const auto& e : sys_.ethernet_interfaces()) {
      if (e) eth_backlog = std::max(eth_backlog, e->stats().max_rx_backlog);
    }
    std::size_t pm_held = 0;
    for (const auto& t : sys_.postmaster_targets()) {
      if (t) pm_held = std::max(pm_held, t->stats().max_held_records);
    }
    std::size_t fifo_reorder = 0;
    for (const auto& f : fifos_) fifo_reorder = std::max(fifo_reorder, f.fifo->stats().max_reorder_occupancy);
    queues["max_ethernet_rx_backlog"] = eth_backlog;
    queues["max_postmaster_held_records"] = pm_held;
    queues["max_bridge_fifo_reorder"] = fifo_reorder;
    out["queues"] = std::move(queues);

    ordered_json protocols;
    for (ProtocolId id : {ProtocolId::Ethernet, ProtocolId::Postmaster, ProtocolId::BridgeFifo, ProtocolId::NetTunnel}) {
      const ProtoAcc& a = acc_[static_cast<std::size_t>(id)];
      ordered_json p;
      p["packets_delivered"] = a.packets;
      p["payload_bytes"] = a.bytes;
      p["packet_latency_ns"] = summary(a.latency);
      protocols[std::string(to_string(id))] = std::move(p);
    }
    out["protocols"] = std::move(protocols);

    ordered_json msgs;
    {
      EthStats sum;
      LatencyRecorder lat;
      for (const auto& e : sys_.ethernet_interfaces()) {
        if (!e) continue;
        sum.frames_sent += e->stats().frames_sent;
        sum.frames_received += e->stats().frames_received;
        sum.bytes_received += e->stats().bytes_received;
        sum.delivery_events += e->stats().delivery_events;
        sum.ring_full_events += e->stats().ring_full_events;
        sum.reassembly_timeouts += e->stats().reassembly_timeouts;
        lat.merge(e->latency());
      }
      ordered_json j;
      j["frames_sent"] = sum.frames_sent;
      j["frames_received"] = sum.frames_received;
      j["bytes_received"] = sum.bytes_received;
      j["delivery_events"] = sum.delivery_events;
      j["ring_full_events"] = sum.ring_full_events;
      j["reassembly_timeouts"] = sum.reassembly_timeouts;
      j["latency_ns"] = summary(lat);
      msgs["ethernet"] = std::move(j);
    }
    {
      std::uint64_t sent = 0;
      std::uint64_t bytes_sent = 0;
      std::uint64_t backpressure = 0;
      for (const auto& i : sys_.postmaster_initiators()) {
        if (!i) continue;
        sent += i->stats().records_sent;
        bytes_sent += i->stats().bytes_sent;
        backpressure += i->stats().backpressure_events;
      }
      std::uint64_t stored = 0;
      std::uint64_t bytes = 0;
      std::uint64_t full = 0;
      LatencyRecorder lat;
      for (const auto& t : sys_.postmaster_targets()) {
        if (!t) continue;
        stored += t->stats().records;
        bytes += t->stats().bytes;
        full += t->stats().buffer_full_events;
        lat.merge(t->latency());
      }
      ordered_json j;
      j["records_sent"] = sent;
      j["bytes_sent"] = bytes_sent;
      j["records_stored"] = stored;
      j["bytes_stored"] = bytes;
      j["backpressure_events"] = backpressure;
      j["buffer_full_events"] = full;
      j["latency_ns"] = summary(lat);
      msgs["postmaster"] = std::move(j);
    }
    {
      ordered_json chans = ordered_json::array();
      for (const auto& f : fifos_) {
        const BridgeFifoChannel& c = *f.fifo;
        ordered_json j;
        j["channel"] = c.channel();
        j["src"] = c3(topo.coord(c.src()));
        j["dst"] = c3(topo.coord(c.dst()));
        j["hops"] = topo.min_hops(c.src(), c.dst());
        j["width"] = c.width();
        j["words_pushed"] = c.stats().words_pushed;
        j["words_popped"] = c.stats().words_popped;
        j["packets_sent"] = c.stats().packets_sent;
        j["backpressure_events"] = c.stats().backpressure_events;
        j["max_reorder_occupancy"] = c.stats().max_reorder_occupancy;
        j["order_errors"] = f.order_errors;
        j["latency_ns"] = summary(c.latency());
        j["model_latency_ns"] = packet_latency(sys_.options().network.latency, topo.min_hops(c.src(), c.dst()),
                                               static_cast<std::uint32_t>((c.width() + 7) / 8),
                                               topo.config().link_bandwidth);
        chans.push_back(std::move(j));
      }
      msgs["bridge_fifo"] = std::move(chans);
    }
    {
      const SidebandStats& s = sys_.sideband().stats();
      ordered_json j;
      j["broadcasts"] = s.tunnel_broadcasts;
      std::uint64_t applies = 0;
      for (auto a : sys_.sideband().broadcast_applies()) applies += a;
      j["broadcast_applies"] = applies;
      j["requests"] = s.tunnel_requests;
      j["responses"] = s.tunnel_responses;
      msgs["net_tunnel"] = std::move(j);
    }
    msgs["refused_at_source"] = refused_;
    out["messages"] = std::move(msgs);

    ordered_json links = ordered_json::array();
    for (LinkId l = 0; l < topo.link_count(); ++l) {
      const LinkSpec& s = topo.link(l);
      const LinkStats& st = sys_.network().link(l).stats();
      ordered_json j;
      j["src"] = c3(s.src);
      j["dst"] = c3(s.dst);
      j["span"] = s.span == Span::Single ? "single" : "multi";
      j["bytes"] = st.bytes_carried;
      j["packets"] = st.packets;
      j["busy_fraction"] = elapsed > 0 ? static_cast<double>(st.busy_ns) / static_cast<double>(elapsed) : 0.0;
      j["credit_stall_ns"] = st.credit_stall_ns;
      links.push_back(std::move(j));
    }
    out["link_stats"] = std::move(links);
    return out;
  }

  WorkloadSpec spec_;
  std::ostream* trace_;
  System sys_;
  SimTime horizon_ = 0;
  SimTime last_delivery_ = 0;
  std::uint64_t refused_ = 0;
  std::uint32_t next_fifo_channel_ = 0;
  std::array<ProtoAcc, 16> acc_{};
  std::vector<std::shared_ptr<Source>> sources_;
  std::vector<FifoUse> fifos_;
};

}  // namespace incsim
