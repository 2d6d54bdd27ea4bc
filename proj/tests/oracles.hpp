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

// Test-only reference computations. These work from coordinates alone and do
// not call into the library's own graph or distance code.

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "incsim/common.hpp"

namespace incsim::oracle {

inline bool in_box(const Coord& d, const Coord& c) {
  return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < d.x && c.y < d.y && c.z < d.z;
}

inline int flat(const Coord& d, const Coord& c) { return c.x + d.x * (c.y + d.y * c.z); }

inline Coord unflat(const Coord& d, int i) { return {i % d.x, (i / d.x) % d.y, i / (d.x * d.y)}; }

/// Every in-bounds node at distance 1 or 3 along one axis.
inline std::vector<Coord> neighbours(const Coord& d, const Coord& c) {
  std::vector<Coord> out;
  for (int step : {1, -1, 3, -3}) {
    for (int axis = 0; axis < 3; ++axis) {
      Coord n = c;
      (axis == 0 ? n.x : axis == 1 ? n.y : n.z) += step;
      if (in_box(d, n)) out.push_back(n);
    }
  }
  return out;
}

/// Hop distances from `src` to every node, by breadth-first search.
inline std::vector<int> bfs(const Coord& d, const Coord& src) {
  std::vector<int> dist(static_cast<std::size_t>(d.x * d.y * d.z), -1);
  std::deque<Coord> q{src};
  dist[flat(d, src)] = 0;
  while (!q.empty()) {
    Coord c = q.front();
    q.pop_front();
    for (const Coord& n : neighbours(d, c)) {
      if (dist[flat(d, n)] < 0) {
        dist[flat(d, n)] = dist[flat(d, c)] + 1;
        q.push_back(n);
      }
    }
  }
  return dist;
}

/// Directed (src, dst) pairs of the mesh, built from coordinates.
inline std::vector<std::pair<Coord, Coord>> all_links(const Coord& d) {
  std::vector<std::pair<Coord, Coord>> out;
  for (int i = 0; i < d.x * d.y * d.z; ++i) {
    Coord c = unflat(d, i);
    for (const Coord& n : neighbours(d, c)) out.emplace_back(c, n);
  }
  return out;
}

/// Reference broadcast flood: simulates the X-then-Y-then-Z forwarding rule
/// hop by hop on single-span links and counts copies received per node.
inline std::vector<int> broadcast_copies(const Coord& d, const Coord& src) {
  std::vector<int> copies(static_cast<std::size_t>(d.x * d.y * d.z), 0);
  struct Hop {
    Coord at;
    int axis;
    int dir;
  };
  std::deque<Hop> q;
  copies[flat(d, src)] = 1;
  for (int axis = 0; axis < 3; ++axis)
    for (int dir : {1, -1}) q.push_back({src, axis, dir});
  while (!q.empty()) {
    Hop h = q.front();
    q.pop_front();
    Coord n = h.at;
    (h.axis == 0 ? n.x : h.axis == 1 ? n.y : n.z) += h.dir;
    if (!in_box(d, n)) continue;
    ++copies[flat(d, n)];
    q.push_back({n, h.axis, h.dir});
    for (int axis = h.axis + 1; axis < 3; ++axis)
      for (int dir : {1, -1}) q.push_back({n, axis, dir});
  }
  return copies;
}

}  // namespace incsim::oracle
