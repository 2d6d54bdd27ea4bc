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

#include <memory>

#include "incsim/load.hpp"

namespace incsim::testing {

/// Starts cross traffic and returns it; the sink count is `received()`.
inline std::shared_ptr<BackgroundLoad> background_load(System& sys, SimTime period_ns, SimTime until,
                                                       std::uint64_t seed) {
  return std::make_shared<BackgroundLoad>(sys, period_ns, until, seed);
}

inline SystemOptions options_for(const SystemConfig& cfg, std::uint64_t seed = 1) {
  SystemOptions o;
  o.topology = cfg;
  o.seed = seed;
  return o;
}

}  // namespace incsim::testing
