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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "incsim/sandbox.hpp"

namespace incsim {
namespace {

struct Console {
  explicit Console(SystemConfig cfg) : sys(make(cfg)), box(sys, out, err) {}
  static SystemOptions make(SystemConfig cfg) {
    SystemOptions o;
    o.topology = cfg;
    return o;
  }
  std::string run(const std::string& line) {
    out.str("");
    err.str("");
    box.execute(line);
    return out.str();
  }
  System sys;
  std::ostringstream out;
  std::ostringstream err;
  Sandbox box;
};

TEST(Sandbox, ReadYourWrite) {
  Console c(SystemConfig::card());
  EXPECT_NE(c.run("wr 0,1,2 0x1000 42").find("via ring"), std::string::npos);
  const std::string r = c.run("rd 0,1,2 0x1000");
  EXPECT_NE(r.find("= 0x0000002a (42)"), std::string::npos) << r;
  EXPECT_EQ(c.box.errors(), 0u);
}

TEST(Sandbox, OffCardAccessUsesTunnel) {
  Console c(SystemConfig::inc3000());
  EXPECT_NE(c.run("wr 11,11,2 0x20 7").find("via tunnel"), std::string::npos);
  EXPECT_NE(c.run("rd 11,11,2 0x20").find("(7) via tunnel"), std::string::npos);
  EXPECT_EQ(c.sys.sideband().memory(c.sys.node({11, 11, 2})).read(0x20), 7u);
}

TEST(Sandbox, ReadAllPrintsRingOrder) {
  Console c(SystemConfig::inc3000());
  c.run("bwr 0x1000 5");
  std::istringstream lines(c.run("rdall 1 0x1000"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    EXPECT_NE(line.find("0x00000005"), std::string::npos) << line;
    ++n;
  }
  EXPECT_EQ(n, 27);
}

TEST(Sandbox, LoadAndBoot) {
  Console c(SystemConfig::inc3000());
  const auto path = std::filesystem::temp_directory_path() / "incsim_sandbox_img.bin";
  Bytes image(1000);
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = static_cast<std::uint8_t>(i * 13 + 1);
  {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  }
  EXPECT_NE(c.run("load " + path.string() + " 0x10000").find("loaded 1000 bytes"), std::string::npos) << c.err.str();
  c.run("boot");
  NodeMemory expected;
  expected.write_block(0x10000, image);
  for (NodeId n = 0; n < c.sys.topology().node_count(); ++n) {
    const NodeMemory& m = c.sys.sideband().memory(n);
    for (Address a = 0x10000; a < 0x10000 + 1000; a += 4) ASSERT_EQ(m.read(a), expected.read(a));
    EXPECT_EQ(m.read(regs::kBootCommand), regs::kBootMagic);
  }
  std::filesystem::remove(path);
}

TEST(Sandbox, InfoAndErrors) {
  Console c(SystemConfig::inc3000());
  const std::string info = c.run("info");
  EXPECT_NE(info.find("cards 16"), std::string::npos) << info;
  EXPECT_NE(info.find("nodes 432"), std::string::npos);
  EXPECT_NE(info.find("build-id 0x1ac03000"), std::string::npos);
  c.run("frobnicate");
  EXPECT_NE(c.err.str().find("unknown command"), std::string::npos);
  EXPECT_NE(c.err.str().find("rdall"), std::string::npos);
  c.run("rd 0,0,0 0x3");
  EXPECT_NE(c.err.str().find("aligned"), std::string::npos);
  c.run("rd 99,0,0 0");
  EXPECT_NE(c.err.str().find("error"), std::string::npos);
  c.run("wr 0,0,0 0x10");
  EXPECT_NE(c.err.str().find("usage"), std::string::npos);
  c.run("rdall 16 0");
  EXPECT_NE(c.err.str().find("card"), std::string::npos);
  EXPECT_EQ(c.box.errors(), 5u);
  EXPECT_FALSE(c.box.execute("quit"));
}

TEST(Sandbox, ScriptedSession) {
  Console c(SystemConfig::card());
  std::istringstream script("wr 1,1,1 0x8 3\n# comment\n\nrd 1,1,1 0x8\nquit\nrd 1,1,1 0x8\n");
  c.box.run(script, false);
  EXPECT_EQ(c.out.str().find("rd"), std::string::npos);
  std::string s = c.out.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2);
}

}  // namespace
}  // namespace incsim
