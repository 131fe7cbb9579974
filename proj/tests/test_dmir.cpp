// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#include <catch2/catch_amalgamated.hpp>

#include "paramfuzz/dmir/cfg.hpp"
#include "paramfuzz/dmir/parse.hpp"
#include "paramfuzz/dmir/print.hpp"
#include "paramfuzz/rng.hpp"
#include "testutil.hpp"

using namespace paramfuzz;
using namespace paramfuzz::dmir;

namespace {

// Counts every statement in a block, nested ones included.
int count_stmts(const Block& b) {
  int n = 0;
  for (const auto& s : b.stmts) {
    n++;
    if (s.then_blk) n += count_stmts(*s.then_blk);
    if (s.else_blk) n += count_stmts(*s.else_blk);
    for (const auto& c : s.cases) n += count_stmts(*c.body);
    if (s.default_blk) n += count_stmts(*s.default_blk);
    if (s.body) n += count_stmts(*s.body);
  }
  return n;
}

const char* kZeroingStore = R"(
module sd_mod {
  driver sd {
    field mode: uint = 0;
    attr "zeroing_mode" rw {
      store {
        let r = match_string(buf, ["off", "unmap", "zero"]);
        if (r >= 0) { self.mode = r; return OK; }
        return EINVAL;
      }
    }
  }
}
bus scsi;
)";

}  // namespace

TEST_CASE("minimal module parses") {
  auto p = parse("module m { param verbose: bool = false; }");
  REQUIRE(p.modules.size() == 1);
  CHECK(p.modules[0].params.size() == 1);
  CHECK(p.modules[0].drivers.empty());
  CHECK(p.modules[0].params[0].type == PType::Bool);
}

TEST_CASE("zeroing_mode store block structure") {
  auto p = parse(kZeroingStore);
  const auto& drv = p.modules[0].drivers[0];
  auto flat = flatten_attrs(drv);
  REQUIRE(flat.size() == 1);
  const AttrDecl& a = *flat[0].attr;
  REQUIRE(a.store);
  // Tree-walk oracle: let + if + (assign + return) + return = 5 statements
  // total, 3 at the top level, and exactly 2 conditional edges.
  CHECK(count_stmts(*a.store) == 5);
  CHECK(a.store->stmts.size() == 3);
  Cfg cfg = control_flow_graph(*a.store);
  CHECK(cfg.edges.size() == 2);
  CHECK(cfg.blocks.size() == 2);  // store body + then-block
}

TEST_CASE("self-parent is a cycle") {
  const char* src = R"(
module m { driver sd { devnode; } }
bus scsi;
device d1: driver=sd, parent=d1, devnode="d1";
)";
  REQUIRE_THROWS_WITH(parse(src), Catch::Matchers::ContainsSubstring("parent cycle"));
}

TEST_CASE("two-device parent cycle") {
  const char* src = R"(
module m { driver sd { } }
bus scsi;
device a: driver=sd, parent=b;
device b: driver=sd, parent=a;
)";
  REQUIRE_THROWS_AS(parse(src), ResolveError);
}

TEST_CASE("resolve and type errors") {
  CHECK_THROWS_AS(parse("module m { param x: uint = \"s\"; }"), TypeError);
  CHECK_THROWS_AS(parse("module m { param x: uint = -3; }"), TypeError);
  CHECK_THROWS_AS(parse("module m { driver d { op f() { self.q = 1; } } }"), ResolveError);
  CHECK_THROWS_AS(parse("module m { driver d { } } device x: driver=nope, parent=b;"),
                  ResolveError);
  // helper outside store
  CHECK_THROWS_AS(parse("module m { driver d { op f() { let v = kstrtouint(buf); } } }"),
                  ResolveError);
  // buf outside store
  CHECK_THROWS_AS(
      parse("module m { driver d { field s: string = \"\"; op f() { self.s = buf; } } }"),
      ResolveError);
  // rw attr without store
  CHECK_THROWS_AS(parse("module m { driver d { attr \"a\" rw { } } }"), ParseError);
  // devnode name on non-devnode driver
  CHECK_THROWS_AS(parse("module m { driver d { } } bus b; device x: driver=d, parent=b, "
                        "devnode=\"x0\";"),
                  ResolveError);
}

TEST_CASE("parse errors carry position") {
  try {
    parse("module m {\n  param broken\n}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("expected") != std::string::npos);
  }
}

TEST_CASE("flatten_attrs order") {
  SECTION("flat input is identity") {
    auto p = parse(R"(
module m { driver d {
  attr "a" ro { }
  attr "b" ro { }
} })");
    auto flat = flatten_attrs(p.modules[0].drivers[0]);
    REQUIRE(flat.size() == 2);
    CHECK(flat[0].attr->fname == "a");
    CHECK(flat[1].attr->fname == "b");
  }
  SECTION("nested groups flatten depth-first") {
    auto p = parse(R"(
module m { driver d {
  group g {
    attr "x" ro { }
    group h { attr "y" ro { } }
  }
  attr "z" ro { }
} })");
    auto flat = flatten_attrs(p.modules[0].drivers[0]);
    REQUIRE(flat.size() == 3);
    CHECK(flat[0].attr->fname == "x");
    CHECK(flat[0].rel_path == "g/x");
    CHECK(flat[1].attr->fname == "y");
    CHECK(flat[1].rel_path == "g/h/y");
    CHECK(flat[2].attr->fname == "z");
    CHECK(flat[2].rel_path == "z");
  }
  SECTION("empty driver") {
    auto p = parse("module m { driver d { } }");
    CHECK(flatten_attrs(p.modules[0].drivers[0]).empty());
  }
}

TEST_CASE("flatten_attrs order equals lexical order on random nestings") {
  SplitMix64 rng(20260810);
  for (int iter = 0; iter < 50; iter++) {
    // Generate a random attr/group nesting and remember declaration order.
    std::vector<std::string> expected;
    int counter = 0;
    std::function<std::string(int)> gen = [&](int depth) -> std::string {
      std::string out;
      int items = 1 + static_cast<int>(rng.below(4));
      for (int i = 0; i < items; i++) {
        if (depth < 4 && rng.chance(0.35)) {
          out += "group g" + std::to_string(counter++) + " {\n";
          out += gen(depth + 1);
          out += "}\n";
        } else {
          std::string name = "a" + std::to_string(counter++);
          expected.push_back(name);
          out += "attr \"" + name + "\" ro { }\n";
        }
      }
      return out;
    };
    std::string body = gen(0);
    auto p = parse("module m { driver d {\n" + body + "} }");
    auto flat = flatten_attrs(p.modules[0].drivers[0]);
    REQUIRE(flat.size() == expected.size());
    for (size_t i = 0; i < flat.size(); i++) CHECK(flat[i].attr->fname == expected[i]);
  }
}

TEST_CASE("group nesting depth limit") {
  std::string src = "module m { driver d { ";
  for (int i = 0; i < 10; i++) src += "group g" + std::to_string(i) + " { ";
  src += "attr \"a\" ro { } ";
  for (int i = 0; i < 10; i++) src += "} ";
  src += "} }";
  CHECK_THROWS_AS(parse(src), ParseError);
}

TEST_CASE("cfg shapes") {
  SECTION("straight-line block") {
    auto p = parse(R"(
module m { driver d {
  field a: uint = 0;
  op f() { self.a = 1; self.a = 2; self.a = 3; }
} })");
    Cfg c = control_flow_graph(*p.modules[0].drivers[0].ops[0].body);
    CHECK(c.blocks.size() == 1);
    CHECK(c.edges.empty());
  }
  SECTION("if/else diamond") {
    auto p = parse(R"(
module m { driver d {
  field a: uint = 0;
  op f(x: uint) { if (x > 0) { self.a = 1; } else { self.a = 2; } }
} })");
    Cfg c = control_flow_graph(*p.modules[0].drivers[0].ops[0].body);
    CHECK(c.blocks.size() == 3);
    CHECK(c.edges.size() == 2);
  }
  SECTION("switch with three cases plus default") {
    auto p = parse(R"(
module m { driver d {
  field a: uint = 0;
  op f(x: uint) {
    switch (x) {
      case 1: { self.a = 1; }
      case 2: { self.a = 2; }
      case 3: { self.a = 3; }
      default: { self.a = 0; }
    }
  }
} })");
    Cfg c = control_flow_graph(*p.modules[0].drivers[0].ops[0].body);
    CHECK(c.blocks.size() == 5);
    CHECK(c.edges.size() == 4);
  }
  SECTION("switch without default still has a fall-through edge") {
    auto p = parse(R"(
module m { driver d {
  field a: uint = 0;
  op f(x: uint) { switch (x) { case 1: { self.a = 1; } } }
} })");
    Cfg c = control_flow_graph(*p.modules[0].drivers[0].ops[0].body);
    CHECK(c.blocks.size() == 2);
    CHECK(c.edges.size() == 2);
  }
}

TEST_CASE("ids are pure functions of source text") {
  std::string src = testutil::read_corpus("blktrace_uaf.dmir");
  auto p1 = parse(src);
  auto p2 = parse(src);
  CHECK(p1.block_count == p2.block_count);
  CHECK(p1.edge_count == p2.edge_count);
  CHECK(p1.stmt_count == p2.stmt_count);
  CHECK(p1.source_hash == p2.source_hash);
  CHECK(print(p1) == print(p2));
}

TEST_CASE("parse-print round trip on the whole corpus") {
  for (const auto& file : testutil::corpus_files()) {
    INFO(file);
    auto p1 = parse(read_file(file));
    std::string canon = print(p1);
    auto p2 = parse(canon);
    // Canonical text is a fixpoint and id assignment is structural.
    CHECK(print(p2) == canon);
    CHECK(p2.block_count == p1.block_count);
    CHECK(p2.edge_count == p1.edge_count);
    CHECK(p2.stmt_count == p1.stmt_count);
  }
}

TEST_CASE("expression printing round trip") {
  auto p = parse(R"(
module m { driver d {
  field a: int = 0;
  field b: int = 0;
  op f(x: int, y: int) {
    self.a = (x + y) * 2 - -x % 3;
    if (!(x > 0) || y <= 1 && x != y) { self.b = x / y; }
  }
} })");
  std::string canon = print(p);
  CHECK(print(parse(canon)) == canon);
}
