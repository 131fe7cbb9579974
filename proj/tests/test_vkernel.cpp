// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#include <catch2/catch_amalgamated.hpp>

#include "paramfuzz/dmir/cfg.hpp"
#include "paramfuzz/dmir/parse.hpp"
#include "paramfuzz/vkernel/interp.hpp"
#include "testutil.hpp"

using namespace paramfuzz;
using namespace paramfuzz::vkernel;

namespace {

Call open_call(const std::string& dev, int result) {
  Call c;
  c.kind = CallKind::OpenDev;
  c.dev = dev;
  c.result = result;
  return c;
}

Call write_call(const std::string& path, const std::string& value) {
  Call c;
  c.kind = CallKind::WriteParam;
  c.path = path;
  c.value = value;
  return c;
}

Call op_call(int fd, const std::string& op, std::vector<int64_t> args = {}) {
  Call c;
  c.kind = CallKind::InvokeOp;
  c.fd = fd;
  c.op = op;
  for (int64_t a : args) {
    OpArgValue v;
    v.i = a;
    c.args.push_back(v);
  }
  return c;
}

TestCase blktrace_race_case(uint64_t seed) {
  TestCase tc;
  tc.schedule_seed = seed;
  tc.threads.push_back({open_call("/dev/sd0", 1),
                        write_call("/sys/scsi/sd0/trace_enable", "1"),
                        write_call("/sys/scsi/sd1/trace_enable", "1"),
                        op_call(1, "ioctl_note", {0})});
  tc.threads.push_back({write_call("/sys/scsi/sd1/trace_enable", "0")});
  return tc;
}

TestCase hub_race_case(uint64_t seed) {
  TestCase tc;
  tc.schedule_seed = seed;
  tc.threads.push_back(
      {open_call("/dev/hub0", 1), op_call(1, "activate"), op_call(1, "disconnect")});
  tc.threads.push_back({write_call("/sys/usb/hub0/port1/disable", "1")});
  return tc;
}

TestCase deadlock_case(uint64_t seed) {
  TestCase tc;
  tc.schedule_seed = seed;
  tc.threads.push_back({open_call("/dev/mux0", 1), op_call(1, "sweep")});
  tc.threads.push_back({write_call("/sys/i2c/mux1/reverse", "1"), open_call("/dev/mux1", 2),
                        op_call(2, "sweep")});
  return tc;
}

}  // namespace

TEST_CASE("boot builds sysfs and dev namespaces") {
  auto prog = dmir::parse(testutil::read_corpus("loopdev.dmir"));
  BootedKernel boot(prog);

  auto kids = boot.vfs().list("/sys/blkbus/loop0");
  // 3 flat attr files + the power group dir
  REQUIRE(kids.size() == 4);
  CHECK(boot.vfs().find("/sys/blkbus/loop0/power/control") != nullptr);
  CHECK(boot.vfs().find("/sys/blkbus/loop0/power/control")->kind == NodeKind::AttrFile);
  CHECK(boot.vfs().find("/dev/loop2") != nullptr);
  CHECK(boot.vfs().find("/sys/module/loop/parameters/max_part") != nullptr);
  CHECK(boot.dev_paths().size() == 4);
}

TEST_CASE("hub ports nest under the hub directory") {
  auto prog = dmir::parse(testutil::read_corpus("hub_disconnect_npd.dmir"));
  BootedKernel boot(prog);
  const auto& devs = boot.devices();
  REQUIRE(devs.size() == 3);
  CHECK(devs[0].sysfs_path == "/sys/usb/hub0");
  CHECK(devs[1].sysfs_path == "/sys/usb/hub0/port1");
  CHECK(devs[2].sysfs_path == "/sys/usb/hub0/port2");
  CHECK(devs[1].parent == 0);
}

TEST_CASE("duplicate devnode is a boot error") {
  auto prog = dmir::parse(R"(
module m { driver d { devnode; } }
bus b;
device x: driver=d, parent=b, devnode="n0";
device y: driver=d, parent=b, devnode="n0";
)");
  CHECK_THROWS_AS(BootedKernel(prog), BootError);
}

TEST_CASE("write_param runs store blocks") {
  auto prog = dmir::parse(testutil::read_corpus("zeroing_mode.dmir"));
  BootedKernel boot(prog);

  SECTION("valid value updates the field") {
    TestCase tc;
    tc.threads.push_back({write_call("/sys/scsi/disk0/zeroing_mode", "writesame")});
    CaseRunner r(boot, tc);
    auto res = r.run();
    CHECK(res.statuses[0][0].status == dmir::Status::Ok);
    CHECK(r.state().fields[0][0].i == 1);  // index of "writesame" in the set
  }
  SECTION("invalid value rejected, field unchanged") {
    TestCase tc;
    tc.threads.push_back({write_call("/sys/scsi/disk0/zeroing_mode", "bogus")});
    CaseRunner r(boot, tc);
    auto res = r.run();
    CHECK(res.statuses[0][0].status == dmir::Status::Einval);
    CHECK(r.state().fields[0][0].i == 0);
  }
  SECTION("read-only attr returns EIO") {
    TestCase tc;
    tc.threads.push_back({write_call("/sys/scsi/disk0/model", "x")});
    CHECK(run_case(boot, tc).statuses[0][0].status == dmir::Status::Eio);
  }
  SECTION("unknown path returns ENOENT") {
    TestCase tc;
    tc.threads.push_back({write_call("/sys/scsi/disk0/nope", "x")});
    CHECK(run_case(boot, tc).statuses[0][0].status == dmir::Status::Enoent);
  }
  SECTION("module params assign without store logic") {
    TestCase tc;
    tc.threads.push_back({write_call("/sys/module/sd_mod/parameters/cache_mode", "write_through")});
    CaseRunner r(boot, tc);
    auto res = r.run();
    CHECK(res.statuses[0][0].status == dmir::Status::Ok);
    CHECK(r.state().params[0].s == "write_through");
  }
}

TEST_CASE("open_dev wildcard expansion") {
  auto prog = dmir::parse(testutil::read_corpus("loopdev.dmir"));
  BootedKernel boot(prog);

  SECTION("wildcard picks deterministically under a fixed seed") {
    TestCase tc;
    tc.schedule_seed = 7;
    tc.threads.push_back({open_call("/dev/loop#", 1)});
    auto r1 = run_case(boot, tc);
    auto r2 = run_case(boot, tc);
    CHECK(r1.statuses[0][0].status == dmir::Status::Ok);
    CHECK(r1.trace == r2.trace);
  }
  SECTION("exact path") {
    TestCase tc;
    tc.threads.push_back({open_call("/dev/loop0", 1)});
    CHECK(run_case(boot, tc).statuses[0][0].status == dmir::Status::Ok);
  }
  SECTION("no match") {
    TestCase tc;
    tc.threads.push_back({open_call("/dev/nosuch", 1)});
    CHECK(run_case(boot, tc).statuses[0][0].status == dmir::Status::Enoent);
  }
}

TEST_CASE("param-gated edges stay unexecuted at defaults") {
  auto prog = dmir::parse(testutil::read_corpus("gated_bugs.dmir"));
  BootedKernel boot(prog);
  TestCase tc;
  tc.threads.push_back({open_call("/dev/gisa0", 1), op_call(1, "create_vcpu")});
  auto res = run_case(boot, tc);
  CHECK(!res.verdict.has_value());
  // only the false edge of the use_gisa guard is covered
  CHECK(res.coverage.count() == 1);
}

TEST_CASE("gated bugs fire when parameters are set") {
  auto prog = dmir::parse(testutil::read_corpus("gated_bugs.dmir"));
  BootedKernel boot(prog);

  SECTION("NPD behind a module param") {
    TestCase tc;
    tc.threads.push_back({write_call("/sys/module/kvm_gisa/parameters/use_gisa", "1"),
                          open_call("/dev/gisa0", 1), op_call(1, "create_vcpu")});
    auto res = run_case(boot, tc);
    REQUIRE(res.verdict.has_value());
    CHECK(res.verdict->type == BugType::NPD);
    CHECK(res.verdict->title.substr(0, 9) == "NPD/gisa/");
  }
  SECTION("DIV0 behind an attribute") {
    TestCase tc;
    tc.threads.push_back({write_call("/sys/virt/wq0/pool_count", "0"), open_call("/dev/wq0", 1),
                          op_call(1, "rebalance", {64})});
    auto res = run_case(boot, tc);
    REQUIRE(res.verdict.has_value());
    CHECK(res.verdict->type == BugType::DIV0);
  }
  SECTION("DOUBLE_FREE behind a module param") {
    TestCase tc;
    tc.threads.push_back({write_call("/sys/module/wq/parameters/node_scaling", "1"),
                          open_call("/dev/wq0", 1), op_call(1, "recycle")});
    auto res = run_case(boot, tc);
    REQUIRE(res.verdict.has_value());
    CHECK(res.verdict->type == BugType::DOUBLE_FREE);
  }
  SECTION("no param flip, no bug") {
    TestCase tc;
    tc.threads.push_back({open_call("/dev/wq0", 1), op_call(1, "rebalance", {64}),
                          op_call(1, "recycle")});
    CHECK(!run_case(boot, tc).verdict.has_value());
  }
}

TEST_CASE("blktrace race: both outcomes exist across seeds") {
  auto prog = dmir::parse(testutil::read_corpus("blktrace_uaf.dmir"));
  BootedKernel boot(prog);

  bool saw_uaf = false, saw_clean = false;
  uint64_t uaf_seed = 0;
  for (uint64_t seed = 0; seed < 3000 && !(saw_uaf && saw_clean); seed++) {
    auto res = run_case(boot, blktrace_race_case(seed));
    if (res.verdict) {
      REQUIRE(res.verdict->type == BugType::UAF);
      REQUIRE(res.verdict->title.substr(0, 24) == "UAF/blktrace/ioctl_note/");
      saw_uaf = true;
      uaf_seed = seed;
    } else {
      saw_clean = true;
    }
  }
  CHECK(saw_uaf);
  CHECK(saw_clean);

  SECTION("exhaustive enumeration agrees") {
    auto verdicts = enumerate_interleavings(boot, blktrace_race_case(0));
    REQUIRE(verdicts.count("") == 1);
    bool has_uaf = false;
    for (const auto& v : verdicts)
      if (v.rfind("UAF/blktrace/", 0) == 0) has_uaf = true;
    CHECK(has_uaf);
    CHECK(verdicts.size() == 2);
  }
  SECTION("single thread never triggers") {
    TestCase tc = blktrace_race_case(1);
    TestCase merged;
    merged.schedule_seed = 1;
    merged.threads.push_back(tc.threads[0]);
    auto verdicts = enumerate_interleavings(boot, merged);
    CHECK(verdicts == std::set<std::string>{""});
  }
}

TEST_CASE("hub disconnect race: NPD only with the concurrent interleaving") {
  auto prog = dmir::parse(testutil::read_corpus("hub_disconnect_npd.dmir"));
  BootedKernel boot(prog);
  auto verdicts = enumerate_interleavings(boot, hub_race_case(0));
  REQUIRE(verdicts.count("") == 1);
  bool has_npd = false;
  for (const auto& v : verdicts)
    if (v.rfind("NPD/usb_port/disable/", 0) == 0) has_npd = true;
  CHECK(has_npd);
  CHECK(verdicts.size() == 2);
}

TEST_CASE("lock inversion deadlocks only under contention") {
  auto prog = dmir::parse(testutil::read_corpus("deadlock_ab.dmir"));
  BootedKernel boot(prog);
  auto verdicts = enumerate_interleavings(boot, deadlock_case(0));
  REQUIRE(verdicts.count("") == 1);
  bool has_dl = false;
  for (const auto& v : verdicts)
    if (v.rfind("DEADLOCK/mux_ctl/sweep/", 0) == 0) has_dl = true;
  CHECK(has_dl);
  CHECK(verdicts.size() == 2);
}

TEST_CASE("benign scenario is clean over full enumeration") {
  auto prog = dmir::parse(testutil::read_corpus("benign_locked.dmir"));
  BootedKernel boot(prog);
  TestCase tc;
  tc.threads.push_back({open_call("/dev/safe0", 1), write_call("/sys/sata/safe0/ready", "1"),
                        op_call(1, "touch")});
  tc.threads.push_back({write_call("/sys/sata/safe0/ready", "0")});
  auto verdicts = enumerate_interleavings(boot, tc);
  CHECK(verdicts == std::set<std::string>{""});
}

TEST_CASE("replay determinism") {
  auto prog = dmir::parse(testutil::read_corpus("blktrace_uaf.dmir"));
  BootedKernel boot(prog);

  SECTION("same seed, same everything") {
    for (uint64_t seed : {1ull, 17ull, 99ull}) {
      auto a = run_case(boot, blktrace_race_case(seed));
      auto b = run_case(boot, blktrace_race_case(seed));
      CHECK(a.trace == b.trace);
      CHECK(a.coverage.ids() == b.coverage.ids());
      CHECK(a.verdict.has_value() == b.verdict.has_value());
    }
  }
  SECTION("recorded trace replays identically") {
    auto a = run_case(boot, blktrace_race_case(5));
    auto b = run_case(boot, blktrace_race_case(5), &a.trace);
    CHECK(a.coverage.ids() == b.coverage.ids());
    CHECK(a.verdict.has_value() == b.verdict.has_value());
    if (a.verdict) CHECK(a.verdict->title == b.verdict->title);
    for (size_t t = 0; t < a.statuses.size(); t++)
      for (size_t c = 0; c < a.statuses[t].size(); c++) {
        CHECK(a.statuses[t][c].executed == b.statuses[t][c].executed);
        CHECK(a.statuses[t][c].status == b.statuses[t][c].status);
      }
  }
}

TEST_CASE("reset isolation: case order does not matter") {
  auto prog = dmir::parse(testutil::read_corpus("gated_bugs.dmir"));
  BootedKernel boot(prog);
  TestCase flip;
  flip.threads.push_back({write_call("/sys/module/kvm_gisa/parameters/use_gisa", "1")});
  TestCase probe;
  probe.threads.push_back({open_call("/dev/gisa0", 1), op_call(1, "create_vcpu")});

  // probe alone is clean
  CHECK(!run_case(boot, probe).verdict.has_value());
  // flip, then probe: still clean, because every case starts from reset state
  run_case(boot, flip);
  CHECK(!run_case(boot, probe).verdict.has_value());
}

TEST_CASE("coverage soundness") {
  auto prog = dmir::parse(testutil::read_corpus("impact_demo.dmir"));
  BootedKernel boot(prog);
  auto all = dmir::all_edges(prog);

  TestCase tc;
  tc.threads.push_back({open_call("/dev/eng0", 1), op_call(1, "throttle", {50}),
                        op_call(1, "status", {1})});
  auto res = run_case(boot, tc);
  for (int e : res.coverage.ids()) {
    CHECK(std::binary_search(all.begin(), all.end(), e));
  }

  // A straight-line op body contributes no conditional edges.
  auto prog2 = dmir::parse(R"(
module m { driver d { devnode;
  field a: uint = 0;
  op plain() { self.a = self.a + 1; }
} }
bus b;
device d0: driver=d, parent=b, devnode="d0";
)");
  BootedKernel boot2(prog2);
  TestCase tc2;
  tc2.threads.push_back({open_call("/dev/d0", 1), op_call(1, "plain")});
  CHECK(run_case(boot2, tc2).coverage.count() == 0);
}

TEST_CASE("seeded scheduler verdict set matches enumeration on scenarios") {
  // Desk-scale version of the 10k-seed agreement check (the full version
  // lives in the acceptance suite).
  auto prog = dmir::parse(testutil::read_corpus("hub_disconnect_npd.dmir"));
  BootedKernel boot(prog);
  auto enumerated = enumerate_interleavings(boot, hub_race_case(0));
  std::set<std::string> seeded;
  for (uint64_t seed = 0; seed < 500; seed++) {
    auto res = run_case(boot, hub_race_case(seed));
    seeded.insert(res.verdict ? res.verdict->title : "");
  }
  for (const auto& v : seeded) CHECK(enumerated.count(v) == 1);
}
