#include <random>

#include "doctest.h"
#include "m3dsim/error.hh"
#include "m3dsim/memhier.hh"
#include "m3dsim/trace.hh"
#include "support.hh"

using namespace m3dsim;
using m3dsim::testing::checked_simulate;

namespace {

SimResult run(WorkloadClass c, SystemConfig config, int threads, std::int64_t ws, double stores = 0.3) {
  WorkloadProfile p;
  p.workload_class = c;
  p.instruction_count = 4000;
  p.working_set_bytes = ws;
  p.memory_op_fraction = 0.4;
  p.store_fraction = stores;
  p.threads = threads;
  return checked_simulate(generate(p), with_cores(config, threads));
}

void check_conservation(const MemHierStats& s) {
  for (const auto* level : {&s.l1, &s.l2, &s.l3}) {
    CHECK(level->demand_read.hits + level->demand_read.misses == level->demand_read.accesses);
    CHECK(level->demand_write.hits + level->demand_write.misses == level->demand_write.accesses);
    CHECK(level->writeback_in.hits + level->writeback_in.misses == level->writeback_in.accesses);
  }
  if (s.l2_present) {
    CHECK(s.l2.accesses() == s.l1.misses() + s.l1.writebacks_out);
    if (s.l3_present) CHECK(s.l3.accesses() == s.l2.misses() + s.l2.writebacks_out);
  }
  CHECK(s.demand_latency_cycles >= s.demand_accesses * 1);
}

}  // namespace

TEST_SUITE("memhier") {
  TEST_CASE("cold and warm load latencies") {
    MemoryHierarchy m3d(preset("m3d"));
    auto cold = m3d.access(0, 0x10000, AccessKind::read, 100);
    CHECK(cold.completion_cycle - cold.issue_cycle == 36);
    CHECK(cold.served_by == ServedBy::memory);
    auto warm = m3d.access(0, 0x10008, AccessKind::read, 200);
    CHECK(warm.completion_cycle - warm.issue_cycle == 4);
    CHECK(warm.served_by == ServedBy::l1);

    MemoryHierarchy nol2(preset("m3d_noL2"));
    auto r = nol2.access(0, 0x10000, AccessKind::read, 0);
    CHECK(r.completion_cycle - r.issue_cycle == 24);
  }

  TEST_CASE("amat") {
    MemoryHierarchy h(preset("m3d"));
    h.access(0, 0x10000, AccessKind::read, 0);
    CHECK(amat(h.stats()) == doctest::Approx(36.0));
    MemHierStats s;
    CHECK_THROWS_AS(amat(s), DomainError);
    s.demand_accesses = 1000;
    s.demand_latency_cycles = 1000 * 4 + 500 * 20;
    CHECK(amat(s) == doctest::Approx(14.0));
  }

  TEST_CASE("lfmr") {
    MemHierStats s;
    s.l2_present = true;
    CHECK_THROWS_WITH_AS(lfmr(s), doctest::Contains("LFMR undefined"), DomainError);
    s.l1.demand_read.misses = 100;
    s.l2.demand_read.misses = 99;
    CHECK(lfmr(s) == doctest::Approx(0.99));
    s.l2.demand_read.misses = 51;
    CHECK(lfmr(s) == doctest::Approx(0.51));
    s.l2_present = false;
    CHECK(lfmr(s) == 1.0);
  }

  TEST_CASE("bandwidth bucket") {
    BandwidthBucket m3d(4000.0, 64);
    CHECK(m3d.consume(64, 0) == 0);
    BandwidthBucket two(25.5, 64);
    std::int64_t last = 0;
    for (int i = 0; i < 100; ++i) last = two.consume(64, 0);
    CHECK(last >= 248);
    CHECK(last <= 251);
    // Drains at the configured rate afterwards.
    CHECK(two.consume(64, last + 400) == 0);

    auto c = preset("2d");
    c.features.perfect_memory = true;
    MemoryHierarchy h(c);
    for (int i = 0; i < 100; ++i) CHECK(h.bandwidth_delay(64, 0) == 0);
  }

  TEST_CASE("line straddling access is rejected") {
    MemoryHierarchy h(preset("m3d"));
    CHECK_THROWS_AS(h.access(0, 60, AccessKind::read, 0, 8), DomainError);
    CHECK_NOTHROW(h.access(0, 56, AccessKind::read, 0, 8));
  }

  TEST_CASE("completion never precedes the L1 latency") {
    std::mt19937_64 rng(5);
    for (const char* name : {"m3d", "3d", "2d", "m3d_noL2"}) {
      auto c = with_cores(preset(name), 4);
      MemoryHierarchy h(c);
      for (int i = 0; i < 5000; ++i) {
        const int t = static_cast<int>(rng() % 4);
        const auto addr = (rng() % 4096) * 64;
        const auto kind = rng() % 3 == 0 ? AccessKind::write : AccessKind::read;
        auto r = h.access(t, addr, kind, i / 2);
        CHECK(r.completion_cycle >= r.issue_cycle + c.l1.latency_cycles);
      }
      check_conservation(h.stats());
    }
  }

  TEST_CASE("per-level conservation in simulations") {
    for (const char* name : {"m3d", "3d", "2d", "m3d_noL2"})
      for (auto c : {WorkloadClass::streaming, WorkloadClass::random_access, WorkloadClass::pointer_chase}) {
        INFO(name << " " << to_string(c));
        check_conservation(run(c, preset(name), 4, 1 << 22).memory);
      }
  }

  TEST_CASE("a larger L2 never hits less") {
    WorkloadProfile p;
    p.workload_class = WorkloadClass::random_access;
    p.instruction_count = 20000;
    p.working_set_bytes = 1 << 20;
    p.memory_op_fraction = 0.5;
    auto trace = generate(p)[0];
    std::int64_t prev = -1;
    for (std::int64_t kb : {64, 128, 256, 512, 1024, 2048}) {
      auto c = preset("m3d");
      c.l2.size_bytes = kb * 1024;
      MemoryHierarchy h(c);
      std::int64_t cycle = 0;
      for (const auto& op : trace)
        if (op.mem_addr) h.access(0, *op.mem_addr, op.kind == OpKind::store ? AccessKind::write : AccessKind::read, cycle++);
      const auto hits = h.stats().l2.hits();
      CHECK(hits >= prev);
      prev = hits;
    }
  }

  TEST_CASE("AMAT is non-decreasing in the latency multiplier") {
    double prev = 0;
    for (double m : {0.5, 1.0, 2.0, 4.0, 8.0, 13.0}) {
      auto c = preset("3d");
      c.features.mem_latency_multiplier = m;
      const double a = amat(run(WorkloadClass::random_access, c, 1, 1 << 24).memory);
      CHECK(a >= prev);
      prev = a;
    }
  }

  TEST_CASE("noL2 lowers AMAT when LFMR is high") {
    auto with = run(WorkloadClass::pointer_chase, preset("m3d"), 1, 1LL << 28, 0);
    auto without = run(WorkloadClass::pointer_chase, preset("m3d_noL2"), 1, 1LL << 28, 0);
    const double ratio = 12.0 / static_cast<double>(derive_cycles(preset("m3d")).read_latency_cycles);
    REQUIRE(lfmr(with.memory) >= ratio);
    CHECK(amat(without.memory) < amat(with.memory));
  }

  TEST_CASE("remote writes invalidate sharers") {
    auto c = with_cores(preset("m3d"), 2);
    MemoryHierarchy h(c);
    h.access(0, 0x8000, AccessKind::read, 0);
    h.access(1, 0x8000, AccessKind::write, 100);
    CHECK(h.stats().invalidations >= 1);
    auto again = h.access(0, 0x8000, AccessKind::read, 200);
    CHECK(again.served_by != ServedBy::l1);
  }
}
