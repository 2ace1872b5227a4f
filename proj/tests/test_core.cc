#include <random>

#include "doctest.h"
#include "m3dsim/core.hh"
#include "m3dsim/error.hh"
#include "oracle.hh"
#include "support.hh"

using namespace m3dsim;
using m3dsim::testing::checked_simulate;

namespace {

Trace independent(int n, OpKind kind = OpKind::int_alu) {
  Trace t;
  for (int i = 0; i < n; ++i) {
    MicroOp op;
    op.kind = kind;
    op.dst = static_cast<std::uint8_t>(i % kNumRegisters);
    t.push_back(op);
  }
  return t;
}

Trace chain(int n) {
  Trace t;
  for (int i = 0; i < n; ++i) {
    MicroOp op;
    op.dst = 1;
    op.src[0] = 1;
    t.push_back(op);
  }
  return t;
}

SystemConfig perfect() {
  auto c = preset("m3d");
  c.features.perfect_memory = true;
  return c;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("frontend delay") {
    auto c = preset("m3d");
    CHECK(frontend_delay(c) == 12);
    c.features.shallow_pipeline = true;
    CHECK(frontend_delay(c) == 9);
    c.features.ideal_frontend = true;
    CHECK(frontend_delay(c) == 1);
  }

  TEST_CASE("hand-computed schedules") {
    // Width 4, fetch at cycle 0, dispatchable at 12, one cycle to execute,
    // retire one cycle later at 4 per cycle.
    CHECK(checked_simulate(independent(400), perfect()).cycles == 112);
    CHECK(checked_simulate(chain(50), perfect()).cycles == 62);
    CHECK(checked_simulate(independent(8), perfect()).cycles == 14);
  }

  TEST_CASE("oracle agrees on random traces") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
      auto k = m3dsim::testing::random_oracle_case(rng);
      INFO("case " << i);
      CHECK(checked_simulate(k.trace, k.config).cycles == m3dsim::testing::oracle_cycles(k.trace, k.config));
    }
  }

  TEST_CASE("load queue of one serializes loads to a line") {
    auto c = perfect();
    c.core.lq_entries = 1;
    Trace t;
    for (int i = 0; i < 2; ++i) {
      MicroOp op;
      op.kind = OpKind::load;
      op.dst = static_cast<std::uint8_t>(i);
      op.mem_addr = 0x4000;
      op.mem_bytes = 8;
      t.push_back(op);
    }
    auto one = checked_simulate(t, c).cycles;
    c.core.lq_entries = 2;
    CHECK(one > checked_simulate(t, c).cycles);
    CHECK(one == m3dsim::testing::oracle_cycles(t, [&] { auto d = c; d.core.lq_entries = 1; return d; }()));
  }

  TEST_CASE("fast-forward does not change results") {
    for (auto cls : {WorkloadClass::pointer_chase, WorkloadClass::branchy, WorkloadClass::sync_heavy,
                     WorkloadClass::compute_loop})
      for (bool memo : {false, true}) {
        WorkloadProfile p;
        p.workload_class = cls;
        p.instruction_count = 3000;
        p.working_set_bytes = 1 << 24;
        p.branch_fraction = 0.2;
        p.mispredictable_branch_fraction = 0.4;
        p.sync_ops_per_thread = cls == WorkloadClass::sync_heavy ? 30 : 0;
        p.threads = 4;
        auto c = with_cores(preset("2d"), 4);
        c.features.memoization = memo;
        auto traces = generate(p);
        SimOptions slow;
        slow.fast_forward = false;
        auto a = checked_simulate(traces, c);
        auto b = checked_simulate(traces, c, slow);
        INFO(to_string(cls) << " memo " << memo);
        CHECK(a.cycles == b.cycles);
        CHECK(a.slots == b.slots);
        CHECK(a.memo.prefetch_stall_cycles == b.memo.prefetch_stall_cycles);
        CHECK(a.sync.sync_stall_cycles == b.sync.sync_stall_cycles);
        for (std::size_t i = 0; i < a.per_core.size(); ++i) {
          CHECK(a.per_core[i].finish_cycle == b.per_core[i].finish_cycle);
          CHECK(a.per_core[i].slots == b.per_core[i].slots);
        }
      }
  }

  TEST_CASE("perfect predictor leaves no bad speculation") {
    WorkloadProfile p;
    p.workload_class = WorkloadClass::branchy;
    p.instruction_count = 5000;
    p.branch_fraction = 0.2;
    p.mispredictable_branch_fraction = 0.5;
    auto c = preset("m3d");
    auto gas = checked_simulate(generate(p), c);
    CHECK(gas.slots[Slot::bad_speculation] > 0);
    CHECK(gas.branches.mispredicted > 0);
    c.core.predictor = PredictorKind::perfect;
    auto r = checked_simulate(generate(p), c);
    CHECK(r.slots[Slot::bad_speculation] == 0);
    CHECK(r.branches.mispredicted == 0);
    CHECK(r.cycles <= gas.cycles);
  }

  TEST_CASE("retired count and finish cycles") {
    WorkloadProfile p;
    p.instruction_count = 2000;
    p.threads = 3;
    auto r = checked_simulate(generate(p), with_cores(preset("m3d"), 4));
    CHECK(r.cores == 3);
    CHECK(r.retired() == 6000);
    std::int64_t last = 0;
    for (const auto& c : r.per_core) {
      CHECK(c.retired == 2000);
      last = std::max(last, c.finish_cycle);
    }
    CHECK(r.cycles == last);
  }

  TEST_CASE("wider pipeline never hurts independent work") {
    auto c = perfect();
    auto base = checked_simulate(independent(2000), c).cycles;
    auto wide = checked_simulate(independent(2000), widen_pipeline(c, true)).cycles;
    CHECK(wide < base);
  }

  TEST_CASE("errors") {
    WorkloadProfile p;
    p.instruction_count = 100;
    p.threads = 2;
    CHECK_THROWS_AS(simulate(generate(p), preset("m3d")), ConfigError);
    CHECK_THROWS_AS(simulate({Trace{}}, preset("m3d")), TraceError);
    MicroOp bad;
    bad.kind = OpKind::load;
    CHECK_THROWS_AS(simulate({Trace{bad}}, preset("m3d")), TraceError);
  }
}
