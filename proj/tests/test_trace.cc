#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "m3dsim/error.hh"
#include "m3dsim/trace.hh"

using namespace m3dsim;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("m3dsim_test_" + name)).string();
}

WorkloadProfile profile(WorkloadClass c, std::int64_t n) {
  WorkloadProfile p;
  p.workload_class = c;
  p.instruction_count = n;
  return p;
}

}  // namespace

TEST_SUITE("trace") {
  TEST_CASE("streaming over 1 MiB touches every line once") {
    auto p = profile(WorkloadClass::streaming, 131072);
    p.working_set_bytes = 1 << 20;
    p.memory_op_fraction = 1.0;
    auto t = generate(p);
    REQUIRE(t.size() == 1);
    auto s = measure(t[0]);
    CHECK(s.footprint_lines == 16384);
    CHECK(s.kind_counts[static_cast<std::size_t>(OpKind::load)] == 131072);
  }

  TEST_CASE("length, thread ids and determinism for every class") {
    for (int k = 0; k < 7; ++k) {
      auto c = static_cast<WorkloadClass>(k);
      auto p = profile(c, 3001);
      p.threads = 3;
      p.branch_fraction = 0.1;
      p.mispredictable_branch_fraction = 0.3;
      if (c == WorkloadClass::sync_heavy) p.sync_ops_per_thread = 20;
      INFO(to_string(c));
      auto a = generate(p);
      REQUIRE(a.size() == 3);
      for (int t = 0; t < 3; ++t) {
        CHECK(a[static_cast<std::size_t>(t)].size() == 3001);
        for (const auto& op : a[static_cast<std::size_t>(t)]) {
          CHECK(op.thread_id == t);
          CHECK_NOTHROW(check_op(op));
        }
        auto s = measure(a[static_cast<std::size_t>(t)]);
        std::int64_t sum = 0;
        for (auto n : s.kind_counts) sum += n;
        CHECK(sum == s.instruction_count);
      }
      CHECK(generate(p) == a);
      p.seed = 2;
      if (c != WorkloadClass::compute_loop) CHECK(generate(p) != a);
    }
  }

  TEST_CASE("profile validation") {
    auto p = profile(WorkloadClass::streaming, 100);
    p.working_set_bytes = 16;
    CHECK_THROWS_AS(generate(p), ConfigError);
    p = profile(WorkloadClass::streaming, 100);
    p.memory_op_fraction = 1.5;
    CHECK_THROWS_AS(generate(p), ConfigError);
    p = profile(WorkloadClass::streaming, 0);
    CHECK_THROWS_AS(generate(p), ConfigError);
    p = profile(WorkloadClass::streaming, 100);
    p.threads = 0;
    CHECK_THROWS_AS(generate(p), ConfigError);
  }

  TEST_CASE("ILP of independent ops and of a chain") {
    Trace ind, ch;
    for (int i = 0; i < 40; ++i) {
      MicroOp op;
      op.dst = static_cast<std::uint8_t>(i);
      ind.push_back(op);
      op.dst = 1;
      op.src[0] = 1;
      ch.push_back(op);
    }
    CHECK(measure(ind).ilp == doctest::Approx(40.0));
    CHECK(measure(ch).ilp == doctest::Approx(1.0));
    CHECK(measure(ch).critical_path == 40);
    CHECK_THROWS_AS(measure(Trace{}), DomainError);
  }

  TEST_CASE("compute_loop ILP near the dense-kernel target") {
    auto p = profile(WorkloadClass::compute_loop, 20000);
    p.working_set_bytes = 64 << 10;
    p.memory_op_fraction = 0.3;
    p.fp_fraction = 0.3;
    auto s = measure(generate(p)[0]);
    CHECK(s.ilp == doctest::Approx(2.55).epsilon(0.5 / 2.55));
  }

  TEST_CASE("write and read round-trip") {
    auto p = profile(WorkloadClass::branchy, 5000);
    p.branch_fraction = 0.2;
    p.mispredictable_branch_fraction = 0.3;
    p.threads = 2;
    auto merged = merge_threads(generate(p));
    for (const std::string ext : {".trace", ".trace.gz"}) {
      auto path = temp_path("rt" + ext);
      write_trace(merged, path);
      CHECK(read_trace(path) == merged);
      CHECK(split_by_thread(read_trace(path)) == generate(p));
      std::filesystem::remove(path);
    }
    auto sp = profile(WorkloadClass::sync_heavy, 2000);
    sp.threads = 2;
    sp.sync_ops_per_thread = 10;
    auto sync = merge_threads(generate(sp));
    auto path = temp_path("sync.trace");
    write_trace(sync, path);
    CHECK(read_trace(path) == sync);
    write_trace(Trace{}, path);
    CHECK(read_trace(path).empty());
    std::filesystem::remove(path);
  }

  TEST_CASE("a million ops round-trip") {
    auto p = profile(WorkloadClass::random_access, 1000000);
    auto t = generate(p)[0];
    auto path = temp_path("big.trace.gz");
    write_trace(t, path);
    CHECK(read_trace(path) == t);
    std::filesystem::remove(path);
  }

  TEST_CASE("unknown kind names the line") {
    auto path = temp_path("bad.trace");
    {
      std::ofstream f(path);
      f << "#m3dsim-trace v1\n";
      f << "0\tint_alu\t1\t-\t-\t-\t-\t-\t-\t-\t-\t-\n";
      f << "0\tvector\t1\t-\t-\t-\t-\t-\t-\t-\t-\t-\n";
    }
    try {
      read_trace(path);
      FAIL("expected TraceError");
    } catch (const TraceError& e) {
      std::string msg = e.what();
      CHECK(msg.find("line 3") != std::string::npos);
      CHECK(msg.find("vector") != std::string::npos);
    }
    CHECK_THROWS_AS(read_trace(temp_path("missing.trace")), TraceError);
    std::filesystem::remove(path);
  }

  TEST_CASE("check_op") {
    MicroOp op;
    op.kind = OpKind::load;
    CHECK_THROWS_AS(check_op(op), TraceError);
    op.mem_addr = 64;
    op.mem_bytes = 8;
    CHECK_NOTHROW(check_op(op));
    op.kind = OpKind::branch;
    CHECK_THROWS_AS(check_op(op), TraceError);
    op.kind = OpKind::sync;
    CHECK_THROWS_AS(check_op(op), TraceError);
  }

  TEST_CASE("thread address ranges are disjoint") {
    auto p = profile(WorkloadClass::random_access, 5000);
    p.threads = 4;
    p.working_set_bytes = 1 << 22;
    auto t = generate(p);
    for (int a = 0; a < 4; ++a)
      for (const auto& op : t[static_cast<std::size_t>(a)])
        if (op.mem_addr) {
          CHECK(*op.mem_addr >= thread_base(a));
          CHECK(*op.mem_addr < thread_base(a + 1));
        }
  }
}
