#include <random>

#include "doctest.h"
#include "m3dsim/predictor.hh"

using namespace m3dsim;

namespace {

MicroOp branch(bool taken, bool predictable = true) {
  MicroOp op;
  op.kind = OpKind::branch;
  op.branch_taken = taken;
  op.branch_predictable = predictable;
  return op;
}

}  // namespace

TEST_SUITE("predictor") {
  TEST_CASE("perfect mode is always right") {
    BranchPredictor p(PredictorKind::perfect, 1);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) CHECK_FALSE(p.mispredicts(branch(rng() & 1, rng() & 1)));
  }

  TEST_CASE("always-taken loop branch is learned") {
    for (auto kind : {PredictorKind::two_level_gas, PredictorKind::tage_lite}) {
      BranchPredictor p(kind, 1);
      for (int i = 0; i < 100; ++i) p.mispredicts(branch(true));
      for (int i = 0; i < 100; ++i) CHECK(p.predict(branch(true)));
    }
  }

  TEST_CASE("periodic pattern is learned through history") {
    for (auto kind : {PredictorKind::two_level_gas, PredictorKind::tage_lite}) {
      BranchPredictor p(kind, 1);
      int misses = 0;
      for (int i = 0; i < 4000; ++i) {
        const bool m = p.mispredicts(branch(i % 4 != 3));
        if (i >= 2000) misses += m;
      }
      CHECK(misses == 0);
    }
  }

  TEST_CASE("flagged branches miss about half the time") {
    for (auto kind : {PredictorKind::two_level_gas, PredictorKind::tage_lite}) {
      BranchPredictor p(kind, 9);
      std::mt19937_64 rng(2);
      int misses = 0;
      for (int i = 0; i < 20000; ++i) misses += p.mispredicts(branch(rng() & 1, false));
      CHECK(misses > 9000);
      CHECK(misses < 11000);
    }
  }

  TEST_CASE("static taken") {
    BranchPredictor p(PredictorKind::static_taken, 1);
    CHECK_FALSE(p.mispredicts(branch(true)));
    CHECK(p.mispredicts(branch(false)));
  }

  TEST_CASE("deterministic per seed") {
    auto run = [](std::uint64_t seed) {
      BranchPredictor p(PredictorKind::tage_lite, seed);
      std::mt19937_64 rng(3);
      std::vector<bool> out;
      for (int i = 0; i < 2000; ++i) out.push_back(p.mispredicts(branch(rng() & 1, rng() % 3 != 0)));
      return out;
    };
    CHECK(run(4) == run(4));
  }
}
