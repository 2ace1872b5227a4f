#include <cmath>
#include <set>

#include "doctest.h"
#include "m3dsim/dse.hh"
#include "m3dsim/error.hh"

using namespace m3dsim;
using nlohmann::json;

namespace {

Manifest small(const std::string& name) {
  Manifest m;
  m.experiment = name;
  m.core_counts = std::vector<int>{1, 4};
  m.ops_per_thread = 1500;
  return m;
}

void check_slots(const ResultTable& t) {
  for (const auto& r : t.rows) {
    if (!r.ok()) continue;
    const auto& b = r.breakdown;
    CHECK(b.retiring + b.frontend + b.bad_speculation + b.backend_core + b.backend_mem_latency +
              b.backend_mem_bandwidth ==
          doctest::Approx(100.0).epsilon(1e-6));
  }
}

}  // namespace

TEST_SUITE("dse") {
  TEST_CASE("experiment catalogue") {
    std::set<std::string> names(experiment_names().begin(), experiment_names().end());
    CHECK(names.size() == experiment_names().size());
    for (const auto& n : experiment_names()) {
      auto e = experiment(n);
      INFO(n);
      CHECK(e.name == n);
      CHECK_FALSE(e.points.empty());
      CHECK_FALSE(e.variants.empty());
      if (!e.baseline_point.empty())
        CHECK(std::any_of(e.points.begin(), e.points.end(), [&](const AxisPoint& p) { return p.label == e.baseline_point; }));
      if (!e.baseline_variant.empty())
        CHECK(std::any_of(e.variants.begin(), e.variants.end(), [&](const Variant& v) { return v.name == e.baseline_variant; }));
    }
    CHECK_THROWS_AS(experiment("cache_colour"), ConfigError);
  }

  TEST_CASE("named axes") {
    auto depth = experiment("cache_depth");
    REQUIRE(depth.points.size() == 2);
    CHECK(depth.points[0].label == "w/L2");
    CHECK(depth.points[1].label == "noL2");
    CHECK_FALSE(depth.points[1].apply(preset("m3d")).l2.present);

    auto sweep = experiment("latency_sweep");
    CHECK(sweep.points.front().value == 0.5);
    CHECK(sweep.points.back().value == 13.0);
    CHECK(sweep.points.size() == 6);
    CHECK(sweep.core_counts == std::vector<int>{1, 16, 64, 128});

    auto e2e = experiment("revamp_e2e");
    CHECK(e2e.baseline_variant == "m3d");
    bool has_revamp = false;
    for (const auto& v : e2e.variants) {
      if (v.name == "m3d") CHECK(v.preset == "m3d");
      if (v.preset == "m3d_revamp") has_revamp = true;
    }
    CHECK(has_revamp);
  }

  TEST_CASE("suite") {
    CHECK(suite_workloads().size() == 8);
    CHECK(suite_ops_per_thread(1) == 16000);
    CHECK(suite_ops_per_thread(16) == 4000);
    CHECK(suite_ops_per_thread(128) == 2000);
    for (const auto& w : suite_workloads()) {
      auto t = suite_traces(w, 3, 1, 500);
      REQUIRE(t.size() == 3);
      for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t[i].size() == 500);
        for (const auto& op : t[i]) CHECK(op.thread_id == static_cast<int>(i));
      }
    }
    CHECK_THROWS(suite_traces("matmul", 1, 1, 100));
  }

  TEST_CASE("baseline speedup is one, and runs are deterministic") {
    auto m = small("cache_depth");
    m.workloads = std::vector<std::string>{"pointer_chase", "compute_loop", "mix"};
    auto a = run_experiment(m);
    CHECK(a.rows.size() == 3 * 2 * 2 * 2);
    for (const auto& r : a.rows) {
      REQUIRE(r.ok());
      if (r.axis_label == "w/L2") CHECK(r.speedup == 1.0);
      CHECK(r.speedup > 0.0);
    }
    check_slots(a);
    m.jobs = 3;
    auto b = run_experiment(m);
    CHECK(to_csv(a) == to_csv(b));
  }

  TEST_CASE("identity speedup") {
    auto m = small("frontend");
    m.workloads = std::vector<std::string>{"streaming", "mix"};
    auto t = run_experiment(m);
    speedup(t, "base", "");
    for (const auto& r : t.rows)
      if (r.axis_label == "base") CHECK(r.speedup == doctest::Approx(1.0));
    // Against itself every row is 1.
    speedup(t, "", "");
    for (const auto& r : t.rows) CHECK(r.speedup == doctest::Approx(1.0));
  }

  TEST_CASE("fewer cycles means speedup above one") {
    ResultTable t;
    ResultRow base, fast;
    base.workload = fast.workload = "x";
    base.cores = fast.cores = 1;
    base.axis_label = "a";
    fast.axis_label = "b";
    base.variant = fast.variant = "v";
    base.cycles = 1000;
    fast.cycles = 800;
    t.rows = {base, fast};
    speedup(t, "a", "");
    CHECK(t.rows[1].speedup == doctest::Approx(1.25));
    t.rows[0].status = "error: boom";
    CHECK_THROWS_AS(speedup(t, "a", ""), DomainError);
  }

  TEST_CASE("mix speedup is the geometric mean of program ratios") {
    ResultTable t;
    ResultRow base, var;
    base.workload = var.workload = "mix";
    base.cores = var.cores = 2;
    base.axis_label = var.axis_label = "-";
    base.variant = "a";
    var.variant = "b";
    base.cycles = 400;
    var.cycles = 400;
    base.program_cycles = {100, 400};
    var.program_cycles = {50, 400};
    t.rows = {base, var};
    speedup(t, "", "a");
    CHECK(t.rows[1].speedup == doctest::Approx(std::sqrt(2.0)));
  }

  TEST_CASE("iso-power") {
    CHECK(iso_power_scale(10.0, 10.0) == 1.0);
    CHECK(iso_power_scale(10.0, 5.0) == 1.0);
    CHECK(iso_power_scale(1.0, 1.274) == doctest::Approx(0.785).epsilon(0.001));
    CHECK_THROWS_AS(iso_power_scale(0.0, 1.0), DomainError);
    ResultRow r;
    r.seconds = 2.0;
    r.breakdown.backend_mem_latency = 50.0;
    CHECK(iso_power_seconds(r, 0.5) == doctest::Approx(3.0));
    CHECK(iso_power_seconds(r, 1.0) == doctest::Approx(2.0));

    auto m = small("revamp_e2e");
    m.workloads = std::vector<std::string>{"streaming", "compute_loop"};
    auto t = run_experiment(m);
    const double f = iso_power_point(t, "m3d", "m3d");
    CHECK(f == doctest::Approx(1.0));
    const double g = iso_power_point(t, "m3d", t.rows.back().variant);
    CHECK(g > 0.0);
    CHECK(g <= 1.0);
  }

  TEST_CASE("overrides") {
    auto m = small("cache_depth");
    m.workloads = std::vector<std::string>{"streaming"};
    m.overrides = json{{"l2", {{"present", false}}}};
    CHECK_THROWS_AS(run_experiment(m), ConfigError);
    m.overrides = json{{"preset", "2d"}};
    CHECK_THROWS_AS(run_experiment(m), ConfigError);
    m.overrides = json{{"core", {{"rob_entries", 64}}}};
    auto t = run_experiment(m);
    CHECK(t.provenance["configs"]["m3d"]["w/L2"]["core"]["rob_entries"] == 64);
    m.overrides = json{{"core", {{"rob_entries", 1}}}};
    CHECK_THROWS_AS(run_experiment(m), ConfigError);
  }

  TEST_CASE("manifest validation") {
    CHECK_THROWS_AS(manifest_from_json(json{{"experiment", "width"}, {"colour", 1}}), ConfigError);
    CHECK_THROWS_AS(manifest_from_json(json{{"workloads", {"streaming"}}}), ConfigError);
    CHECK_THROWS_AS(manifest_from_json(json{{"experiment", "width"}, {"seeds", json::array()}}), ConfigError);
    CHECK_THROWS_AS(manifest_from_json(json{{"experiment", "width"}, {"jobs", 0}}), ConfigError);
    auto m = manifest_from_json(json{{"experiment", "latency_sweep"}, {"axis", {1, 13}}, {"seeds", {3, 4}}});
    CHECK(*m.axis == std::vector<std::string>{"1", "13"});
    CHECK(m.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(manifest_from_json(to_json(m)).seeds == m.seeds);

    auto bad = small("width");
    bad.workloads = std::vector<std::string>{"matmul"};
    CHECK_THROWS_AS(run_experiment(bad), ConfigError);
    bad = small("latency_sweep");
    bad.axis = std::vector<std::string>{"3"};
    CHECK_THROWS_AS(run_experiment(bad), ConfigError);
    bad = small("cache_depth");
    bad.axis = std::vector<std::string>{"noL2"};
    CHECK_THROWS_AS(run_experiment(bad), ConfigError);
    CHECK_THROWS_AS(run_experiment(Manifest{.experiment = "nope"}), ConfigError);
  }

  TEST_CASE("latency sweep subset is monotone") {
    auto m = small("latency_sweep");
    m.workloads = std::vector<std::string>{"streaming", "pointer_chase", "sync_heavy"};
    auto t = run_experiment(m);
    CHECK(t.rows.size() == 3 * 2 * 6 * 2);
    for (const auto& r : t.rows)
      for (const auto& q : t.rows)
        if (r.workload == q.workload && r.cores == q.cores && r.variant == q.variant && q.axis_value > r.axis_value)
          CHECK(q.cycles >= r.cycles);
  }

  TEST_CASE("sync experiment runs the primitives") {
    auto m = small("sync");
    m.core_counts = std::vector<int>{4};
    auto t = run_experiment(m);
    std::set<std::string> w;
    for (const auto& r : t.rows) {
      CHECK(r.ok());
      w.insert(r.workload);
    }
    CHECK(w == std::set<std::string>{"tas_lock", "ticket_lock", "barrier", "atomic_counter"});
  }

  TEST_CASE("outputs") {
    auto m = small("memo");
    m.workloads = std::vector<std::string>{"compute_loop", "random_access"};
    auto t = run_experiment(m);
    auto csv = to_csv(t);
    const auto header = csv.substr(0, csv.find('\n'));
    CHECK(header.find("amat") != std::string::npos);
    CHECK(header.find("lfmr") != std::string::npos);
    CHECK(header.find("gated_fraction") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(t.rows.size()) + 1);

    auto back = table_from_json(to_json(t));
    CHECK(to_csv(back) == csv);
    CHECK(back.provenance == t.provenance);
    CHECK(t.provenance.contains("seeds"));
    CHECK(t.provenance.contains("configs"));
    CHECK_THROWS_AS(table_from_json(json{{"rows", 3}}), ConfigError);

    auto svg = speedup_svg(t);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<metadata>") != std::string::npos);
    auto text = report(t);
    CHECK(text.find("compute_loop") != std::string::npos);
  }

  TEST_CASE("seeds change traces, not structure") {
    auto m = small("branch");
    m.workloads = std::vector<std::string>{"branchy"};
    m.seeds = {1, 2};
    auto t = run_experiment(m);
    CHECK(t.rows.size() == 2 * 3 * 2 * experiment("branch").variants.size());
    auto a = t.find("branchy", 1, "two_level_gas", t.rows[0].variant, 1);
    auto b = t.find("branchy", 1, "two_level_gas", t.rows[0].variant, 2);
    REQUIRE(a != nullptr);
    REQUIRE(b != nullptr);
    CHECK(a->cycles != b->cycles);
  }
}
