#include <random>

#include "doctest.h"
#include "m3dsim/config.hh"
#include "m3dsim/error.hh"

using namespace m3dsim;

namespace {

std::string config_error(const std::string& text) {
  try {
    load_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("preset m3d") {
    auto c = preset("m3d");
    CHECK(c.memory.read_latency_ns == 5.0);
    CHECK(c.memory.write_latency_ns == 13.0);
    CHECK(c.memory.bandwidth_GBps == 16000.0);
    CHECK(c.memory.energy_read_pJ_per_bit == 0.8);
    CHECK(c.memory.energy_write_pJ_per_bit == 0.11);
    CHECK(c.l2.present);
    CHECK(c.l2.shared);
    CHECK(c.l2.size_bytes == 256 * 1024);
    CHECK(c.l2.associativity == 8);
    CHECK(c.l2.latency_cycles == 12);
    CHECK(c.l2.energy_hit_pJ == 46.0);
    CHECK(c.l2.energy_miss_pJ == 93.0);
    CHECK_FALSE(c.l3.present);
    CHECK(c.l1.size_bytes == 32 * 1024);
    CHECK(c.l1.associativity == 8);
    CHECK(c.l1.latency_cycles == 4);
    CHECK(c.l1.energy_hit_pJ == 15.0);
    CHECK(c.l1.energy_miss_pJ == 33.0);
    CHECK(c.core.frequency_GHz == 4.0);
    CHECK(c.core.width == 4);
    CHECK(c.core.rob_entries == 128);
    CHECK(c.core.lq_entries == 32);
    CHECK(c.core.sq_entries == 32);
    CHECK(c.core.epi_core_nJ == 0.48);
    CHECK(c.core.predictor == PredictorKind::two_level_gas);
  }

  TEST_CASE("preset 3d and 2d") {
    auto t = preset("3d");
    CHECK(t.memory.read_latency_ns == 51.0);
    CHECK(t.memory.write_latency_ns == 55.0);
    CHECK(t.memory.bandwidth_GBps == 1500.0);
    CHECK(t.memory.energy_read_pJ_per_bit == 9.0);
    CHECK(t.l2.shared);
    CHECK_FALSE(t.l3.present);
    CHECK(t.core.epi_core_nJ == 1.5);

    auto d = preset("2d");
    CHECK(d.memory.read_latency_ns == 65.0);
    CHECK(d.memory.write_latency_ns == 60.0);
    CHECK(d.memory.bandwidth_GBps == 102.0);
    CHECK(d.memory.energy_read_pJ_per_bit == 20.0);
    CHECK(d.memory.energy_write_pJ_per_bit == 20.0);
    CHECK_FALSE(d.l2.shared);
    CHECK(d.l3.present);
    CHECK(d.l3.shared);
    CHECK(d.l3.size_bytes == 8 * 1024 * 1024);
    CHECK(d.l3.associativity == 16);
    CHECK(d.l3.latency_cycles == 27);
    CHECK(d.l3.energy_hit_pJ == 945.0);
    CHECK(d.l3.energy_miss_pJ == 1904.0);
    CHECK(d.core.epi_core_nJ == 1.5);
  }

  TEST_CASE("derived presets") {
    CHECK_FALSE(preset("m3d_noL2").l2.present);
    auto r = preset("m3d_revamp");
    CHECK(r.l1.latency_cycles == 3);
    CHECK(r.core.width == 8);
    CHECK(r.core.rob_entries == 256);
    CHECK(r.core.lq_entries == 64);
    CHECK_FALSE(r.l2.present);
    CHECK(r.features.memoization);
    CHECK(r.features.rf_sync);
    auto s = preset("m3d_sttmram");
    CHECK(s.memory.read_latency_ns == 2.5);
    CHECK(s.memory.write_latency_ns == 6.5);
    CHECK(s.memory.bandwidth_GBps == 16000.0);
  }

  TEST_CASE("every preset validates and names itself") {
    for (const auto& n : preset_names()) {
      auto c = preset(n);
      CHECK_NOTHROW(validate(c));
      CHECK(c.preset == n);
    }
  }

  TEST_CASE("unknown preset lists the valid names") {
    try {
      preset("4d");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      for (const auto& n : preset_names()) CHECK(msg.find(n) != std::string::npos);
    }
  }

  TEST_CASE("derive_cycles") {
    auto t = derive_cycles(preset("m3d"));
    CHECK(t.read_latency_cycles == 20);
    CHECK(t.write_latency_cycles == 52);
    CHECK(t.bytes_per_cycle == doctest::Approx(4000.0));
    auto d = derive_cycles(preset("2d"));
    CHECK(d.read_latency_cycles == 260);
    CHECK(d.bytes_per_cycle == doctest::Approx(25.5));
    auto half = preset("m3d");
    half.features.mem_latency_multiplier = 0.5;
    CHECK(derive_cycles(half).read_latency_cycles == 10);
  }

  TEST_CASE("derive_cycles is monotone in the multiplier") {
    for (const char* name : {"m3d", "3d", "2d", "m3d_sttmram"}) {
      auto c = preset(name);
      std::int64_t prev_r = 0, prev_w = 0;
      for (double m = 0.1; m < 20; m *= 1.37) {
        c.features.mem_latency_multiplier = m;
        auto t = derive_cycles(c);
        CHECK(t.read_latency_cycles >= prev_r);
        CHECK(t.write_latency_cycles >= prev_w);
        prev_r = t.read_latency_cycles;
        prev_w = t.write_latency_cycles;
      }
    }
  }

  TEST_CASE("load_config") {
    CHECK(load_config("{}") == preset("m3d"));
    CHECK(load_config("") == preset("m3d"));
    CHECK(load_config(R"({"core": {"width": 8}})").core.width == 8);
    auto two = load_config(R"({"preset": "2d", "l3": {"latency_cycles": 30}})");
    CHECK(two.memory.bandwidth_GBps == 102.0);
    CHECK(two.l3.latency_cycles == 30);

    auto msg = config_error(R"({"core": {"rob_entries": 2, "width": 4}})");
    CHECK(msg.find("rob_entries") != std::string::npos);
    CHECK(msg.find("rob >= width") != std::string::npos);
    CHECK(config_error(R"({"cores": 4})").find("cores") != std::string::npos);
    CHECK(config_error(R"({"core": {"wdth": 4}})").find("wdth") != std::string::npos);
    CHECK(config_error(R"({"core": {"width": "four"}})") != "");
    CHECK(config_error("{not json") != "");
    CHECK(config_error(R"({"preset": "2d", "l2": {"present": false}})").find("l3.present") != std::string::npos);
    CHECK(config_error(R"({"l1": {"present": false}})").find("l1.present") != std::string::npos);
    CHECK(config_error(R"({"l1": {"size_bytes": 3000}})").find("l1.size_bytes") != std::string::npos);
    CHECK(config_error(R"({"features": {"mem_latency_multiplier": 0}})") != "");
    CHECK(config_error(R"({"memory": {"bandwidth_GBps": -1}})") != "");
    CHECK(config_error(R"({"core": {"frontend_energy_fraction": 1.5}})") != "");
  }

  TEST_CASE("serialize round-trips") {
    for (const auto& n : preset_names()) CHECK(load_config(serialize(preset(n))) == preset(n));
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
      auto c = preset(preset_names()[rng() % preset_names().size()]);
      c.core.cores = 1 + static_cast<int>(rng() % 128);
      c.core.width = 1 + static_cast<int>(rng() % 8);
      c.core.rob_entries = c.core.width + static_cast<int>(rng() % 200);
      c.features.mem_latency_multiplier = 0.25 + static_cast<double>(rng() % 1000) / 37.0;
      c.features.shallow_pipeline = rng() % 2;
      if (rng() % 2) c.noc_hop_cycles = static_cast<int>(rng() % 5);
      c.memory.read_latency_ns = 1.0 + static_cast<double>(rng() % 10000) / 7.0;
      c.core.predictor = static_cast<PredictorKind>(rng() % 4);
      REQUIRE_NOTHROW(validate(c));
      CHECK(load_config(serialize(c)) == c);
    }
  }

  TEST_CASE("hop cycles default to ceil(log2(cores))") {
    auto c = preset("m3d");
    CHECK(c.hop_cycles() == 0);
    CHECK(with_cores(c, 16).hop_cycles() == 4);
    CHECK(with_cores(c, 64).hop_cycles() == 6);
    CHECK(with_cores(c, 100).hop_cycles() == 7);
    c.noc_hop_cycles = 2;
    CHECK(with_cores(c, 64).hop_cycles() == 2);
  }
}
