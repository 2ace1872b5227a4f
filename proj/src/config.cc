#include "m3dsim/config.hh"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "m3dsim/error.hh"

namespace m3dsim {

using nlohmann::json;

namespace {

CacheLevelConfig l1_default() {
  return CacheLevelConfig{.present = true,
                          .shared = false,
                          .size_bytes = 32 * 1024,
                          .associativity = 8,
                          .latency_cycles = 4,
                          .energy_hit_pJ = 15.0,
                          .energy_miss_pJ = 33.0,
                          .line_bytes = 64};
}

CacheLevelConfig l2_default(bool shared) {
  return CacheLevelConfig{.present = true,
                          .shared = shared,
                          .size_bytes = 256 * 1024,
                          .associativity = 8,
                          .latency_cycles = 12,
                          .energy_hit_pJ = 46.0,
                          .energy_miss_pJ = 93.0,
                          .line_bytes = 64};
}

CacheLevelConfig absent_level() {
  CacheLevelConfig c = l2_default(true);
  c.present = false;
  return c;
}

SystemConfig m3d_base() {
  SystemConfig c;
  c.preset = "m3d";
  c.l1 = l1_default();
  c.l2 = l2_default(true);
  c.l3 = absent_level();
  c.memory = MemoryConfig{5.0, 13.0, 16000.0, 0.8, 0.11, MemoryTechnology::m3d_rram};
  c.core.epi_core_nJ = 0.48;
  return c;
}

[[noreturn]] void fail(const std::string& field, const std::string& constraint) {
  throw ConfigError("invalid config: " + field + " violates '" + constraint + "'");
}

void validate_level(const CacheLevelConfig& c, const std::string& name) {
  if (!c.present) return;
  if (c.line_bytes <= 0 || !std::has_single_bit(static_cast<unsigned>(c.line_bytes)))
    fail(name + ".line_bytes", "power of two > 0");
  if (c.associativity < 1) fail(name + ".associativity", "associativity >= 1");
  if (c.latency_cycles < 1) fail(name + ".latency_cycles", "latency >= 1");
  const std::int64_t way_bytes = static_cast<std::int64_t>(c.line_bytes) * c.associativity;
  if (c.size_bytes <= 0 || c.size_bytes % way_bytes != 0 ||
      !std::has_single_bit(static_cast<std::uint64_t>(c.size_bytes / way_bytes)))
    fail(name + ".size_bytes", "power-of-two multiple of line_bytes x associativity");
  if (c.energy_hit_pJ < 0 || c.energy_miss_pJ < 0) fail(name + ".energy", "energies >= 0");
}

}  // namespace

int SystemConfig::hop_cycles() const {
  if (noc_hop_cycles) return *noc_hop_cycles;
  int hops = 0;
  while ((1 << hops) < core.cores) ++hops;
  return hops;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"m3d", "3d", "2d", "m3d_noL2", "m3d_revamp",
                                              "m3d_sttmram"};
  return names;
}

SystemConfig widen_pipeline(SystemConfig c, bool double_queues) {
  c.core.width *= 2;
  c.core.int_alus *= 2;
  c.core.fpus *= 2;
  c.core.complex_alus *= 2;
  if (double_queues) {
    c.core.rob_entries *= 2;
    c.core.lq_entries *= 2;
    c.core.sq_entries *= 2;
  }
  return c;
}

SystemConfig preset(std::string_view name) {
  SystemConfig c = m3d_base();
  if (name == "m3d") return c;
  if (name == "m3d_noL2") {
    c.preset = "m3d_noL2";
    c.l2.present = false;
    return c;
  }
  if (name == "m3d_revamp") {
    c = widen_pipeline(c, true);
    c.preset = "m3d_revamp";
    c.l2.present = false;
    // M3D L1 layout: 41% latency reduction.
    c.l1.latency_cycles = static_cast<int>(std::ceil(4 * 0.59));
    c.features.memoization = true;
    c.features.rf_sync = true;
    return c;
  }
  if (name == "m3d_sttmram") {
    c.preset = "m3d_sttmram";
    c.memory.read_latency_ns /= 2;
    c.memory.write_latency_ns /= 2;
    c.memory.technology = MemoryTechnology::m3d_sttmram;
    return c;
  }
  if (name == "3d") {
    c.preset = "3d";
    c.memory = MemoryConfig{51.0, 55.0, 1500.0, 9.0, 9.0, MemoryTechnology::tsv3d_hbm};
    c.core.epi_core_nJ = 1.5;
    return c;
  }
  if (name == "2d") {
    c.preset = "2d";
    c.memory = MemoryConfig{65.0, 60.0, 102.0, 20.0, 20.0, MemoryTechnology::ddr4};
    c.l2 = l2_default(false);
    c.l3 = CacheLevelConfig{.present = true,
                            .shared = true,
                            .size_bytes = 8 * 1024 * 1024,
                            .associativity = 16,
                            .latency_cycles = 27,
                            .energy_hit_pJ = 945.0,
                            .energy_miss_pJ = 1904.0,
                            .line_bytes = 64};
    c.core.epi_core_nJ = 1.5;
    return c;
  }
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + std::string(name) + "'; valid presets: " + valid);
}

void validate(const SystemConfig& c) {
  const auto& k = c.core;
  if (k.cores < 1) fail("core.cores", "cores >= 1");
  if (k.frequency_GHz <= 0) fail("core.frequency_GHz", "frequency > 0");
  if (k.width < 1) fail("core.width", "width >= 1");
  if (k.rob_entries < k.width) fail("core.rob_entries", "rob >= width");
  if (k.lq_entries < 1) fail("core.lq_entries", "lq_entries >= 1");
  if (k.sq_entries < 1) fail("core.sq_entries", "sq_entries >= 1");
  if (k.int_alus < 1) fail("core.int_alus", "unit counts >= 1");
  if (k.fpus < 1) fail("core.fpus", "unit counts >= 1");
  if (k.complex_alus < 1) fail("core.complex_alus", "unit counts >= 1");
  if (k.frontend_depth_cycles < 0) fail("core.frontend_depth_cycles", "depth >= 0");
  if (k.dispatch_depth_cycles < 0) fail("core.dispatch_depth_cycles", "depth >= 0");
  if (k.frontend_depth_cycles + k.dispatch_depth_cycles < 1)
    fail("core.frontend_depth_cycles", "frontend + dispatch depth >= 1");
  if (k.epi_core_nJ < 0) fail("core.epi_core_nJ", "energy >= 0");
  if (k.frontend_energy_fraction < 0 || k.frontend_energy_fraction > 1)
    fail("core.frontend_energy_fraction", "0 <= frontend_energy_fraction <= 1");
  if (k.int_latency < 1 || k.fp_latency < 1 || k.complex_latency < 1)
    fail("core.*_latency", "execution latency >= 1");

  if (!c.l1.present) fail("l1.present", "L1 always present");
  validate_level(c.l1, "l1");
  validate_level(c.l2, "l2");
  validate_level(c.l3, "l3");
  if (c.l3.present && !c.l2.present) fail("l3.present", "if l3.present then l2.present");
  if (c.l2.present && c.l2.line_bytes != c.l1.line_bytes)
    fail("l2.line_bytes", "uniform line size");
  if (c.l3.present && c.l3.line_bytes != c.l1.line_bytes)
    fail("l3.line_bytes", "uniform line size");

  const auto& m = c.memory;
  if (m.read_latency_ns <= 0) fail("memory.read_latency_ns", "latency > 0");
  if (m.write_latency_ns <= 0) fail("memory.write_latency_ns", "latency > 0");
  if (m.bandwidth_GBps <= 0) fail("memory.bandwidth_GBps", "bandwidth > 0");
  if (m.energy_read_pJ_per_bit < 0) fail("memory.energy_read_pJ_per_bit", "energy >= 0");
  if (m.energy_write_pJ_per_bit < 0) fail("memory.energy_write_pJ_per_bit", "energy >= 0");

  if (c.noc_hop_cycles && *c.noc_hop_cycles < 0) fail("noc_hop_cycles", "hops >= 0");
  if (!(c.features.mem_latency_multiplier > 0))
    fail("features.mem_latency_multiplier", "multiplier > 0");

  if (c.memo.uop_record_bytes < 1) fail("memo.uop_record_bytes", "record size >= 1");
  if (c.memo.buffer_bytes < c.memo.uop_record_bytes)
    fail("memo.buffer_bytes", "buffer >= one record");
  if (c.memo.renaming_penalty < 0 || c.memo.renaming_penalty >= 1)
    fail("memo.renaming_penalty", "0 <= penalty < 1");
  if (c.memo.prefetch_degree < 1) fail("memo.prefetch_degree", "prefetch_degree >= 1");
  if (c.memo.ports < 1) fail("memo.ports", "ports >= 1");
  if (c.sync.rf_slots < 1) fail("sync.rf_slots", "rf_slots >= 1");
}

DerivedTiming derive_cycles(const SystemConfig& c) {
  const double scale = c.core.frequency_GHz * c.features.mem_latency_multiplier;
  // Round away float noise (5 * 4 * 0.5 must stay 10, not 11).
  auto to_cycles = [scale](double ns) {
    const double x = ns * scale;
    return static_cast<std::int64_t>(std::ceil(x - 1e-9));
  };
  return DerivedTiming{to_cycles(c.memory.read_latency_ns), to_cycles(c.memory.write_latency_ns),
                       c.memory.bandwidth_GBps / c.core.frequency_GHz};
}

SystemConfig with_cores(SystemConfig c, int cores) {
  c.core.cores = cores;
  return c;
}

// --- string forms ----------------------------------------------------------

std::string to_string(MemoryTechnology t) {
  switch (t) {
    case MemoryTechnology::m3d_rram: return "m3d_rram";
    case MemoryTechnology::tsv3d_hbm: return "tsv3d_hbm";
    case MemoryTechnology::ddr4: return "ddr4";
    case MemoryTechnology::m3d_sttmram: return "m3d_sttmram";
  }
  return "?";
}

std::string to_string(PredictorKind p) {
  switch (p) {
    case PredictorKind::two_level_gas: return "two_level_gas";
    case PredictorKind::tage_lite: return "tage_lite";
    case PredictorKind::perfect: return "perfect";
    case PredictorKind::static_taken: return "static_taken";
  }
  return "?";
}

PredictorKind parse_predictor(std::string_view s) {
  for (auto p : {PredictorKind::two_level_gas, PredictorKind::tage_lite, PredictorKind::perfect,
                 PredictorKind::static_taken})
    if (to_string(p) == s) return p;
  throw ConfigError("invalid config: core.predictor violates 'one of two_level_gas, tage_lite, "
                    "perfect, static_taken' (got '" + std::string(s) + "')");
}

namespace {

MemoryTechnology parse_technology(std::string_view s) {
  for (auto t : {MemoryTechnology::m3d_rram, MemoryTechnology::tsv3d_hbm, MemoryTechnology::ddr4,
                 MemoryTechnology::m3d_sttmram})
    if (to_string(t) == s) return t;
  throw ConfigError("invalid config: memory.technology_label violates 'one of m3d_rram, "
                    "tsv3d_hbm, ddr4, m3d_sttmram' (got '" + std::string(s) + "')");
}

// Field-by-field JSON binding. Each reader rejects keys it does not know.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("invalid config: " + path_ + " must be an object");
    for (auto it = j_.begin(); it != j_.end(); ++it) pending_.push_back(it.key());
  }

  template <typename T>
  void read(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    std::erase(pending_, std::string(key));
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
        out = it->template get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        out = it->template get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
        out = it->template get<T>();
      } else {
        if (!it->is_string()) throw ConfigError("");
        out = it->template get<T>();
      }
    } catch (const std::exception&) {
      throw ConfigError("invalid config: " + path_ + "." + key + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    std::erase(pending_, std::string(key));
    return &*it;
  }

  void finish() const {
    if (!pending_.empty())
      throw ConfigError("invalid config: unknown key '" + path_ + "." + pending_.front() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> pending_;
};

void read_level(const json& j, const std::string& name, CacheLevelConfig& c) {
  ObjectReader r(j, name);
  r.read("present", c.present);
  r.read("shared", c.shared);
  r.read("size_bytes", c.size_bytes);
  r.read("associativity", c.associativity);
  r.read("latency_cycles", c.latency_cycles);
  r.read("energy_hit_pJ", c.energy_hit_pJ);
  r.read("energy_miss_pJ", c.energy_miss_pJ);
  r.read("line_bytes", c.line_bytes);
  r.finish();
}

json level_json(const CacheLevelConfig& c) {
  return json{{"present", c.present},
              {"shared", c.shared},
              {"size_bytes", c.size_bytes},
              {"associativity", c.associativity},
              {"latency_cycles", c.latency_cycles},
              {"energy_hit_pJ", c.energy_hit_pJ},
              {"energy_miss_pJ", c.energy_miss_pJ},
              {"line_bytes", c.line_bytes}};
}

}  // namespace

json to_json(const SystemConfig& c) {
  const auto& k = c.core;
  json j;
  j["preset"] = c.preset;
  j["core"] = json{{"cores", k.cores},
                   {"frequency_GHz", k.frequency_GHz},
                   {"width", k.width},
                   {"rob_entries", k.rob_entries},
                   {"lq_entries", k.lq_entries},
                   {"sq_entries", k.sq_entries},
                   {"int_alus", k.int_alus},
                   {"fpus", k.fpus},
                   {"complex_alus", k.complex_alus},
                   {"frontend_depth_cycles", k.frontend_depth_cycles},
                   {"dispatch_depth_cycles", k.dispatch_depth_cycles},
                   {"predictor", to_string(k.predictor)},
                   {"epi_core_nJ", k.epi_core_nJ},
                   {"frontend_energy_fraction", k.frontend_energy_fraction},
                   {"int_latency", k.int_latency},
                   {"fp_latency", k.fp_latency},
                   {"complex_latency", k.complex_latency}};
  j["l1"] = level_json(c.l1);
  j["l2"] = level_json(c.l2);
  j["l3"] = level_json(c.l3);
  j["memory"] = json{{"read_latency_ns", c.memory.read_latency_ns},
                     {"write_latency_ns", c.memory.write_latency_ns},
                     {"bandwidth_GBps", c.memory.bandwidth_GBps},
                     {"energy_read_pJ_per_bit", c.memory.energy_read_pJ_per_bit},
                     {"energy_write_pJ_per_bit", c.memory.energy_write_pJ_per_bit},
                     {"technology_label", to_string(c.memory.technology)}};
  j["noc_hop_cycles"] = c.noc_hop_cycles ? json(*c.noc_hop_cycles) : json("auto");
  const auto& f = c.features;
  j["features"] = json{{"memoization", f.memoization},
                       {"rf_sync", f.rf_sync},
                       {"ideal_frontend", f.ideal_frontend},
                       {"shallow_pipeline", f.shallow_pipeline},
                       {"perfect_memory", f.perfect_memory},
                       {"uops_one_cycle", f.uops_one_cycle},
                       {"mem_latency_multiplier", f.mem_latency_multiplier}};
  j["memo"] = json{{"buffer_bytes", c.memo.buffer_bytes},
                   {"uop_record_bytes", c.memo.uop_record_bytes},
                   {"prefetch_degree", c.memo.prefetch_degree},
                   {"renaming_penalty", c.memo.renaming_penalty},
                   {"ports", c.memo.ports},
                   {"buffer_access_nJ", c.memo.buffer_access_nJ}};
  j["sync"] = json{{"rf_slots", c.sync.rf_slots}, {"strict", c.sync.strict}};
  return j;
}

SystemConfig config_from_json(const json& doc) {
  if (doc.is_null()) return preset("m3d");
  ObjectReader top(doc, "config");
  std::string base = "m3d";
  top.read("preset", base);
  SystemConfig c = preset(base);

  if (const json* j = top.child("core")) {
    auto& k = c.core;
    ObjectReader r(*j, "core");
    r.read("cores", k.cores);
    r.read("frequency_GHz", k.frequency_GHz);
    r.read("width", k.width);
    r.read("rob_entries", k.rob_entries);
    r.read("lq_entries", k.lq_entries);
    r.read("sq_entries", k.sq_entries);
    r.read("int_alus", k.int_alus);
    r.read("fpus", k.fpus);
    r.read("complex_alus", k.complex_alus);
    r.read("frontend_depth_cycles", k.frontend_depth_cycles);
    r.read("dispatch_depth_cycles", k.dispatch_depth_cycles);
    std::string pred;
    r.read("predictor", pred);
    if (!pred.empty()) k.predictor = parse_predictor(pred);
    r.read("epi_core_nJ", k.epi_core_nJ);
    r.read("frontend_energy_fraction", k.frontend_energy_fraction);
    r.read("int_latency", k.int_latency);
    r.read("fp_latency", k.fp_latency);
    r.read("complex_latency", k.complex_latency);
    r.finish();
  }
  if (const json* j = top.child("l1")) read_level(*j, "l1", c.l1);
  if (const json* j = top.child("l2")) read_level(*j, "l2", c.l2);
  if (const json* j = top.child("l3")) read_level(*j, "l3", c.l3);
  if (const json* j = top.child("memory")) {
    ObjectReader r(*j, "memory");
    r.read("read_latency_ns", c.memory.read_latency_ns);
    r.read("write_latency_ns", c.memory.write_latency_ns);
    r.read("bandwidth_GBps", c.memory.bandwidth_GBps);
    r.read("energy_read_pJ_per_bit", c.memory.energy_read_pJ_per_bit);
    r.read("energy_write_pJ_per_bit", c.memory.energy_write_pJ_per_bit);
    std::string tech;
    r.read("technology_label", tech);
    if (!tech.empty()) c.memory.technology = parse_technology(tech);
    r.finish();
  }
  if (const json* j = top.child("noc_hop_cycles")) {
    if (j->is_string() && j->get<std::string>() == "auto")
      c.noc_hop_cycles.reset();
    else if (j->is_number_integer())
      c.noc_hop_cycles = j->get<int>();
    else
      throw ConfigError("invalid config: config.noc_hop_cycles must be an integer or \"auto\"");
  }
  if (const json* j = top.child("features")) {
    auto& f = c.features;
    ObjectReader r(*j, "features");
    r.read("memoization", f.memoization);
    r.read("rf_sync", f.rf_sync);
    r.read("ideal_frontend", f.ideal_frontend);
    r.read("shallow_pipeline", f.shallow_pipeline);
    r.read("perfect_memory", f.perfect_memory);
    r.read("uops_one_cycle", f.uops_one_cycle);
    r.read("mem_latency_multiplier", f.mem_latency_multiplier);
    r.finish();
  }
  if (const json* j = top.child("memo")) {
    ObjectReader r(*j, "memo");
    r.read("buffer_bytes", c.memo.buffer_bytes);
    r.read("uop_record_bytes", c.memo.uop_record_bytes);
    r.read("prefetch_degree", c.memo.prefetch_degree);
    r.read("renaming_penalty", c.memo.renaming_penalty);
    r.read("ports", c.memo.ports);
    r.read("buffer_access_nJ", c.memo.buffer_access_nJ);
    r.finish();
  }
  if (const json* j = top.child("sync")) {
    ObjectReader r(*j, "sync");
    r.read("rf_slots", c.sync.rf_slots);
    r.read("strict", c.sync.strict);
    r.finish();
  }
  top.finish();
  validate(c);
  return c;
}

SystemConfig load_config(std::string_view text) {
  std::string_view trimmed = text;
  while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.front())))
    trimmed.remove_prefix(1);
  if (trimmed.empty()) return preset("m3d");
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config document: ") + e.what());
  }
  return config_from_json(doc);
}

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

std::string serialize(const SystemConfig& c) { return to_json(c).dump(2); }

}  // namespace m3dsim
