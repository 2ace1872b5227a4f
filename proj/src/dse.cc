#include "m3dsim/dse.hh"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "m3dsim/error.hh"
#include "m3dsim/memhier.hh"

namespace m3dsim {

using nlohmann::json;

// --- workload suite ----------------------------------------------------------------

const std::vector<std::string>& suite_workloads() {
  static const std::vector<std::string> names{"streaming",    "strided", "pointer_chase",
                                              "random_access", "compute_loop", "branchy",
                                              "sync_heavy",   "mix"};
  return names;
}

std::int64_t suite_ops_per_thread(int cores) {
  return std::clamp<std::int64_t>(64000 / std::max(1, cores), 2000, 16000);
}

WorkloadProfile suite_profile(WorkloadClass c, int threads, std::uint64_t seed,
                              std::int64_t ops_per_thread) {
  WorkloadProfile p;
  p.workload_class = c;
  p.threads = threads;
  p.seed = seed;
  p.instruction_count = ops_per_thread;
  switch (c) {
    case WorkloadClass::streaming:
      p.working_set_bytes = 1 << 20;
      p.memory_op_fraction = 0.4;
      p.store_fraction = 0.5;
      break;
    case WorkloadClass::strided:
      p.working_set_bytes = 4 << 20;
      p.memory_op_fraction = 0.3;
      p.stride_bytes = 256;
      break;
    case WorkloadClass::pointer_chase:
      p.working_set_bytes = std::int64_t{1} << 30;
      p.memory_op_fraction = 0.3;
      break;
    case WorkloadClass::random_access:
      p.working_set_bytes = 64 << 20;
      p.memory_op_fraction = 0.3;
      p.store_fraction = 0.2;
      break;
    case WorkloadClass::compute_loop:
      p.working_set_bytes = 64 << 10;
      p.memory_op_fraction = 0.3;
      p.fp_fraction = 0.3;
      p.dependency_chain_length = 4;
      break;
    case WorkloadClass::branchy:
      p.working_set_bytes = 1 << 20;
      p.memory_op_fraction = 0.2;
      p.branch_fraction = 0.2;
      p.mispredictable_branch_fraction = 0.3;
      p.loop_body_length = 16;
      break;
    case WorkloadClass::sync_heavy:
      p.working_set_bytes = 1 << 20;
      p.memory_op_fraction = 0.3;
      // Barrier phases: arbitration order cannot change with timing, unlike
      // contended locks, which the sync experiment covers.
      p.sync_primitive = SyncPrimitive::barrier;
      p.sync_ops_per_thread = static_cast<int>(std::max<std::int64_t>(2, ops_per_thread / 100));
      break;
  }
  return p;
}

std::vector<Trace> suite_traces(const std::string& workload, int cores, std::uint64_t seed,
                                std::int64_t ops_per_thread) {
  if (workload != "mix")
    return generate(suite_profile(parse_workload_class(workload), cores, seed, ops_per_thread));
  static const WorkloadClass kMix[] = {WorkloadClass::streaming,     WorkloadClass::strided,
                                       WorkloadClass::pointer_chase, WorkloadClass::random_access,
                                       WorkloadClass::compute_loop,  WorkloadClass::branchy};
  std::vector<Trace> traces;
  traces.reserve(static_cast<std::size_t>(cores));
  for (int i = 0; i < cores; ++i) {
    const WorkloadClass c = kMix[static_cast<std::size_t>(i) % std::size(kMix)];
    Trace t = generate(suite_profile(c, 1, seed + static_cast<std::uint64_t>(i), ops_per_thread)).front();
    for (auto& op : t) {
      op.thread_id = i;
      if (op.mem_addr && *op.mem_addr < kSharedBase)
        op.mem_addr = *op.mem_addr - thread_base(0) + thread_base(i);
    }
    traces.push_back(std::move(t));
  }
  return traces;
}

// --- experiment presets ------------------------------------------------------------

namespace {

AxisPoint point(std::string label, double value, ConfigTransform f = {}) {
  return AxisPoint{std::move(label), value, std::move(f), std::nullopt};
}

Variant variant(const std::string& preset_name) { return Variant{preset_name, preset_name, {}}; }

std::vector<Variant> technologies() { return {variant("m3d"), variant("3d"), variant("2d")}; }

// Sets the shared L2 to a fixed total capacity regardless of core count.
ConfigTransform l2_total(std::int64_t bytes) {
  return [bytes](SystemConfig c) {
    c.l2.present = true;
    c.l2.size_bytes = c.l2.shared ? std::max<std::int64_t>(bytes / c.core.cores, 64 * c.l2.associativity)
                                  : bytes;
    return c;
  };
}

Experiment make(const std::string& name) {
  Experiment e;
  e.name = name;
  e.workloads = suite_workloads();
  if (name == "cache_depth") {
    e.description = "L2 removal";
    e.axis = "l2";
    e.axis_fields = {"/l2/present"};
    e.points = {point("w/L2", 1), point("noL2", 0, [](SystemConfig c) {
                  c.l2.present = false;
                  return c;
                })};
    // 2d keeps an L3 behind its private L2, so the study covers m3d and 3d.
    e.variants = {variant("m3d"), variant("3d")};
    e.baseline_point = "w/L2";
    e.representative = "pointer_chase";
  } else if (name == "cache_size") {
    e.description = "L2 capacity";
    e.axis = "l2_size";
    e.axis_fields = {"/l2/present", "/l2/size_bytes"};
    e.points = {point("256KB/core", 0),
                point("256KB", 256 << 10, l2_total(256 << 10)),
                point("1MB", 1 << 20, l2_total(1 << 20)),
                point("8MB", 8 << 20, l2_total(8 << 20)),
                point("64MB", 64 << 20, l2_total(64 << 20)),
                point("noL2", -1, [](SystemConfig c) {
                  c.l2.present = false;
                  return c;
                })};
    e.variants = {variant("m3d")};
    e.baseline_point = "256KB";
    e.representative = "compute_loop";
  } else if (name == "cache_latency") {
    e.description = "faster L1 / idealized L2";
    e.axis = "cache_latency";
    e.axis_fields = {"/l1/latency_cycles", "/l2/latency_cycles", "/l2/size_bytes"};
    e.points = {point("base", 0),
                point("L1fast", 1, [](SystemConfig c) {
                  c.l1.latency_cycles = std::max(1, c.l1.latency_cycles / 2);
                  return c;
                }),
                point("L2Opt", 2, [](SystemConfig c) {
                  c = l2_total(64 << 20)(std::move(c));
                  c.l2.latency_cycles = std::max(1, c.l2.latency_cycles / 2);
                  return c;
                })};
    e.variants = {variant("m3d")};
    e.baseline_point = "base";
    e.representative = "compute_loop";
  } else if (name == "width") {
    e.description = "pipeline width";
    e.axis = "width";
    e.axis_fields = {"/core/width", "/core/int_alus", "/core/fpus", "/core/complex_alus"};
    e.points = {point("4", 4), point("8", 8, [](SystemConfig c) { return widen_pipeline(std::move(c), false); })};
    e.variants = technologies();
    e.baseline_point = "4";
    e.representative = "streaming";
  } else if (name == "branch") {
    e.description = "branch predictor";
    e.axis = "predictor";
    e.axis_fields = {"/core/predictor"};
    for (auto [label, kind] : {std::pair{"two_level_gas", PredictorKind::two_level_gas},
                               std::pair{"tage_lite", PredictorKind::tage_lite},
                               std::pair{"perfect", PredictorKind::perfect}})
      e.points.push_back(point(label, static_cast<double>(kind), [kind](SystemConfig c) {
        c.core.predictor = kind;
        return c;
      }));
    e.variants = technologies();
    e.baseline_point = "two_level_gas";
    e.representative = "branchy";
  } else if (name == "frontend") {
    e.description = "ideal frontend";
    e.axis = "frontend";
    e.axis_fields = {"/features/ideal_frontend"};
    e.points = {point("base", 0), point("ideal_frontend", 1, [](SystemConfig c) {
                  c.features.ideal_frontend = true;
                  return c;
                })};
    e.variants = technologies();
    e.baseline_point = "base";
    e.representative = "branchy";
  } else if (name == "shallow") {
    e.description = "shallow dispatch";
    e.axis = "pipeline";
    e.axis_fields = {"/features/shallow_pipeline"};
    e.points = {point("base", 0), point("shallow", 1, [](SystemConfig c) {
                  c.features.shallow_pipeline = true;
                  return c;
                })};
    e.variants = technologies();
    e.baseline_point = "base";
    e.representative = "branchy";
  } else if (name == "queues") {
    e.description = "queue sizes on the wide pipeline";
    e.axis = "queues";
    e.axis_fields = {"/core/width",       "/core/int_alus",   "/core/fpus",
                     "/core/complex_alus", "/core/rob_entries", "/core/lq_entries",
                     "/core/sq_entries",  "/core/dispatch_depth_cycles"};
    e.points = {point("wide", 1, [](SystemConfig c) { return widen_pipeline(std::move(c), false); }),
                point("wide_2xq", 2, [](SystemConfig c) {
                  c = widen_pipeline(std::move(c), true);
                  c.core.dispatch_depth_cycles += 1;
                  return c;
                })};
    e.variants = {variant("m3d"), variant("3d")};
    e.baseline_point = "wide";
    e.representative = "random_access";
  } else if (name == "uop_latency") {
    e.description = "single-cycle µops";
    e.axis = "uop_latency";
    e.axis_fields = {"/features/uops_one_cycle"};
    e.points = {point("base", 0), point("one_cycle", 1, [](SystemConfig c) {
                  c.features.uops_one_cycle = true;
                  return c;
                })};
    e.variants = {variant("m3d")};
    e.baseline_point = "base";
    e.representative = "compute_loop";
  } else if (name == "sync") {
    e.description = "sync primitives by mode";
    e.axis = "sync_mode";
    e.axis_fields = {"/features/rf_sync"};
    for (auto m : {SyncMode::base, SyncMode::opt, SyncMode::rf}) {
      AxisPoint p = point(to_string(m), static_cast<double>(m));
      p.sync_mode = m;
      e.points.push_back(std::move(p));
    }
    e.variants = {variant("m3d")};
    e.workloads = {"tas_lock", "ticket_lock", "barrier", "atomic_counter"};
    e.sync_bench = true;
    e.baseline_point = "base";
    e.representative = "tas_lock";
  } else if (name == "memo") {
    e.description = "µop memoization";
    e.axis = "memoization";
    e.axis_fields = {"/features/memoization"};
    e.points = {point("off", 0), point("on", 1, [](SystemConfig c) {
                  c.features.memoization = true;
                  return c;
                })};
    e.variants = {variant("m3d")};
    e.baseline_point = "off";
    e.representative = "compute_loop";
  } else if (name == "revamp_e2e") {
    e.description = "end-to-end revamped M3D";
    e.axis = "system";
    e.points = {point("-", 0)};
    e.variants = {variant("m3d"), variant("m3d_revamp")};
    e.baseline_variant = "m3d";
    e.representative = "mix";
  } else if (name == "latency_sweep") {
    e.description = "main-memory latency sensitivity";
    e.axis = "mem_latency_multiplier";
    e.axis_fields = {"/features/mem_latency_multiplier"};
    for (double m : {0.5, 1.0, 2.0, 4.0, 8.0, 13.0}) {
      std::ostringstream label;
      label << m;
      e.points.push_back(point(label.str(), m, [m](SystemConfig c) {
        c.features.mem_latency_multiplier = m;
        return c;
      }));
    }
    e.variants = {variant("m3d"), variant("m3d_revamp")};
    e.baseline_variant = "m3d";
    e.representative = "mix";
  } else {
    std::string valid;
    for (const auto& n : experiment_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown experiment '" + name + "'; valid experiments: " + valid);
  }
  return e;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "cache_depth", "cache_size", "cache_latency", "width",  "branch",     "frontend",
      "shallow",     "queues",     "uop_latency",   "sync",   "memo",       "revamp_e2e",
      "latency_sweep"};
  return names;
}

Experiment experiment(const std::string& name) { return make(name); }

// --- manifest ------------------------------------------------------------------------

Manifest manifest_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("manifest must be an object");
  static const std::set<std::string> known{"experiment", "workloads", "core_counts", "axis", "seed",
                                           "seeds",      "ops_per_thread", "overrides", "jobs"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("manifest: unknown key '" + it.key() + "'");
  Manifest m;
  try {
    if (!doc.contains("experiment")) throw ConfigError("manifest: missing 'experiment'");
    m.experiment = doc.at("experiment").get<std::string>();
    if (doc.contains("workloads")) m.workloads = doc.at("workloads").get<std::vector<std::string>>();
    if (doc.contains("core_counts")) m.core_counts = doc.at("core_counts").get<std::vector<int>>();
    if (doc.contains("axis")) {
      std::vector<std::string> labels;
      for (const auto& v : doc.at("axis")) {
        if (v.is_string()) {
          labels.push_back(v.get<std::string>());
        } else {
          std::ostringstream os;
          os << v.get<double>();
          labels.push_back(os.str());
        }
      }
      m.axis = labels;
    }
    if (doc.contains("seed") && doc.contains("seeds"))
      throw ConfigError("manifest: give either 'seed' or 'seeds'");
    if (doc.contains("seed")) m.seeds = {doc.at("seed").get<std::uint64_t>()};
    if (doc.contains("seeds")) m.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    if (doc.contains("ops_per_thread")) m.ops_per_thread = doc.at("ops_per_thread").get<std::int64_t>();
    if (doc.contains("overrides")) m.overrides = doc.at("overrides");
    if (doc.contains("jobs")) m.jobs = doc.at("jobs").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  if (m.seeds.empty()) throw ConfigError("manifest: 'seeds' must be non-empty");
  if (m.core_counts)
    for (int c : *m.core_counts)
      if (c < 1) throw ConfigError("manifest: core_counts violates 'cores >= 1'");
  if (m.ops_per_thread && *m.ops_per_thread < 1)
    throw ConfigError("manifest: ops_per_thread violates '>= 1'");
  if (m.jobs < 1) throw ConfigError("manifest: jobs violates 'jobs >= 1'");
  if (!m.overrides.is_object()) throw ConfigError("manifest: 'overrides' must be an object");
  return m;
}

Manifest load_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed manifest '" + path + "': " + e.what());
  }
  return manifest_from_json(doc);
}

json to_json(const Manifest& m) {
  json j = {{"experiment", m.experiment}, {"seeds", m.seeds}, {"overrides", m.overrides}};
  if (m.workloads) j["workloads"] = *m.workloads;
  if (m.core_counts) j["core_counts"] = *m.core_counts;
  if (m.axis) j["axis"] = *m.axis;
  if (m.ops_per_thread) j["ops_per_thread"] = *m.ops_per_thread;
  return j;
}

// --- running -------------------------------------------------------------------------

namespace {

void collect_paths(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  if (!j.is_object()) {
    out.push_back(prefix);
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) collect_paths(it.value(), prefix + "/" + it.key(), out);
}

bool overlaps(const std::string& a, const std::string& b) {
  auto prefix = [](const std::string& p, const std::string& q) {
    return q.size() >= p.size() && q.compare(0, p.size(), p) == 0 &&
           (q.size() == p.size() || q[p.size()] == '/');
  };
  return prefix(a, b) || prefix(b, a);
}

SystemConfig apply_overrides(const SystemConfig& c, const json& overrides) {
  if (overrides.empty()) return c;
  json doc = to_json(c);
  doc.merge_patch(overrides);
  return config_from_json(doc);
}

struct Cell {
  std::size_t workload;
  int cores;
  std::size_t point;
  std::size_t variant;
  std::uint64_t seed;
};

SyncPrimitive bench_primitive(const std::string& w) { return parse_sync_primitive(w); }

void fill_metrics(ResultRow& row, const SimResult& r, const SystemConfig& cfg) {
  row.cycles = r.cycles;
  row.ipc = r.cycles > 0 ? static_cast<double>(r.retired()) / static_cast<double>(r.cycles) : 0.0;
  if (r.memory.demand_accesses > 0) row.amat = amat(r.memory);
  if (r.memory.l1.demand_misses() > 0) row.lfmr = lfmr(r.memory);
  row.gated_fraction = r.gated_fraction();
  row.breakdown = topdown(r);
  row.energy = energy(r, cfg);
  row.seconds = r.seconds();
  row.program_cycles.clear();
  for (const auto& c : r.per_core) row.program_cycles.push_back(c.finish_cycle);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

const ResultRow* ResultTable::find(const std::string& workload, int cores, const std::string& axis_label,
                                   const std::string& variant, std::uint64_t seed) const {
  for (const auto& r : rows)
    if (r.workload == workload && r.cores == cores && r.axis_label == axis_label && r.variant == variant &&
        r.seed == seed)
      return &r;
  return nullptr;
}

ResultTable run_experiment(const Manifest& manifest) {
  Experiment e = experiment(manifest.experiment);

  if (manifest.workloads) {
    for (const auto& w : *manifest.workloads) {
      if (e.sync_bench) {
        bench_primitive(w);
      } else if (std::find(suite_workloads().begin(), suite_workloads().end(), w) ==
                 suite_workloads().end()) {
        throw ConfigError("unknown workload '" + w + "' for experiment " + e.name);
      }
    }
    e.workloads = *manifest.workloads;
  }
  if (manifest.core_counts) e.core_counts = *manifest.core_counts;
  if (manifest.axis) {
    std::vector<AxisPoint> kept;
    for (const auto& label : *manifest.axis) {
      auto it = std::find_if(e.points.begin(), e.points.end(), [&](const AxisPoint& p) { return p.label == label; });
      if (it == e.points.end()) throw ConfigError("experiment " + e.name + " has no axis value '" + label + "'");
      kept.push_back(*it);
    }
    if (!e.baseline_point.empty() &&
        std::none_of(kept.begin(), kept.end(), [&](const AxisPoint& p) { return p.label == e.baseline_point; }))
      throw ConfigError("axis selection drops the baseline point '" + e.baseline_point + "'");
    e.points = kept;
  }
  if (e.points.empty() || e.variants.empty() || e.workloads.empty() || e.core_counts.empty())
    throw ConfigError("experiment " + e.name + " has an empty sweep");

  std::vector<std::string> touched;
  collect_paths(manifest.overrides, "", touched);
  std::vector<std::string> owned = e.axis_fields;
  owned.push_back("/preset");
  for (const auto& t : touched)
    for (const auto& o : owned)
      if (overlaps(t, o))
        throw ConfigError("override '" + t + "' conflicts with the " + e.axis + " axis of experiment " + e.name);

  // Resolved configs per (variant, point, cores).
  std::map<std::tuple<std::size_t, std::size_t, int>, SystemConfig> configs;
  std::map<std::tuple<std::size_t, std::size_t, int>, std::string> config_errors;
  json resolved = json::object();
  for (std::size_t v = 0; v < e.variants.size(); ++v) {
    SystemConfig base = preset(e.variants[v].preset);
    if (e.variants[v].apply) base = e.variants[v].apply(base);
    base = apply_overrides(base, manifest.overrides);
    for (std::size_t p = 0; p < e.points.size(); ++p) {
      for (int cores : e.core_counts) {
        try {
          SystemConfig c = with_cores(base, cores);
          if (e.points[p].apply) c = e.points[p].apply(std::move(c));
          validate(c);
          configs.emplace(std::tuple{v, p, cores}, c);
        } catch (const ConfigError& err) {
          config_errors[{v, p, cores}] = err.what();
        }
      }
      SystemConfig shown = e.points[p].apply ? e.points[p].apply(base) : base;
      resolved[e.variants[v].name][e.points[p].label] = to_json(shown);
    }
  }

  std::vector<Cell> cells;
  for (std::size_t w = 0; w < e.workloads.size(); ++w)
    for (int cores : e.core_counts)
      for (std::size_t p = 0; p < e.points.size(); ++p)
        for (std::size_t v = 0; v < e.variants.size(); ++v)
          for (std::uint64_t seed : manifest.seeds) cells.push_back(Cell{w, cores, p, v, seed});

  // Traces are shared by every cell with the same (workload, cores, seed).
  std::map<std::tuple<std::size_t, int, std::uint64_t>, std::vector<Trace>> traces;
  std::map<std::tuple<std::size_t, int, std::uint64_t>, std::string> trace_errors;
  for (std::size_t w = 0; w < e.workloads.size(); ++w)
    for (int cores : e.core_counts)
      for (std::uint64_t seed : manifest.seeds) {
        const std::int64_t ops = manifest.ops_per_thread.value_or(suite_ops_per_thread(cores));
        try {
          if (e.sync_bench) {
            SyncBenchSpec spec;
            spec.primitive = bench_primitive(e.workloads[w]);
            spec.threads = cores;
            spec.seed = seed;
            traces[{w, cores, seed}] = sync_bench_traces(spec);
          } else {
            traces[{w, cores, seed}] = suite_traces(e.workloads[w], cores, seed, ops);
          }
        } catch (const Error& err) {
          trace_errors[{w, cores, seed}] = err.what();
        }
      }

  std::vector<ResultRow> rows(cells.size());
  auto run_cell = [&](std::size_t i) {
    const Cell& cell = cells[i];
    ResultRow& row = rows[i];
    row.workload = e.workloads[cell.workload];
    row.cores = cell.cores;
    row.axis_label = e.points[cell.point].label;
    row.axis_value = e.points[cell.point].value;
    row.variant = e.variants[cell.variant].name;
    row.seed = cell.seed;
    const auto key = std::tuple{cell.workload, cell.cores, cell.seed};
    if (auto it = trace_errors.find(key); it != trace_errors.end()) {
      row.status = "error: " + it->second;
      return;
    }
    if (auto it = config_errors.find({cell.variant, cell.point, cell.cores}); it != config_errors.end()) {
      row.status = "error: " + it->second;
      return;
    }
    const SystemConfig& cfg = configs.at({cell.variant, cell.point, cell.cores});
    SimOptions opt;
    opt.seed = cell.seed;
    opt.record_sync_log = false;
    opt.sync_mode = e.points[cell.point].sync_mode;
    try {
      fill_metrics(row, simulate(traces.at(key), cfg, opt), cfg);
    } catch (const std::exception& err) {
      row.status = std::string("error: ") + err.what();
    }
  };

  const int jobs = std::max(1, std::min<int>(manifest.jobs, static_cast<int>(cells.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
      });
    for (auto& t : pool) t.join();
  }

  ResultTable table;
  table.experiment = e.name;
  table.axis = e.axis;
  table.baseline_point = e.baseline_point;
  table.baseline_variant = e.baseline_variant;
  table.representative = e.representative;
  table.rows = std::move(rows);
  table.provenance = {{"manifest", to_json(manifest)},
                      {"seeds", manifest.seeds},
                      {"ops_per_thread", manifest.ops_per_thread
                                             ? json(*manifest.ops_per_thread)
                                             : json("64000/cores clamped to [2000,16000]")},
                      {"configs", resolved}};

  // Baselines that failed leave their dependents unnormalized rather than
  // aborting the sweep.
  for (auto& row : table.rows) {
    if (!row.ok()) continue;
    const ResultRow* base = table.find(row.workload, row.cores,
                                       e.baseline_point.empty() ? row.axis_label : e.baseline_point,
                                       e.baseline_variant.empty() ? row.variant : e.baseline_variant, row.seed);
    if (base == nullptr || !base->ok()) row.status = "error: baseline cell failed";
  }
  ResultTable ok_only = table;
  std::erase_if(ok_only.rows, [](const ResultRow& r) { return !r.ok(); });
  speedup(ok_only, e.baseline_point, e.baseline_variant);
  for (auto& row : table.rows)
    if (row.ok())
      row.speedup = ok_only.find(row.workload, row.cores, row.axis_label, row.variant, row.seed)->speedup;
  return table;
}

ResultTable run_experiment(const std::string& name, const json& overrides) {
  Manifest m;
  m.experiment = name;
  m.overrides = overrides;
  return run_experiment(m);
}

void speedup(ResultTable& table, const std::string& baseline_point, const std::string& baseline_variant) {
  std::vector<double> out(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const ResultRow& row = table.rows[i];
    const std::string bp = baseline_point.empty() ? row.axis_label : baseline_point;
    const std::string bv = baseline_variant.empty() ? row.variant : baseline_variant;
    const ResultRow* base = table.find(row.workload, row.cores, bp, bv, row.seed);
    if (base == nullptr || !base->ok() || base->cycles <= 0 || row.cycles <= 0)
      throw DomainError("no baseline row (" + bp + ", " + bv + ") for " + row.workload + " at " +
                        std::to_string(row.cores) + " cores");
    if (row.workload == "mix" && row.program_cycles.size() == base->program_cycles.size() &&
        !row.program_cycles.empty()) {
      double log_sum = 0.0;
      for (std::size_t k = 0; k < row.program_cycles.size(); ++k)
        log_sum += std::log(static_cast<double>(base->program_cycles[k]) /
                            static_cast<double>(std::max<std::int64_t>(1, row.program_cycles[k])));
      out[i] = std::exp(log_sum / static_cast<double>(row.program_cycles.size()));
    } else {
      out[i] = static_cast<double>(base->cycles) / static_cast<double>(row.cycles);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) table.rows[i].speedup = out[i];
}

double iso_power_scale(double baseline_power_W, double variant_power_W) {
  if (!(baseline_power_W > 0.0)) throw DomainError("iso-power undefined: baseline power is zero");
  if (!(variant_power_W > 0.0)) return 1.0;
  return std::min(1.0, baseline_power_W / variant_power_W);
}

double iso_power_seconds(const ResultRow& row, double f) {
  if (!(f > 0.0)) throw DomainError("iso-power frequency scale must be positive");
  const double mem = row.breakdown.memory() / 100.0;
  return row.seconds * (mem + (1.0 - mem) / f);
}

double iso_power_point(const ResultTable& table, const std::string& baseline_variant, const std::string& variant) {
  double be = 0, bt = 0, ve = 0, vt = 0;
  for (const auto& row : table.rows) {
    if (!row.ok() || row.variant != variant) continue;
    const ResultRow* base = table.find(row.workload, row.cores, row.axis_label, baseline_variant, row.seed);
    if (base == nullptr || !base->ok()) continue;
    be += base->energy.total_nJ;
    bt += base->seconds;
    ve += row.energy.total_nJ;
    vt += row.seconds;
  }
  if (bt <= 0.0 || vt <= 0.0) throw DomainError("iso-power undefined: baseline power is zero");
  return iso_power_scale(be / bt, ve / vt);
}

// --- output --------------------------------------------------------------------------

std::string to_csv(const ResultTable& t) {
  std::ostringstream os;
  os << "experiment,workload,cores,axis,axis_value,variant,seed,cycles,speedup,ipc,amat,lfmr,"
        "gated_fraction,retiring,frontend,bad_speculation,backend_core,backend_mem_latency,"
        "backend_mem_bandwidth,class,energy_nJ,power_W,status\n";
  for (const auto& r : t.rows) {
    os << t.experiment << ',' << r.workload << ',' << r.cores << ',' << r.axis_label << ','
       << fmt(r.axis_value) << ',' << r.variant << ',' << r.seed << ',';
    if (!r.ok()) {
      std::string msg = r.status;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      os << ",,,,,,,,,,,,,,," << msg << '\n';
      continue;
    }
    const auto& b = r.breakdown;
    os << r.cycles << ',' << fmt(r.speedup) << ',' << fmt(r.ipc) << ','
       << (r.amat ? fmt(*r.amat) : "") << ',' << (r.lfmr ? fmt(*r.lfmr) : "") << ','
       << fmt(r.gated_fraction) << ',' << fmt(b.retiring) << ',' << fmt(b.frontend) << ','
       << fmt(b.bad_speculation) << ',' << fmt(b.backend_core) << ',' << fmt(b.backend_mem_latency)
       << ',' << fmt(b.backend_mem_bandwidth) << ',' << to_string(classify(b)) << ','
       << fmt(r.energy.total_nJ) << ',' << fmt(r.power_W()) << ",ok\n";
  }
  return os.str();
}

json to_json(const ResultTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json j = {{"workload", r.workload},   {"cores", r.cores},  {"axis", r.axis_label},
              {"axis_value", r.axis_value}, {"variant", r.variant}, {"seed", r.seed},
              {"status", r.status}};
    if (r.ok()) {
      j["cycles"] = r.cycles;
      j["speedup"] = r.speedup;
      j["ipc"] = r.ipc;
      j["amat"] = r.amat ? json(*r.amat) : json(nullptr);
      j["lfmr"] = r.lfmr ? json(*r.lfmr) : json(nullptr);
      j["gated_fraction"] = r.gated_fraction;
      j["breakdown"] = to_json(r.breakdown);
      j["energy"] = to_json(r.energy);
      j["seconds"] = r.seconds;
      j["power_W"] = r.power_W();
      j["program_cycles"] = r.program_cycles;
    }
    rows.push_back(std::move(j));
  }
  return {{"experiment", t.experiment},
          {"axis", t.axis},
          {"baseline", {{"axis", t.baseline_point.empty() ? json("same") : json(t.baseline_point)},
                        {"variant", t.baseline_variant.empty() ? json("same") : json(t.baseline_variant)}}},
          {"representative", t.representative},
          {"provenance", t.provenance},
          {"rows", rows}};
}

namespace {

TopDownBreakdown breakdown_from_json(const json& j) {
  TopDownBreakdown b;
  b.retiring = j.at("retiring").get<double>();
  b.frontend = j.at("frontend").get<double>();
  b.bad_speculation = j.at("bad_speculation").get<double>();
  b.backend_core = j.at("backend_core").get<double>();
  b.backend_mem_latency = j.at("backend_mem_latency").get<double>();
  b.backend_mem_bandwidth = j.at("backend_mem_bandwidth").get<double>();
  return b;
}

EnergyReport energy_from_json(const json& j) {
  EnergyReport e;
  e.core_nJ = j.at("core_nJ").get<double>();
  e.l1_nJ = j.at("l1_nJ").get<double>();
  e.l2_nJ = j.at("l2_nJ").get<double>();
  e.l3_nJ = j.at("l3_nJ").get<double>();
  e.memory_nJ = j.at("memory_nJ").get<double>();
  e.mu_nJ = j.at("mu_nJ").get<double>();
  e.total_nJ = j.at("total_nJ").get<double>();
  return e;
}

}  // namespace

ResultTable table_from_json(const json& doc) {
  ResultTable t;
  try {
    t.experiment = doc.at("experiment").get<std::string>();
    t.axis = doc.at("axis").get<std::string>();
    const json& base = doc.at("baseline");
    auto selector = [](const json& v) { return v == "same" ? std::string() : v.get<std::string>(); };
    t.baseline_point = selector(base.at("axis"));
    t.baseline_variant = selector(base.at("variant"));
    t.representative = doc.value("representative", "");
    t.provenance = doc.value("provenance", json::object());
    for (const auto& j : doc.at("rows")) {
      ResultRow r;
      r.workload = j.at("workload").get<std::string>();
      r.cores = j.at("cores").get<int>();
      r.axis_label = j.at("axis").get<std::string>();
      r.axis_value = j.at("axis_value").get<double>();
      r.variant = j.at("variant").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.status = j.at("status").get<std::string>();
      if (r.ok()) {
        r.cycles = j.at("cycles").get<std::int64_t>();
        r.speedup = j.at("speedup").get<double>();
        r.ipc = j.at("ipc").get<double>();
        if (!j.at("amat").is_null()) r.amat = j.at("amat").get<double>();
        if (!j.at("lfmr").is_null()) r.lfmr = j.at("lfmr").get<double>();
        r.gated_fraction = j.at("gated_fraction").get<double>();
        r.breakdown = breakdown_from_json(j.at("breakdown"));
        r.energy = energy_from_json(j.at("energy"));
        r.seconds = j.at("seconds").get<double>();
        r.program_cycles = j.at("program_cycles").get<std::vector<std::int64_t>>();
      }
      t.rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed result table: ") + e.what());
  }
  return t;
}

namespace {

struct Series {
  std::string name;
  std::map<int, double> by_cores;
};

std::vector<Series> geomean_series(const ResultTable& t, std::vector<int>& cores) {
  std::set<int> core_set;
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::pair<double, int>>> acc;
  for (const auto& r : t.rows) {
    if (!r.ok() || r.speedup <= 0) continue;
    const std::string name = r.variant + " " + r.axis_label;
    if (!acc.count(name)) order.push_back(name);
    auto& a = acc[name][r.cores];
    a.first += std::log(r.speedup);
    ++a.second;
    core_set.insert(r.cores);
  }
  cores.assign(core_set.begin(), core_set.end());
  std::vector<Series> out;
  for (const auto& name : order) {
    Series s{name, {}};
    for (const auto& [c, a] : acc[name]) s.by_cores[c] = std::exp(a.first / a.second);
    out.push_back(std::move(s));
  }
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace

std::string speedup_svg(const ResultTable& t) {
  std::vector<int> cores;
  const auto series = geomean_series(t, cores);
  double ymax = 1.0;
  for (const auto& s : series)
    for (const auto& [c, v] : s.by_cores) ymax = std::max(ymax, v);
  ymax *= 1.1;

  const int left = 60, top = 40, plot_h = 300;
  const int bar_w = 14, group_gap = 30;
  const int group_w = static_cast<int>(series.size()) * bar_w + group_gap;
  const int plot_w = std::max(200, static_cast<int>(cores.size()) * group_w);
  const int legend_h = 18 * static_cast<int>(series.size());
  const int width = left + plot_w + 20, height = top + plot_h + 50 + legend_h;
  static const char* kColors[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
  auto y = [&](double v) { return top + plot_h - v / ymax * plot_h; };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<metadata>" << xml_escape(t.provenance.dump()) << "</metadata>\n";
  os << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << xml_escape(t.experiment)
     << ": geomean speedup by core count</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
     << top + plot_h << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << y(1.0) << "\" x2=\"" << left + plot_w << "\" y2=\"" << y(1.0)
     << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4;
    os << "<text x=\"" << left - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  for (std::size_t g = 0; g < cores.size(); ++g) {
    const double gx = left + group_gap / 2.0 + static_cast<double>(g) * group_w;
    for (std::size_t s = 0; s < series.size(); ++s) {
      auto it = series[s].by_cores.find(cores[g]);
      if (it == series[s].by_cores.end()) continue;
      os << "<rect x=\"" << gx + static_cast<double>(s) * bar_w << "\" y=\"" << y(it->second)
         << "\" width=\"" << bar_w - 2 << "\" height=\"" << top + plot_h - y(it->second) << "\" fill=\""
         << kColors[s % std::size(kColors)] << "\"><title>" << xml_escape(series[s].name) << " @ " << cores[g]
         << " cores: " << it->second << "</title></rect>\n";
    }
    os << "<text x=\"" << gx + series.size() * bar_w / 2.0 << "\" y=\"" << top + plot_h + 16
       << "\" text-anchor=\"middle\">" << cores[g] << " cores</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double ly = top + plot_h + 36 + 18.0 * static_cast<double>(s);
    os << "<rect x=\"" << left << "\" y=\"" << ly - 10 << "\" width=\"10\" height=\"10\" fill=\""
       << kColors[s % std::size(kColors)] << "\"/>\n";
    os << "<text x=\"" << left + 16 << "\" y=\"" << ly << "\">" << xml_escape(series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string report(const ResultTable& t) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "experiment " << t.experiment << " (axis " << t.axis << "; baseline axis "
     << (t.baseline_point.empty() ? "same" : t.baseline_point) << ", variant "
     << (t.baseline_variant.empty() ? "same" : t.baseline_variant) << ")\n";
  std::size_t failed = 0;
  for (const auto& r : t.rows) failed += !r.ok();
  os << t.rows.size() << " cells, " << failed << " failed\n\n";
  os << std::left << std::setw(16) << "workload" << std::setw(7) << "cores" << std::setw(16) << "axis"
     << std::setw(13) << "variant" << std::right << std::setw(11) << "cycles" << std::setw(9) << "speedup"
     << std::setw(8) << "BE%" << std::setw(8) << "Mem%" << std::setw(8) << "BW%" << "  class\n";
  for (const auto& r : t.rows) {
    const std::string name = r.workload + (r.workload == t.representative ? "*" : "");
    os << std::left << std::setw(16) << name << std::setw(7) << r.cores << std::setw(16) << r.axis_label
       << std::setw(13) << r.variant << std::right;
    if (!r.ok()) {
      os << "  " << r.status << '\n';
      continue;
    }
    os << std::setw(11) << r.cycles << std::setw(9) << r.speedup << std::setprecision(1) << std::setw(8)
       << r.breakdown.backend() << std::setw(8) << r.breakdown.memory() << std::setw(8)
       << r.breakdown.bandwidth_share() << "  " << to_string(classify(r.breakdown)) << std::setprecision(3)
       << '\n';
  }
  if (!t.representative.empty()) os << "\n* representative workload\n";
  std::vector<int> cores;
  const auto series = geomean_series(t, cores);
  os << "\ngeomean speedup\n";
  for (const auto& s : series) {
    os << "  " << std::left << std::setw(30) << s.name << std::right;
    for (const auto& [c, v] : s.by_cores) os << "  " << c << "c=" << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace m3dsim
