#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "m3dsim/config.hh"
#include "m3dsim/core.hh"
#include "m3dsim/dse.hh"
#include "m3dsim/error.hh"
#include "m3dsim/memhier.hh"
#include "m3dsim/metrics.hh"
#include "m3dsim/trace.hh"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace m3dsim;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Byte sizes like 4096, 64KiB, 1MiB, 2GB (binary multiples throughout).
std::int64_t parse_size(const std::string& text) {
  std::size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ConfigError("invalid size '" + text + "'");
  }
  std::string unit = text.substr(pos);
  for (auto& ch : unit) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  double scale = 1;
  if (unit.empty() || unit == "b") scale = 1;
  else if (unit == "k" || unit == "kb" || unit == "kib") scale = 1024.0;
  else if (unit == "m" || unit == "mb" || unit == "mib") scale = 1024.0 * 1024;
  else if (unit == "g" || unit == "gb" || unit == "gib") scale = 1024.0 * 1024 * 1024;
  else throw ConfigError("invalid size unit in '" + text + "'");
  if (value < 0) throw ConfigError("invalid size '" + text + "'");
  return static_cast<std::int64_t>(value * scale);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("M3DSIM_SEED")) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(env, &pos);
      if (pos == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("M3DSIM_SEED is not an unsigned integer: '") + env + "'");
  }
  return 1;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw TraceError("write failed for '" + path.string() + "'");
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw TraceError("cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

struct ProfileArgs {
  std::string workload_class = "streaming";
  std::int64_t ops = 10000;
  std::string ws = "1MiB";
  int threads = 1;
  double mem_frac = -1;
  double branch_frac = -1;
  double mispredict_frac = -1;
  double store_frac = -1;
  double fp_frac = -1;
  int chain = 0;
  int loop_body = 0;
  int sync_ops = -1;
  std::string sync_primitive;
  bool suite = false;

  void add(CLI::App* app) {
    app->add_option("--class", workload_class, "workload class")->check(CLI::IsMember(
        {"streaming", "strided", "pointer_chase", "random_access", "compute_loop", "branchy", "sync_heavy"}));
    app->add_option("--ops", ops, "ops per thread")->check(CLI::PositiveNumber);
    app->add_option("--ws", ws, "working set per thread, e.g. 1MiB");
    app->add_option("--threads", threads, "threads")->check(CLI::PositiveNumber);
    app->add_flag("--suite", suite, "start from the sweep suite's profile for the class");
    app->add_option("--mem-frac", mem_frac, "memory op fraction");
    app->add_option("--branch-frac", branch_frac, "branch fraction");
    app->add_option("--mispredict-frac", mispredict_frac, "share of branches that are data dependent");
    app->add_option("--store-frac", store_frac, "share of memory ops that are stores");
    app->add_option("--fp-frac", fp_frac, "share of compute ops that are fp");
    app->add_option("--chain", chain, "dependency chain length");
    app->add_option("--loop-body", loop_body, "loop body length");
    app->add_option("--sync-ops", sync_ops, "sync ops per thread");
    app->add_option("--sync-primitive", sync_primitive, "tas_lock, ticket_lock, barrier, atomic_counter");
  }

  WorkloadProfile build(std::uint64_t seed, bool ws_given) const {
    const WorkloadClass c = parse_workload_class(workload_class);
    WorkloadProfile p = suite ? suite_profile(c, threads, seed, ops) : WorkloadProfile{};
    p.workload_class = c;
    p.instruction_count = ops;
    p.threads = threads;
    p.seed = seed;
    if (!suite || ws_given) p.working_set_bytes = parse_size(ws);
    if (mem_frac >= 0) p.memory_op_fraction = mem_frac;
    if (branch_frac >= 0) p.branch_fraction = branch_frac;
    if (mispredict_frac >= 0) p.mispredictable_branch_fraction = mispredict_frac;
    if (store_frac >= 0) p.store_fraction = store_frac;
    if (fp_frac >= 0) p.fp_fraction = fp_frac;
    if (chain > 0) p.dependency_chain_length = chain;
    if (loop_body > 0) p.loop_body_length = loop_body;
    if (sync_ops >= 0) p.sync_ops_per_thread = sync_ops;
    if (!sync_primitive.empty()) p.sync_primitive = parse_sync_primitive(sync_primitive);
    if (!suite && c == WorkloadClass::sync_heavy && sync_ops < 0)
      p.sync_ops_per_thread = static_cast<int>(std::max<std::int64_t>(2, ops / 100));
    validate(p);
    return p;
  }
};

json profile_json(const WorkloadProfile& p) {
  return {{"class", to_string(p.workload_class)},
          {"instruction_count", p.instruction_count},
          {"working_set_bytes", p.working_set_bytes},
          {"memory_op_fraction", p.memory_op_fraction},
          {"dependency_chain_length", p.dependency_chain_length},
          {"branch_fraction", p.branch_fraction},
          {"mispredictable_branch_fraction", p.mispredictable_branch_fraction},
          {"threads", p.threads},
          {"sync_ops_per_thread", p.sync_ops_per_thread},
          {"loop_body_length", p.loop_body_length},
          {"seed", p.seed},
          {"store_fraction", p.store_fraction},
          {"fp_fraction", p.fp_fraction},
          {"sync_primitive", to_string(p.sync_primitive)}};
}

json stats_json(const TraceStats& s) {
  json kinds;
  for (int k = 0; k < kNumOpKinds; ++k)
    kinds[to_string(static_cast<OpKind>(k))] = s.kind_counts[static_cast<std::size_t>(k)];
  return {{"instruction_count", s.instruction_count}, {"kind_counts", kinds},
          {"footprint_lines", s.footprint_lines},     {"critical_path", s.critical_path},
          {"ilp", s.ilp},                              {"branch_fraction", s.branch_fraction}};
}

int cmd_gen_trace(const ProfileArgs& args, bool ws_given, const std::string& out,
                  const std::optional<std::uint64_t>& seed_flag) {
  const std::uint64_t seed = resolve_seed(seed_flag);
  const WorkloadProfile p = args.build(seed, ws_given);
  const auto traces = generate(p);
  write_trace(traces.size() == 1 ? traces.front() : merge_threads(traces), out);
  json side = {{"seed", seed}, {"profile", profile_json(p)}, {"threads", json::array()}};
  for (const auto& t : traces) side["threads"].push_back(stats_json(measure(t)));
  write_file(out + ".stats.json", side.dump(2) + "\n");
  std::cout << "wrote " << out << " (" << p.instruction_count * p.threads << " ops) and " << out
            << ".stats.json\n";
  return 0;
}

struct SimArgs {
  std::string preset_name = "m3d";
  std::string config_path;
  std::vector<std::string> trace_paths;
  std::vector<std::string> features;
  int cores = 0;
  std::string sync_mode;
  double mem_mult = 0;
  std::string out = "out";
  bool no_fast_forward = false;
};

SystemConfig resolve_config(const SimArgs& a) {
  SystemConfig c = a.config_path.empty() ? preset(a.preset_name) : load_config_file(a.config_path);
  for (const auto& f : a.features) {
    auto& t = c.features;
    if (f == "memoization") t.memoization = true;
    else if (f == "rf_sync") t.rf_sync = true;
    else if (f == "ideal_frontend") t.ideal_frontend = true;
    else if (f == "shallow_pipeline") t.shallow_pipeline = true;
    else if (f == "perfect_memory") t.perfect_memory = true;
    else if (f == "uops_one_cycle") t.uops_one_cycle = true;
    else if (f == "noL2") c.l2.present = false;
    else if (f == "wide_pipeline") c = widen_pipeline(c, true);
    else if (f == "perfect_predictor") c.core.predictor = PredictorKind::perfect;
    else
      throw ConfigError("unknown feature '" + f +
                        "' (valid: memoization, rf_sync, ideal_frontend, shallow_pipeline, perfect_memory, "
                        "uops_one_cycle, noL2, wide_pipeline, perfect_predictor)");
  }
  if (a.mem_mult > 0) c.features.mem_latency_multiplier = a.mem_mult;
  return c;
}

std::string core_csv(const SimResult& r, const SystemConfig& cfg, std::uint64_t seed) {
  std::ostringstream os;
  os << "# seed=" << seed << "\n# config=" << to_json(cfg).dump() << "\n";
  os << "core,retired,finish_cycle,retiring,frontend,bad_speculation,backend_core,backend_mem_latency,"
        "backend_mem_bandwidth,branches,mispredicted,gated_instructions,sync_stall_cycles\n";
  for (std::size_t i = 0; i < r.per_core.size(); ++i) {
    const auto& c = r.per_core[i];
    os << i << ',' << c.retired << ',' << c.finish_cycle;
    for (int s = 0; s < kNumSlots; ++s) os << ',' << c.slots.count[static_cast<std::size_t>(s)];
    os << ',' << c.branches.executed << ',' << c.branches.mispredicted << ',' << c.memo.gated_instructions
       << ',' << c.sync_stall_cycles << '\n';
  }
  return os.str();
}

int cmd_simulate(const SimArgs& a, const ProfileArgs& prof, bool use_profile, bool ws_given,
                 const std::optional<std::uint64_t>& seed_flag) {
  const std::uint64_t seed = resolve_seed(seed_flag);
  SystemConfig cfg = resolve_config(a);
  std::vector<Trace> traces;
  json source;
  if (!a.trace_paths.empty()) {
    if (use_profile) throw ConfigError("give either --trace or a --class profile, not both");
    for (const auto& path : a.trace_paths) {
      auto parts = split_by_thread(read_trace(path));
      for (auto& t : parts) traces.push_back(std::move(t));
    }
    source = {{"traces", a.trace_paths}};
  } else {
    const WorkloadProfile p = prof.build(seed, ws_given);
    traces = generate(p);
    source = {{"profile", profile_json(p)}};
  }
  if (a.cores > 0) cfg = with_cores(cfg, a.cores);
  else if (static_cast<int>(traces.size()) > cfg.core.cores) cfg = with_cores(cfg, static_cast<int>(traces.size()));
  validate(cfg);
  SimOptions opt;
  opt.seed = seed;
  opt.fast_forward = !a.no_fast_forward;
  if (!a.sync_mode.empty()) opt.sync_mode = parse_sync_mode(a.sync_mode);
  const SimResult r = simulate(traces, cfg, opt);

  json j;
  j["seed"] = seed;
  j["config"] = to_json(cfg);
  j["input"] = source;
  j["result"] = to_json(r);
  const TopDownBreakdown td = topdown(r);
  j["topdown"] = to_json(td);
  j["energy"] = to_json(energy(r, cfg));
  const fs::path dir = ensure_dir(a.out);
  write_file(dir / "result.json", j.dump(2) + "\n");
  write_file(dir / "result.csv", core_csv(r, cfg, seed));
  std::cout << "cycles " << r.cycles << ", retired " << r.retired() << ", IPC "
            << static_cast<double>(r.retired()) / static_cast<double>(r.cycles) << ", class "
            << to_string(classify(td)) << "\nwrote " << (dir / "result.json").string() << " and "
            << (dir / "result.csv").string() << '\n';
  return 0;
}

struct SweepArgs {
  std::string name;
  std::string manifest;
  std::string out = "sweep";
  int jobs = 0;
  bool plot = false;
  std::vector<std::string> workloads;
  std::vector<int> cores;
  std::int64_t ops = 0;
};

int cmd_sweep(const SweepArgs& a, const std::optional<std::uint64_t>& seed_flag) {
  Manifest m;
  if (!a.manifest.empty()) {
    m = load_manifest_file(a.manifest);
    if (!a.name.empty() && a.name != m.experiment)
      throw ConfigError("experiment '" + a.name + "' does not match the manifest's '" + m.experiment + "'");
  } else {
    if (a.name.empty()) throw ConfigError("sweep needs an experiment name or --manifest");
    m.experiment = a.name;
  }
  if (seed_flag || a.manifest.empty()) {
    if (seed_flag || std::getenv("M3DSIM_SEED")) m.seeds = {resolve_seed(seed_flag)};
  }
  if (!a.workloads.empty()) m.workloads = a.workloads;
  if (!a.cores.empty()) m.core_counts = a.cores;
  if (a.ops > 0) m.ops_per_thread = a.ops;
  if (a.jobs > 0) m.jobs = a.jobs;

  const ResultTable t = run_experiment(m);
  const fs::path dir = ensure_dir(a.out);
  write_file(dir / "table.csv", "# provenance=" + t.provenance.dump() + "\n" + to_csv(t));
  write_file(dir / "table.json", to_json(t).dump(2) + "\n");
  std::size_t failed = 0;
  for (const auto& r : t.rows) failed += !r.ok();
  std::cout << t.rows.size() << " cells (" << failed << " failed); wrote " << (dir / "table.csv").string()
            << " and " << (dir / "table.json").string() << '\n';
  if (a.plot) {
    const fs::path svg = dir / (t.experiment + ".svg");
    write_file(svg, speedup_svg(t));
    std::cout << "wrote " << svg.string() << '\n';
  }
  if (failed > 0)
    for (const auto& r : t.rows)
      if (!r.ok())
        std::cerr << "cell " << r.workload << '/' << r.cores << '/' << r.axis_label << '/' << r.variant << ": "
                  << r.status << '\n';
  return 0;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
}

int cmd_report(const std::string& path, bool plot) {
  fs::path file = path;
  if (fs::is_directory(file)) file = fs::exists(file / "table.json") ? file / "table.json" : file / "result.json";
  const json doc = read_json(file.string());
  if (doc.contains("rows")) {
    const ResultTable t = table_from_json(doc);
    std::cout << report(t);
    if (plot) {
      const fs::path svg = file.parent_path() / (t.experiment + ".svg");
      write_file(svg, speedup_svg(t));
      std::cout << "wrote " << svg.string() << '\n';
    }
    return 0;
  }
  if (!doc.contains("result") || !doc.contains("topdown"))
    throw ConfigError("'" + file.string() + "' is neither a result table nor a simulation result");
  const json& r = doc["result"];
  const json& td = doc["topdown"];
  std::cout << "seed " << doc.value("seed", 0) << ", preset " << doc["config"].value("preset", "?") << ", "
            << r["cores"] << " cores\n"
            << "cycles " << r["cycles"] << ", retired " << r["retired"] << '\n';
  for (const char* k : {"retiring", "frontend", "bad_speculation", "backend_core", "backend_mem_latency",
                        "backend_mem_bandwidth"})
    std::cout << "  " << k << ' ' << td[k].get<double>() << "%\n";
  std::cout << "BE " << td["BE"].get<double>() << "%, Mem " << td["Mem"].get<double>() << "%, BW "
            << td["BW"].get<double>() << "% -> " << td["class"].get<std::string>() << '\n';
  if (r["memory"].contains("amat")) std::cout << "AMAT " << r["memory"]["amat"].get<double>() << " cycles\n";
  std::cout << "energy " << doc["energy"]["total_nJ"].get<double>() << " nJ\n";
  return 0;
}

int cmd_presets(const std::string& name) {
  if (name.empty()) {
    for (const auto& n : preset_names()) std::cout << n << '\n';
    return 0;
  }
  std::cout << serialize(preset(name)) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"m3dsim: multicore trace-driven simulator and design-space exploration"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "seed (falls back to M3DSIM_SEED, then 1)");

  ProfileArgs gen_prof;
  std::string gen_out = "trace.txt";
  auto* gen = app.add_subcommand("gen-trace", "generate a synthetic trace and a .stats.json sidecar");
  gen_prof.add(gen);
  gen->add_option("-o,--out", gen_out, "output trace path (.gz compresses)");
  gen->add_option("--seed", seed, "seed");

  SimArgs sim;
  ProfileArgs sim_prof;
  auto* simc = app.add_subcommand("simulate", "simulate traces or a generated profile");
  simc->add_option("--preset", sim.preset_name, "preset name");
  simc->add_option("--config", sim.config_path, "config file (JSON)");
  simc->add_option("--trace", sim.trace_paths, "trace file(s)");
  simc->add_option("--feature", sim.features, "enable a feature toggle (repeatable)");
  simc->add_option("--cores", sim.cores, "core count")->check(CLI::PositiveNumber);
  simc->add_option("--sync-mode", sim.sync_mode, "base, opt or rf");
  simc->add_option("--mem-mult", sim.mem_mult, "main-memory latency multiplier");
  simc->add_option("-o,--out", sim.out, "output directory");
  simc->add_flag("--no-fast-forward", sim.no_fast_forward, "step every cycle");
  simc->add_option("--seed", seed, "seed");
  sim_prof.add(simc);

  SweepArgs sweep;
  auto* sw = app.add_subcommand("sweep", "run a named experiment");
  sw->add_option("experiment", sweep.name, "experiment name");
  sw->add_option("--manifest", sweep.manifest, "manifest file (JSON)");
  sw->add_option("-o,--out", sweep.out, "output directory");
  sw->add_option("-j,--jobs", sweep.jobs, "parallel cells")->check(CLI::PositiveNumber);
  sw->add_flag("--plot", sweep.plot, "also write an SVG chart");
  sw->add_option("--workloads", sweep.workloads, "workload subset");
  sw->add_option("--cores", sweep.cores, "core counts");
  sw->add_option("--ops", sweep.ops, "ops per thread (default scales with cores)");
  sw->add_option("--seed", seed, "seed");

  std::string report_path;
  bool report_plot = false;
  auto* rep = app.add_subcommand("report", "summarize table.json or result.json");
  rep->add_option("path", report_path, "file or output directory")->required();
  rep->add_flag("--plot", report_plot, "write the SVG chart next to a table");

  std::string preset_arg;
  auto* pre = app.add_subcommand("presets", "list presets or print one");
  pre->add_option("name", preset_arg, "preset to print");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_trace(gen_prof, gen->count("--ws") > 0, gen_out, seed);
    if (*simc) {
      const bool use_profile = simc->count("--class") > 0;
      if (sim.trace_paths.empty() && !use_profile) {
        std::cerr << "simulate: give --trace or --class\n";
        return kExitUsage;
      }
      return cmd_simulate(sim, sim_prof, use_profile, simc->count("--ws") > 0, seed);
    }
    if (*sw) return cmd_sweep(sweep, seed);
    if (*rep) return cmd_report(report_path, report_plot);
    if (*pre) return cmd_presets(preset_arg);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
