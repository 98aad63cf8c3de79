// Command-line front end: sampling, core stripping, dimer counting, cavity
// sweeps, diagonalization, the unsat-core experiment, and entropy ledgers.
// Every command writes a manifest next to its primary output; identical
// parameters and seed reproduce byte-identical tables (wall-clock columns are
// blanked before hashing).
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 partial batch.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "qsat/qsat.hpp"

namespace fs = std::filesystem;
using namespace qsat;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailure = 2;
constexpr int kPartial = 3;

struct UsageError {
  std::string message;
};

// Stream-space convention, one master seed for everything:
//   gen: graph at stream t, projectors at t ^ 2^61
//   diag/decide: Lanczos starts at t ^ 2^62 (second start flips bit 63)
//   grid commands: consecutive streams from 0, regions split at multiples
//   of 2^40 where a worker needs a private range.
constexpr std::uint64_t kProjectorBit = std::uint64_t(1) << 61;
constexpr std::uint64_t kDecideBit = std::uint64_t(1) << 62;
constexpr std::uint64_t kRegion = std::uint64_t(1) << 40;

struct CommonOpts {
  std::uint64_t seed = 1;
  std::uint32_t jobs = 1;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--seed", c.seed, "master seed; all randomness derives from it");
  cmd->add_option("--jobs", c.jobs, "worker pool for independent rows/grid points")
      ->check(CLI::Range(1u, 64u));
  cmd->add_option("--out-dir", c.out_dir, "directory for default outputs and manifests");
}

double now_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_parent(const fs::path& p) {
  const auto dir = p.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
}

fs::path default_out(const CommonOpts& c, const std::string& name) {
  return fs::path(c.out_dir) / name;
}

// Everything the command wrote, plus timings, keyed to the primary output.
void save_manifest(ExperimentManifest& man, const fs::path& primary,
                   std::chrono::steady_clock::time_point t0) {
  man.wall_seconds = now_seconds(t0);
  fs::path mpath = primary;
  mpath += ".manifest.json";
  ensure_parent(mpath);
  man.save(mpath);
  std::printf("manifest %s\n", mpath.string().c_str());
}

// Index-sharded worker pool. fn(i) may only touch slot i of its outputs, so
// results are identical whatever the pool size.
template <typename Fn>
void parallel_for(std::uint32_t jobs, std::size_t count, Fn&& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::uint32_t width = std::min<std::uint32_t>(jobs, static_cast<std::uint32_t>(count));
  pool.reserve(width);
  for (std::uint32_t w = 0; w < width; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

ProjectorMode parse_mode(const std::string& s) {
  if (s == "generic") return ProjectorMode::Generic;
  if (s == "product") return ProjectorMode::Product;
  throw UsageError{"mode must be 'generic' or 'product', got '" + s + "'"};
}

ProjectorSet slice_projectors(const ProjectorSet& p, const std::vector<std::uint32_t>& keep) {
  ProjectorSet out;
  out.mode = p.mode;
  out.k = p.k;
  for (auto i : keep) {
    if (p.mode == ProjectorMode::Generic)
      out.generic.push_back(p.generic.at(i));
    else
      out.product.push_back(p.product.at(i));
  }
  return out;
}

std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }

// ---------------------------------------------------------------------------
// gen

struct GenArgs {
  CommonOpts common;
  std::uint32_t n = 0;
  double alpha = -1.0;
  std::int64_t m = -1;
  std::uint32_t k = 3;
  std::string mode = "generic";
  std::uint64_t stream = 0;
  std::uint32_t count = 1;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  if ((a.alpha >= 0.0) == (a.m >= 0))
    throw UsageError{"gen needs exactly one of --alpha or --m"};
  if (!a.out.empty() && a.count != 1)
    throw UsageError{"--out names a single file; drop it when --count > 1"};
  if (a.n == 0) throw UsageError{"gen needs --n > 0"};
  const ProjectorMode mode = parse_mode(a.mode);
  // documented rounding: m = round(alpha * N)
  const std::uint64_t m = a.m >= 0 ? static_cast<std::uint64_t>(a.m)
                                   : static_cast<std::uint64_t>(std::llround(a.alpha * a.n));

  const auto t0 = std::chrono::steady_clock::now();
  ExperimentManifest man;
  man.command = "gen";
  man.master_seed = a.common.seed;
  man.parameters = {{"n", a.n},       {"alpha", a.alpha}, {"m", m},
                    {"k", a.k},       {"mode", a.mode},   {"stream", a.stream},
                    {"count", a.count}};

  fs::create_directories(a.common.out_dir);
  std::vector<fs::path> outs;
  for (std::uint32_t i = 0; i < a.count; ++i) {
    const std::uint64_t t = a.stream + i;
    const RngSpec graph_rng{a.common.seed, t};
    Instance inst;
    inst.graph = sample_er_graph(a.n, m, a.k, graph_rng);
    inst.projectors =
        sample_projectors(inst.graph, mode, graph_rng.with_stream(t ^ kProjectorBit));
    inst.rng = graph_rng;
    fs::path path = a.out.empty()
                        ? default_out(a.common, "instance_s" + fmt_u64(a.common.seed) +
                                                    "_t" + fmt_u64(t) + ".json")
                        : fs::path(a.out);
    ensure_parent(path);
    write_instance(path, inst);
    man.note_output(path);
    outs.push_back(path);
    std::printf("wrote %s  (n=%u m=%llu k=%u mode=%s stream=%llu)\n", path.string().c_str(),
                a.n, static_cast<unsigned long long>(m), a.k, a.mode.c_str(),
                static_cast<unsigned long long>(t));
  }
  save_manifest(man, outs.front(), t0);
  return kOk;
}

// ---------------------------------------------------------------------------
// core

struct CoreArgs {
  CommonOpts common;
  std::string in;
  std::string out;
  std::vector<double> alphas;
  std::uint32_t k = 3;
  std::string csv;
  bool empirical = false;
  double alpha = -1.0;
  std::uint32_t n = 0;
  std::uint32_t samples = 10;
};

int cmd_core(const CoreArgs& a) {
  const int modes = (!a.in.empty() ? 1 : 0) + (!a.alphas.empty() ? 1 : 0) + (a.empirical ? 1 : 0);
  if (modes != 1)
    throw UsageError{"core needs exactly one of --in FILE, --alphas LIST, or --empirical"};
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentManifest man;
  man.command = "core";
  man.master_seed = a.common.seed;

  if (!a.in.empty()) {
    fs::path in_path(a.in);
    fs::path out_path = a.out.empty()
                            ? default_out(a.common, in_path.stem().string() + ".core.json")
                            : fs::path(a.out);
    if (fs::weakly_canonical(out_path) == fs::weakly_canonical(in_path))
      throw UsageError{"refusing to overwrite the input; pick a different --out"};
    Instance inst = read_instance(in_path);
    man.note_input(in_path);
    inst.core = strip_core(inst.graph);
    ensure_parent(out_path);
    write_instance(out_path, inst);
    man.note_output(out_path);
    const auto nc = inst.core->core_qubits.size();
    const auto mc = inst.core->core_clauses.size();
    std::printf("core: N=%u M=%zu -> N_c=%zu M_c=%zu beta=%s\n", inst.graph.n_qubits,
                inst.graph.clauses.size(), nc, mc,
                nc ? fmt_double(double(mc) / double(nc)).c_str() : "nan");
    std::printf("wrote %s\n", out_path.string().c_str());
    man.parameters = {{"in", a.in}, {"out", out_path.string()}};
    save_manifest(man, out_path, t0);
    return kOk;
  }

  if (a.empirical) {
    if (a.alpha < 0.0 || a.n == 0)
      throw UsageError{"core --empirical needs --alpha and --n"};
    const auto cmp =
        empirical_vs_analytic(a.alpha, a.k, a.n, a.samples, RngSpec{a.common.seed, 0});
    CsvTable t({"alpha", "k", "n", "samples", "mean_nc_frac", "analytic_nc_frac",
                "mean_mc_frac", "analytic_mc_frac", "handshake_ok"});
    t.add_row({fmt_double(a.alpha), std::to_string(a.k), std::to_string(a.n),
               std::to_string(a.samples), fmt_double(cmp.mean_core_qubit_fraction),
               fmt_double(cmp.analytic_core_qubit_fraction),
               fmt_double(cmp.mean_core_clause_fraction),
               fmt_double(cmp.analytic_core_clause_fraction),
               cmp.handshake_ok ? "1" : "0"});
    fs::path out_path = a.csv.empty() ? default_out(a.common, "core_empirical.csv")
                                      : fs::path(a.csv);
    ensure_parent(out_path);
    t.save(out_path);
    man.note_output(out_path);
    std::printf("empirical N_c/N = %s  (analytic %s)  M_c/N = %s  (analytic %s)\n",
                fmt_double(cmp.mean_core_qubit_fraction).c_str(),
                fmt_double(cmp.analytic_core_qubit_fraction).c_str(),
                fmt_double(cmp.mean_core_clause_fraction).c_str(),
                fmt_double(cmp.analytic_core_clause_fraction).c_str());
    man.parameters = {{"alpha", a.alpha}, {"k", a.k}, {"n", a.n}, {"samples", a.samples}};
    save_manifest(man, out_path, t0);
    return kOk;
  }

  CsvTable t(kCoreCsvHeader);
  for (double alpha : a.alphas) {
    const auto stats = core_stats(alpha, a.k);
    if (stats) {
      t.add_row({fmt_double(alpha), fmt_double(stats->lambda_star), fmt_double(stats->nc_frac),
                 fmt_double(stats->mc_frac), fmt_double(stats->beta)});
    } else {
      t.add_row({fmt_double(alpha), "nan", "0", "0", "nan"});
    }
  }
  fs::path out_path = a.csv.empty() ? default_out(a.common, "core_stats.csv")
                                    : fs::path(a.csv);
  ensure_parent(out_path);
  t.save(out_path);
  man.note_output(out_path);
  std::printf("wrote %s (%zu rows)\n", out_path.string().c_str(), t.rows.size());
  man.parameters = {{"alphas", a.alphas}, {"k", a.k}};
  save_manifest(man, out_path, t0);
  return kOk;
}

// ---------------------------------------------------------------------------
// dimers

struct DimersArgs {
  CommonOpts common;
  std::vector<std::string> in;
  bool core_only = false;
  std::uint64_t count_bound = 0;
  std::uint64_t list_cap = 0;
  std::string out;
  std::string covering_out;
};

int cmd_dimers(const DimersArgs& a) {
  if (a.in.empty()) throw UsageError{"dimers needs at least one --in FILE"};
  if (!a.covering_out.empty() && a.in.size() != 1)
    throw UsageError{"--covering-out works with a single input"};
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentManifest man;
  man.command = "dimers";
  man.master_seed = a.common.seed;
  man.parameters = {{"in", a.in},
                    {"core_only", a.core_only},
                    {"count_bound", a.count_bound},
                    {"list_cap", a.list_cap}};

  std::vector<std::vector<std::string>> rows(a.in.size());
  std::atomic<int> failures{0};
  std::mutex log_mu;

  parallel_for(a.common.jobs, a.in.size(), [&](std::size_t i) {
    const std::string stem = fs::path(a.in[i]).stem().string();
    try {
      const Instance inst = read_instance(a.in[i]);
      const auto& g = inst.graph;
      BipartiteIncidence view =
          a.core_only
              ? BipartiteIncidence::from_core(g, inst.core ? *inst.core : strip_core(g))
              : BipartiteIncidence::from_graph(g);
      EnumerationOptions eo;
      eo.count_bound = a.count_bound;
      eo.list_cap = !a.covering_out.empty() ? std::max<std::uint64_t>(1, a.list_cap)
                                            : a.list_cap;
      const auto res = enumerate_coverings(view, eo);
      rows[i] = {stem, std::to_string(view.qubit_count()), std::to_string(view.clause_count()),
                 res.count.str(), fmt_double(res.log_count())};
      if (res.saturated) {
        std::lock_guard<std::mutex> lock(log_mu);
        std::fprintf(stderr, "note: %s saturated the count bound; count is a lower bound\n",
                     stem.c_str());
      }
      if (!a.covering_out.empty() && !res.coverings.empty()) {
        fs::path cpath(a.covering_out);
        ensure_parent(cpath);
        std::ofstream out(cpath);
        out << covering_to_json(res.coverings.front()).dump(1) << '\n';
      }
    } catch (const std::exception& e) {
      rows[i] = {stem, "0", "0", "nan", "nan"};
      failures.fetch_add(1);
      std::lock_guard<std::mutex> lock(log_mu);
      std::fprintf(stderr, "row failed (%s): %s\n", a.in[i].c_str(), e.what());
    }
  });

  CsvTable t(kDimersCsvHeader);
  for (auto& r : rows) t.add_row(std::move(r));
  fs::path out_path = a.out.empty() ? default_out(a.common, "dimers.csv") : fs::path(a.out);
  ensure_parent(out_path);
  t.save(out_path);
  for (const auto& f : a.in) {
    try {
      man.note_input(f);
    } catch (...) {
    }
  }
  man.note_output(out_path);
  if (!a.covering_out.empty() && fs::exists(a.covering_out)) man.note_output(a.covering_out);
  std::printf("wrote %s (%zu rows, %d failed)\n", out_path.string().c_str(), t.rows.size(),
              failures.load());
  save_manifest(man, out_path, t0);
  return failures.load() ? kPartial : kOk;
}

// ---------------------------------------------------------------------------
// cavity

struct CavityArgs {
  CommonOpts common;
  bool regular = false;
  bool figure5 = false;
  bool figure6 = false;
  std::string instance;
  bool full_graph = false;
  bool extrapolate = false;
  bool bits = false;
  std::vector<std::string> in;
  std::vector<double> betas{0.7, 0.8, 0.9, 1.0};
  std::vector<double> lambdas;
  double lambda = 1e3;
  std::uint32_t k = 3;
  // population dynamics
  std::uint32_t pop = 10000;
  std::uint32_t sweeps = 4000;
  std::uint32_t samples_per_sweep = 2000;
  double burn_in = 0.75;
  double drift_tol = 1e-2;
  // single-instance BP
  double tol = 1e-10;
  std::uint32_t max_sweeps = 1000;
  double damping = 0.5;
  // figure6 ensemble mode
  std::uint32_t sample_cores = 0;
  std::uint32_t core_min = 8;
  std::uint32_t core_max = 30;
  double alpha = 0.917;
  std::uint32_t parent_n = 60;
  std::uint64_t attempts_cap = 200000;
  std::string out;
};

// one CSV row in the documented grid schema
std::vector<std::string> cavity_row(double beta, double lambda, std::uint32_t pop,
                                    std::uint32_t sweeps, const CavityReport& r, double unit) {
  return {fmt_double(beta),
          fmt_double(lambda),
          std::to_string(pop),
          std::to_string(sweeps),
          fmt_double(r.free_energy_density * unit),
          fmt_double(r.occupancy),
          fmt_double(r.entropy_density * unit),
          r.converged ? "1" : "0",
          fmt_double(r.covering_entropy_density * unit)};
}

void print_extrapolation(double beta, const ExtrapolationResult& ex) {
  std::printf("beta=%s: s_infinity=%s  coef_half=%s coef_one=%s rms=%s cond=%s\n",
              fmt_double(beta).c_str(), fmt_double(ex.s_infinity).c_str(),
              fmt_double(ex.coef_half).c_str(), fmt_double(ex.coef_one).c_str(),
              fmt_double(ex.rms_residual).c_str(), fmt_double(ex.condition).c_str());
}

int cmd_cavity(const CavityArgs& a) {
  const int modes = (a.regular ? 1 : 0) + (a.figure5 ? 1 : 0) + (a.figure6 ? 1 : 0) +
                    (!a.instance.empty() ? 1 : 0);
  if (modes != 1)
    throw UsageError{
        "cavity needs exactly one of --regular, --figure5, --figure6, or --instance FILE"};
  const double unit = a.bits ? 1.0 / std::log(2.0) : 1.0;
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentManifest man;
  man.command = "cavity";
  man.master_seed = a.common.seed;
  Json extras = Json::array();

  if (a.regular) {
    std::vector<double> lambdas = a.lambdas.empty()
                                      ? std::vector<double>{1e2, 1e3, 1e4}
                                      : a.lambdas;
    CsvTable t(kCavityCsvHeader);
    std::vector<std::pair<double, double>> samples;
    for (double l : lambdas) {
      const auto fp = regular_fixed_point(l, a.k, a.k);
      t.add_row(cavity_row(1.0, l, 0, 0, fp.report, unit));
      samples.emplace_back(l, fp.report.entropy_density * unit);
    }
    fs::path out_path =
        a.out.empty() ? default_out(a.common, "cavity_regular.csv") : fs::path(a.out);
    ensure_parent(out_path);
    t.save(out_path);
    man.note_output(out_path);
    if (a.extrapolate && samples.size() >= 3) {
      const auto ex = extrapolate_lambda(samples);
      print_extrapolation(1.0, ex);
      extras.push_back({{"beta", 1.0},
                        {"s_infinity", ex.s_infinity},
                        {"coef_half", ex.coef_half},
                        {"coef_one", ex.coef_one},
                        {"rms_residual", ex.rms_residual},
                        {"condition", ex.condition}});
    }
    std::printf("wrote %s (%zu rows)\n", out_path.string().c_str(), t.rows.size());
    man.parameters = {{"mode", "regular"}, {"lambdas", lambdas}, {"k", a.k},
                      {"bits", a.bits},    {"extrapolation", extras}};
    save_manifest(man, out_path, t0);
    return kOk;
  }

  if (a.figure5) {
    std::vector<double> lambdas =
        a.lambdas.empty()
            ? std::vector<double>{1e2, 3.1622776601683795e2, 1e3, 3.1622776601683795e3, 1e4}
            : a.lambdas;
    struct Cell {
      double beta, lambda;
    };
    std::vector<Cell> grid;
    for (double b : a.betas)
      for (double l : lambdas) grid.push_back({b, l});
    std::vector<std::vector<std::string>> rows(grid.size());
    std::vector<double> entropies(grid.size(), 0.0);
    std::atomic<int> failures{0};
    std::mutex log_mu;
    PopulationParams pp;
    pp.population = a.pop;
    pp.sweeps = a.sweeps;
    pp.burn_in_fraction = a.burn_in;
    pp.samples_per_sweep = a.samples_per_sweep;
    pp.drift_tolerance = a.drift_tol;

    parallel_for(a.common.jobs, grid.size(), [&](std::size_t i) {
      const auto [b, l] = grid[i];
      try {
        const auto law = DegreeLaw::truncated_poisson_for_density(b, a.k);
        if (!law)
          throw UnsupportedInstanceError("no truncated Poisson law at density " +
                                         fmt_double(b));
        const auto pr =
            population_dynamics(*law, l, pp, RngSpec{a.common.seed, static_cast<std::uint64_t>(i)});
        rows[i] = cavity_row(b, l, a.pop, a.sweeps, pr.report, unit);
        entropies[i] = pr.report.entropy_density * unit;
      } catch (const std::exception& e) {
        rows[i] = {fmt_double(b), fmt_double(l), "0", "0", "nan", "nan", "nan", "0", "nan"};
        entropies[i] = std::nan("");
        failures.fetch_add(1);
        std::lock_guard<std::mutex> lock(log_mu);
        std::fprintf(stderr, "grid point (beta=%g, lambda=%g) failed: %s\n", b, l, e.what());
      }
    });

    CsvTable t(kCavityCsvHeader);
    for (auto& r : rows) t.add_row(std::move(r));
    fs::path out_path =
        a.out.empty() ? default_out(a.common, "cavity_figure5.csv") : fs::path(a.out);
    ensure_parent(out_path);
    t.save(out_path);
    man.note_output(out_path);
    if (a.extrapolate) {
      for (double b : a.betas) {
        std::vector<std::pair<double, double>> samples;
        for (std::size_t i = 0; i < grid.size(); ++i)
          if (grid[i].beta == b && std::isfinite(entropies[i]))
            samples.emplace_back(grid[i].lambda, entropies[i]);
        if (samples.size() < 3) continue;
        const auto ex = extrapolate_lambda(samples);
        print_extrapolation(b, ex);
        extras.push_back({{"beta", b},
                          {"s_infinity", ex.s_infinity},
                          {"coef_half", ex.coef_half},
                          {"coef_one", ex.coef_one},
                          {"rms_residual", ex.rms_residual},
                          {"condition", ex.condition}});
      }
    }
    std::printf("wrote %s (%zu rows, %d failed)\n", out_path.string().c_str(), t.rows.size(),
                failures.load());
    man.parameters = {{"mode", "figure5"},
                      {"betas", a.betas},
                      {"lambdas", lambdas},
                      {"population", a.pop},
                      {"sweeps", a.sweeps},
                      {"samples_per_sweep", a.samples_per_sweep},
                      {"burn_in", a.burn_in},
                      {"drift_tol", a.drift_tol},
                      {"bits", a.bits},
                      {"extrapolation", extras}};
    save_manifest(man, out_path, t0);
    return failures.load() ? kPartial : kOk;
  }

  if (a.figure6) {
    const std::vector<std::string> header = {"instance",        "N_c",
                                             "M_c",             "count",
                                             "log_count",       "exact_entropy_density",
                                             "bp_entropy_density", "gap_per_qubit",
                                             "converged"};
    BpOptions opt;
    opt.tol = a.tol;
    opt.max_sweeps = a.max_sweeps;
    opt.damping = a.damping;

    CsvTable t(header);
    int failures = 0;

    auto pair_one = [&](const std::string& id, const InteractionGraph& g,
                        const CoreDecomposition& cd,
                        RngSpec bp_rng) -> std::vector<std::string> {
      const auto view = BipartiteIncidence::from_core(g, cd);
      if (view.qubit_count() == 0) throw UnsupportedInstanceError("empty core");
      EnumerationOptions eo;
      const auto res = enumerate_coverings(view, eo);
      const auto bp = single_instance_bp(view, a.lambda, opt, bp_rng);
      const double nq = static_cast<double>(view.qubit_count());
      const double exact = res.log_count() / nq;
      return {id,
              std::to_string(view.qubit_count()),
              std::to_string(view.clause_count()),
              res.count.str(),
              fmt_double(res.log_count() * unit),
              fmt_double(exact * unit),
              fmt_double(bp.report.entropy_density * unit),
              fmt_double(std::abs(bp.report.entropy_density - exact) * unit),
              bp.converged ? "1" : "0"};
    };

    if (a.sample_cores > 0) {
      // rejection-sample critical cores: M_c = N_c within the size window,
      // at least one covering
      if (!a.in.empty())
        throw UsageError{"--figure6 takes either --in files or --sample-cores, not both"};
      const auto m = static_cast<std::uint64_t>(std::llround(a.alpha * a.parent_n));
      std::uint32_t accepted = 0;
      for (std::uint64_t tstream = 0; accepted < a.sample_cores && tstream < a.attempts_cap;
           ++tstream) {
        const auto g =
            sample_er_graph(a.parent_n, m, a.k, RngSpec{a.common.seed, tstream});
        const auto cd = strip_core(g);
        const auto nc = cd.core_qubits.size();
        if (nc < a.core_min || nc > a.core_max || cd.core_clauses.size() != nc) continue;
        if (!has_covering(BipartiteIncidence::from_core(g, cd))) continue;
        t.add_row(pair_one("s" + fmt_u64(tstream), g, cd,
                           RngSpec{a.common.seed, kRegion + tstream}));
        ++accepted;
      }
      if (accepted < a.sample_cores) {
        std::fprintf(stderr, "sample deficit: %u of %u cores within the attempt cap\n",
                     accepted, a.sample_cores);
        ++failures;
      }
    } else {
      if (a.in.empty())
        throw UsageError{"--figure6 needs --in instance files or --sample-cores N"};
      std::vector<std::vector<std::string>> rows(a.in.size());
      std::atomic<int> row_failures{0};
      std::mutex log_mu;
      parallel_for(a.common.jobs, a.in.size(), [&](std::size_t i) {
        const std::string stem = fs::path(a.in[i]).stem().string();
        try {
          const Instance inst = read_instance(a.in[i]);
          const auto cd = inst.core ? *inst.core : strip_core(inst.graph);
          rows[i] = pair_one(stem, inst.graph, cd,
                             RngSpec{a.common.seed, kRegion + static_cast<std::uint64_t>(i)});
        } catch (const std::exception& e) {
          rows[i] = {stem, "0", "0", "0", "nan", "nan", "nan", "nan", "0"};
          row_failures.fetch_add(1);
          std::lock_guard<std::mutex> lock(log_mu);
          std::fprintf(stderr, "row failed (%s): %s\n", a.in[i].c_str(), e.what());
        }
      });
      for (auto& r : rows) t.add_row(std::move(r));
      for (const auto& f : a.in) {
        try {
          man.note_input(f);
        } catch (...) {
        }
      }
      failures += row_failures.load();
    }

    fs::path out_path =
        a.out.empty() ? default_out(a.common, "cavity_figure6.csv") : fs::path(a.out);
    ensure_parent(out_path);
    t.save(out_path);
    man.note_output(out_path);
    std::printf("wrote %s (%zu rows)\n", out_path.string().c_str(), t.rows.size());
    man.parameters = {{"mode", "figure6"},        {"lambda", a.lambda},
                      {"sample_cores", a.sample_cores}, {"core_min", a.core_min},
                      {"core_max", a.core_max},   {"alpha", a.alpha},
                      {"parent_n", a.parent_n},   {"bits", a.bits},
                      {"in", a.in}};
    save_manifest(man, out_path, t0);
    return failures ? kPartial : kOk;
  }

  // single instance
  const Instance inst = read_instance(a.instance);
  man.note_input(a.instance);
  const auto cd = inst.core ? *inst.core : strip_core(inst.graph);
  const bool use_core = !a.full_graph && !cd.core_clauses.empty();
  const auto view = use_core ? BipartiteIncidence::from_core(inst.graph, cd)
                             : BipartiteIncidence::from_graph(inst.graph);
  if (view.qubit_count() == 0) throw UnsupportedInstanceError("instance has no qubits to analyze");
  BpOptions opt;
  opt.tol = a.tol;
  opt.max_sweeps = a.max_sweeps;
  opt.damping = a.damping;
  const auto bp = single_instance_bp(view, a.lambda, opt, RngSpec{a.common.seed, 0});
  std::printf("%s view: N=%zu M=%zu lambda=%s\n", use_core ? "core" : "full",
              view.qubit_count(), view.clause_count(), fmt_double(a.lambda).c_str());
  std::printf("F/N=%s occupancy=%s S/N=%s S_cov/N=%s converged=%d sweeps=%u\n",
              fmt_double(bp.report.free_energy_density * unit).c_str(),
              fmt_double(bp.report.occupancy).c_str(),
              fmt_double(bp.report.entropy_density * unit).c_str(),
              fmt_double(bp.report.covering_entropy_density * unit).c_str(),
              bp.converged ? 1 : 0, bp.sweeps);
  CsvTable t(kCavityCsvHeader);
  t.add_row(cavity_row(bp.report.core_density, a.lambda, 0, bp.sweeps, bp.report, unit));
  fs::path out_path =
      a.out.empty() ? default_out(a.common, "cavity_instance.csv") : fs::path(a.out);
  ensure_parent(out_path);
  t.save(out_path);
  man.note_output(out_path);
  man.parameters = {{"mode", "instance"}, {"instance", a.instance},   {"lambda", a.lambda},
                    {"tol", a.tol},       {"max_sweeps", a.max_sweeps}, {"damping", a.damping},
                    {"bits", a.bits},     {"full_graph", a.full_graph}};
  save_manifest(man, out_path, t0);
  return kOk;
}

// ---------------------------------------------------------------------------
// diag

struct DiagArgs {
  CommonOpts common;
  std::vector<std::string> in;
  bool core_only = false;
  double eps_sat = 1e-8;
  double eps_unsat = 1e-6;
  double tol = 1e-10;
  std::uint32_t max_iter = 600;
  std::uint32_t inertia_qubits = 12;
  std::uint32_t certificate_qubits = 14;
  std::string out;
};

int cmd_diag(const DiagArgs& a) {
  if (a.in.empty()) throw UsageError{"diag needs at least one --in FILE"};
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentManifest man;
  man.command = "diag";
  man.master_seed = a.common.seed;
  man.parameters = {{"in", a.in},           {"core_only", a.core_only},
                    {"eps_sat", a.eps_sat}, {"eps_unsat", a.eps_unsat},
                    {"tol", a.tol},         {"max_iter", a.max_iter}};

  DecisionThresholds th;
  th.eps_sat = a.eps_sat;
  th.eps_unsat = a.eps_unsat;
  th.inertia_qubits = a.inertia_qubits;
  th.certificate_qubits = a.certificate_qubits;
  LanczosOptions lopt;
  lopt.tol = a.tol;
  lopt.max_iter = a.max_iter;

  std::vector<std::vector<std::string>> rows(a.in.size());
  std::atomic<int> failures{0};
  std::mutex log_mu;

  parallel_for(a.common.jobs, a.in.size(), [&](std::size_t i) {
    try {
      const Instance inst = read_instance(a.in[i]);
      const auto cd = inst.core ? *inst.core : strip_core(inst.graph);
      InteractionGraph g = inst.graph;
      ProjectorSet p = inst.projectors;
      if (a.core_only) {
        if (cd.core_clauses.empty()) throw UnsupportedInstanceError("empty core");
        g = induced_core_graph(inst.graph, cd);
        p = slice_projectors(inst.projectors, cd.core_clauses);
      }
      // the Krylov basis lives in memory: 2^n doubles x iterations
      if (g.n_qubits > 18)
        throw UnsupportedInstanceError("instance too large for the dense Krylov basis (n > 18)");
      const auto mf = find_minifans(g).size();
      const auto h = HamiltonianHandle::build(g, p);
      const auto tr0 = std::chrono::steady_clock::now();
      const auto rep =
          decide_sat(h, RngSpec{inst.rng.seed, inst.rng.stream ^ kDecideBit}, th, lopt);
      const double wall_ms = now_seconds(tr0) * 1e3;
      rows[i] = {std::to_string(inst.graph.n_qubits),
                 std::to_string(cd.core_qubits.size()),
                 std::to_string(cd.core_clauses.size()),
                 fmt_u64(inst.rng.stream),
                 std::to_string(mf),
                 fmt_double(rep.e0),
                 fmt_double(rep.residual),
                 to_string(rep.verdict),
                 std::to_string(rep.iterations),
                 fmt_double(wall_ms)};
    } catch (const std::exception& e) {
      rows[i] = {"0", "0", "0", "0", "0", "nan", "nan", "ERROR", "0", "nan"};
      failures.fetch_add(1);
      std::lock_guard<std::mutex> lock(log_mu);
      std::fprintf(stderr, "row failed (%s): %s\n", a.in[i].c_str(), e.what());
    }
  });

  CsvTable t(kDiagCsvHeader);
  for (auto& r : rows) t.add_row(std::move(r));
  fs::path out_path = a.out.empty() ? default_out(a.common, "diag.csv") : fs::path(a.out);
  ensure_parent(out_path);
  t.save(out_path);
  for (const auto& f : a.in) {
    try {
      man.note_input(f);
    } catch (...) {
    }
  }
  man.note_output(out_path);
  std::printf("wrote %s (%zu rows, %d failed)\n", out_path.string().c_str(), t.rows.size(),
              failures.load());
  save_manifest(man, out_path, t0);
  return failures.load() ? kPartial : kOk;
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentArgs {
  CommonOpts common;
  std::vector<std::uint32_t> cores{8, 10, 12, 14};
  std::uint32_t per_cell = 100;
  double alpha_min = 0.80;
  double alpha_max = 1.05;
  std::uint64_t attempts_cap = 5'000'000;
  double eps_sat = 1e-8;
  double eps_unsat = 1e-6;
  std::uint32_t max_iter = 150;
  std::uint32_t inertia_qubits = 12;
  std::uint32_t certificate_qubits = 14;
  std::string out;
  std::string summary;
};

int cmd_experiment(const ExperimentArgs& a) {
  if (a.cores.empty()) throw UsageError{"experiment needs a non-empty --cores list"};
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentManifest man;
  man.command = "experiment";
  man.master_seed = a.common.seed;
  man.parameters = {{"cores", a.cores},           {"per_cell", a.per_cell},
                    {"alpha_min", a.alpha_min},   {"alpha_max", a.alpha_max},
                    {"attempts_cap", a.attempts_cap}, {"eps_sat", a.eps_sat},
                    {"eps_unsat", a.eps_unsat},   {"max_iter", a.max_iter}};

  // one cell per call, each in its own 2^40 stream region, so results do not
  // depend on the pool size
  std::vector<UnsatExperimentResult> cells(a.cores.size());
  parallel_for(a.common.jobs, a.cores.size(), [&](std::size_t i) {
    UnsatExperimentParams prm;
    prm.core_sizes = {a.cores[i]};
    prm.decidable_per_cell = a.per_cell;
    prm.alpha_min = a.alpha_min;
    prm.alpha_max = a.alpha_max;
    prm.attempts_cap = a.attempts_cap;
    prm.thresholds.eps_sat = a.eps_sat;
    prm.thresholds.eps_unsat = a.eps_unsat;
    prm.lanczos.tol = 1e-10;
    prm.lanczos.max_iter = a.max_iter;
    cells[i] = unsat_core_experiment(
        prm, RngSpec{a.common.seed, static_cast<std::uint64_t>(i) * kRegion});
  });

  CsvTable t(kDiagCsvHeader);
  Json summary = Json::array();
  bool deficit = false;
  for (const auto& res : cells) {
    for (const auto& row : res.rows)
      t.add_row({std::to_string(row.n), std::to_string(row.n_core), std::to_string(row.m_core),
                 fmt_u64(row.stream), std::to_string(row.minifan_count), fmt_double(row.e0),
                 fmt_double(row.residual), to_string(row.verdict),
                 std::to_string(row.iterations), fmt_double(row.wall_ms)});
    for (const auto& c : res.cells) {
      summary.push_back({{"n_core", c.n_core},
                         {"samples", c.samples},
                         {"decidable", c.decidable},
                         {"p_unsat", c.p_unsat},
                         {"standard_error", c.standard_error},
                         {"minifan_fraction", c.minifan_fraction},
                         {"p_unsat_minifan", c.p_unsat_minifan},
                         {"p_unsat_no_minifan", c.p_unsat_no_minifan},
                         {"sample_deficit", c.sample_deficit}});
      deficit = deficit || c.sample_deficit;
      std::printf(
          "N_c=%u: decidable=%u p_unsat=%s (se=%s) minifan_frac=%s p_unsat_no_minifan=%s%s\n",
          c.n_core, c.decidable, fmt_double(c.p_unsat).c_str(),
          fmt_double(c.standard_error).c_str(), fmt_double(c.minifan_fraction).c_str(),
          fmt_double(c.p_unsat_no_minifan).c_str(), c.sample_deficit ? "  [deficit]" : "");
    }
  }

  fs::path out_path = a.out.empty() ? default_out(a.common, "experiment.csv") : fs::path(a.out);
  ensure_parent(out_path);
  t.save(out_path);
  man.note_output(out_path);
  fs::path sum_path =
      a.summary.empty() ? default_out(a.common, "experiment_summary.json") : fs::path(a.summary);
  ensure_parent(sum_path);
  {
    std::ofstream out(sum_path);
    out << summary.dump(1) << '\n';
  }
  man.note_output(sum_path);
  std::printf("wrote %s (%zu rows) and %s\n", out_path.string().c_str(), t.rows.size(),
              sum_path.string().c_str());
  save_manifest(man, out_path, t0);
  return deficit ? kPartial : kOk;
}

// ---------------------------------------------------------------------------
// ledger

struct LedgerArgs {
  CommonOpts common;
  double alpha = -1.0;
  std::vector<double> alphas;
  std::uint32_t k = 3;
  double core_entropy = -1.0;
  std::string provenance = "cavity";
  bool bits = false;
  bool geometric = false;
  std::string out;
  std::string csv;
};

int cmd_ledger(const LedgerArgs& a) {
  if (a.core_entropy < 0.0)
    throw UsageError{"ledger needs --core-entropy (per core qubit, nats)"};
  if ((a.alpha >= 0.0) == !a.alphas.empty())
    throw UsageError{"ledger needs exactly one of --alpha or --alphas"};
  const double unit = a.bits ? 1.0 / std::log(2.0) : 1.0;
  const char* units = a.bits ? "bits" : "nats";
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentManifest man;
  man.command = "ledger";
  man.master_seed = a.common.seed;

  if (!a.alphas.empty()) {
    CsvTable t({"alpha", "gamma", "core_fraction", "hair_fraction", "core_total", "zero_total",
                "hair_bound"});
    int failures = 0;
    for (double alpha : a.alphas) {
      try {
        const auto led = entropy_ledger(alpha, a.k, a.core_entropy, a.provenance);
        t.add_row({fmt_double(alpha), fmt_double(led.gamma), fmt_double(led.core_fraction),
                   fmt_double(led.hair_fraction), fmt_double(led.core_total * unit),
                   fmt_double(led.zero_total * unit), fmt_double(led.hair_bound * unit)});
      } catch (const std::exception& e) {
        t.add_row({fmt_double(alpha), "nan", "nan", "nan", "nan", "nan", "nan"});
        ++failures;
        std::fprintf(stderr, "alpha=%g failed: %s\n", alpha, e.what());
      }
    }
    fs::path out_path =
        a.csv.empty() ? default_out(a.common, "ledger_sweep.csv") : fs::path(a.csv);
    ensure_parent(out_path);
    t.save(out_path);
    man.note_output(out_path);
    std::printf("wrote %s (%zu rows)\n", out_path.string().c_str(), t.rows.size());
    man.parameters = {{"alphas", a.alphas},
                      {"k", a.k},
                      {"core_entropy", a.core_entropy},
                      {"provenance", a.provenance},
                      {"units", units}};
    save_manifest(man, out_path, t0);
    return failures ? kPartial : kOk;
  }

  const auto led = entropy_ledger(a.alpha, a.k, a.core_entropy, a.provenance);
  Json entries = Json::array();
  entries.push_back({{"name", "core"},
                     {"per_qubit", led.core_total * unit},
                     {"per_core_qubit", led.core_entropy_per_core_qubit * unit},
                     {"provenance", led.core_provenance}});
  entries.push_back({{"name", "zero_modes"},
                     {"per_qubit", led.zero_total * unit},
                     {"rate_per_hair_qubit",
                      led.hair_fraction > 0.0 ? led.zero_total / led.hair_fraction * unit : 0.0},
                     {"provenance", "generic zero-mode dimension bound"}});
  entries.push_back({{"name", "hair_spins"},
                     {"per_qubit", led.hair_bound * unit},
                     {"kind", "upper bound"},
                     {"provenance", "free hair spin count"}});
  if (a.geometric) {
    const auto stats = core_stats(a.alpha, a.k);
    const double per_spin = geometric_hair_entropy(1.0, a.alpha, stats->nc_frac, stats->mc_frac);
    entries.push_back({{"name", "hair_geometric"},
                       {"per_qubit", per_spin * led.hair_fraction * unit},
                       {"per_hair_qubit", per_spin * unit},
                       {"provenance", "uncovered-fraction estimate"}});
  }
  Json j = {{"alpha", led.alpha},
            {"k", led.k},
            {"units", units},
            {"core_fraction", led.core_fraction},
            {"hair_fraction", led.hair_fraction},
            {"gamma", led.gamma},
            {"entries", entries}};

  std::printf("core        S/N  = %s  [%s]\n", fmt_double(led.core_total * unit).c_str(),
              led.core_provenance.c_str());
  std::printf("zero modes  S/N  = %s  [generic dimension bound]\n",
              fmt_double(led.zero_total * unit).c_str());
  std::printf("hair spins  S/N <= %s  [free spin bound]\n",
              fmt_double(led.hair_bound * unit).c_str());

  fs::path out_path = a.out.empty() ? default_out(a.common, "ledger.json") : fs::path(a.out);
  ensure_parent(out_path);
  {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open for writing: " + out_path.string());
    out << j.dump(1) << '\n';
  }
  man.note_output(out_path);
  man.parameters = {{"alpha", a.alpha},
                    {"k", a.k},
                    {"core_entropy", a.core_entropy},
                    {"provenance", a.provenance},
                    {"units", units},
                    {"geometric", a.geometric}};
  save_manifest(man, out_path, t0);
  return kOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string manifest;
  bool verify = false;
  std::string dir;
};

int cmd_report(const ReportArgs& a) {
  if (a.manifest.empty()) throw UsageError{"report needs --manifest FILE"};
  Json j;
  {
    std::ifstream in(a.manifest);
    if (!in) throw std::runtime_error("cannot open: " + a.manifest);
    in >> j;
  }
  std::printf("command: %s\n", j.value("command", std::string("?")).c_str());
  std::printf("toolkit: %s\n", j.value("toolkit_version", std::string("?")).c_str());
  std::printf("seed: %llu\n",
              static_cast<unsigned long long>(j.value("master_seed", std::uint64_t(0))));
  std::printf("wall: %s s\n", fmt_double(j.value("wall_seconds", 0.0)).c_str());
  std::printf("parameters: %s\n", j.value("parameters", Json::object()).dump().c_str());
  const Json inputs = j.value("input_digests", Json::object());
  const Json outputs = j.value("output_digests", Json::object());
  for (const auto& [name, digest] : inputs.items())
    std::printf("input  %s  %s\n", digest.get<std::string>().c_str(), name.c_str());
  for (const auto& [name, digest] : outputs.items())
    std::printf("output %s  %s\n", digest.get<std::string>().c_str(), name.c_str());

  if (!a.verify) return kOk;
  const fs::path dir = a.dir.empty() ? fs::path(a.manifest).parent_path() : fs::path(a.dir);
  bool all_ok = true;
  for (const auto& [name, digest] : outputs.items()) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) {
      std::printf("MISSING  %s\n", p.string().c_str());
      all_ok = false;
      continue;
    }
    const std::string got = hex64(digest_result_file(p));
    const bool ok = got == digest.get<std::string>();
    std::printf("%s  %s\n", ok ? "OK      " : "MISMATCH", p.string().c_str());
    all_ok = all_ok && ok;
  }
  return all_ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum satisfiability toolkit: instances, cores, dimers, cavity sweeps,\n"
               "diagonalization, and entropy ledgers. Entropies are in nats unless --bits.\n"
               "Exit codes: 0 ok, 1 usage, 2 failure, 3 partial batch."};
  app.set_version_flag("--version", std::string(kToolkitVersion));
  app.set_config("--config", "",
                 "key = value file; [command] sections scope keys; command-line flags win");
  app.require_subcommand(1);

  GenArgs gen;
  auto* cgen = app.add_subcommand("gen", "sample an instance ensemble to JSON files");
  add_common(cgen, gen.common);
  cgen->add_option("--n", gen.n, "qubit count");
  cgen->add_option("--alpha", gen.alpha, "clause density; m = round(alpha*n)");
  cgen->add_option("--m", gen.m, "clause count (alternative to --alpha)");
  cgen->add_option("--k", gen.k, "clause arity")->check(CLI::Range(2u, 16u));
  cgen->add_option("--mode", gen.mode, "projector mode: generic or product");
  cgen->add_option("--stream", gen.stream, "first rng stream id");
  cgen->add_option("--count", gen.count, "instances to write at consecutive streams");
  cgen->add_option("--out", gen.out, "output path (single instance only)");

  CoreArgs core;
  auto* ccore = app.add_subcommand("core", "leaf removal and analytic core statistics");
  add_common(ccore, core.common);
  ccore->add_option("--in", core.in, "instance file; writes a copy with the core attached");
  ccore->add_option("--out", core.out, "output path for the core-annotated copy");
  ccore->add_option("--alphas", core.alphas, "densities for an analytic CSV sweep")
      ->delimiter(',');
  ccore->add_option("--k", core.k, "clause arity");
  ccore->add_option("--csv", core.csv, "CSV output path");
  ccore->add_flag("--empirical", core.empirical, "sampled core fractions vs analytic");
  ccore->add_option("--alpha", core.alpha, "density for --empirical");
  ccore->add_option("--n", core.n, "qubits per sample for --empirical");
  ccore->add_option("--samples", core.samples, "sample count for --empirical");

  DimersArgs dimers;
  auto* cdim = app.add_subcommand("dimers", "covering counts per instance");
  add_common(cdim, dimers.common);
  cdim->add_option("--in", dimers.in, "instance files")->delimiter(',');
  cdim->add_flag("--core-only", dimers.core_only, "count on the 2-core only");
  cdim->add_option("--count-bound", dimers.count_bound, "stop counting past this (0 = exact)");
  cdim->add_option("--list-cap", dimers.list_cap, "keep at most this many coverings");
  cdim->add_option("--out", dimers.out, "CSV output path");
  cdim->add_option("--covering-out", dimers.covering_out,
                   "write the first covering as JSON (single input)");

  CavityArgs cavity;
  auto* ccav = app.add_subcommand("cavity", "monomer-dimer free energy: BP and populations");
  add_common(ccav, cavity.common);
  ccav->add_flag("--regular", cavity.regular, "regular-graph fixed point over --lambdas");
  ccav->add_flag("--figure5", cavity.figure5, "population dynamics over a (beta, lambda) grid");
  ccav->add_flag("--figure6", cavity.figure6, "exact counts vs BP per core instance");
  ccav->add_option("--instance", cavity.instance, "single-instance BP on this file");
  ccav->add_flag("--full", cavity.full_graph, "analyze the whole graph, not the core");
  ccav->add_flag("--extrapolate", cavity.extrapolate, "fit S(lambda) and report s_infinity");
  ccav->add_flag("--bits", cavity.bits, "emit entropies in bits instead of nats");
  ccav->add_option("--in", cavity.in, "instance files for --figure6")->delimiter(',');
  ccav->add_option("--betas", cavity.betas, "core densities for --figure5")->delimiter(',');
  ccav->add_option("--lambdas", cavity.lambdas, "fugacity grid")->delimiter(',');
  ccav->add_option("--lambda", cavity.lambda, "fugacity for --figure6/--instance");
  ccav->add_option("--k", cavity.k, "clause arity");
  ccav->add_option("--pop", cavity.pop, "population size");
  ccav->add_option("--sweeps", cavity.sweeps, "population sweeps");
  ccav->add_option("--samples-per-sweep", cavity.samples_per_sweep, "observable samples");
  ccav->add_option("--burn-in", cavity.burn_in, "fraction of sweeps discarded");
  ccav->add_option("--drift-tol", cavity.drift_tol, "first/second half drift bound");
  ccav->add_option("--tol", cavity.tol, "BP message tolerance");
  ccav->add_option("--max-sweeps", cavity.max_sweeps, "BP sweep cap");
  ccav->add_option("--damping", cavity.damping, "BP damping in [0,1)");
  ccav->add_option("--sample-cores", cavity.sample_cores,
                   "figure6: rejection-sample this many critical cores");
  ccav->add_option("--core-min", cavity.core_min, "smallest accepted core");
  ccav->add_option("--core-max", cavity.core_max, "largest accepted core");
  ccav->add_option("--alpha", cavity.alpha, "parent density for --sample-cores");
  ccav->add_option("--parent-n", cavity.parent_n, "parent qubits for --sample-cores");
  ccav->add_option("--attempts-cap", cavity.attempts_cap, "parent draws allowed");
  ccav->add_option("--out", cavity.out, "CSV output path");

  DiagArgs diag;
  auto* cdiag = app.add_subcommand("diag", "ground-energy verdicts for instance files");
  add_common(cdiag, diag.common);
  cdiag->add_option("--in", diag.in, "instance files")->delimiter(',');
  cdiag->add_flag("--core-only", diag.core_only, "diagonalize the core subgraph");
  cdiag->add_option("--eps-sat", diag.eps_sat, "e0 below: satisfiable");
  cdiag->add_option("--eps-unsat", diag.eps_unsat, "e0 - residual above: unsatisfiable");
  cdiag->add_option("--tol", diag.tol, "Lanczos residual tolerance");
  cdiag->add_option("--max-iter", diag.max_iter, "Lanczos iteration cap");
  cdiag->add_option("--inertia-qubits", diag.inertia_qubits,
                    "dense inertia fallback up to this size");
  cdiag->add_option("--certificate-qubits", diag.certificate_qubits,
                    "sparse Cholesky certificate fallback up to this size");
  cdiag->add_option("--out", diag.out, "CSV output path");

  ExperimentArgs exp;
  auto* cexp = app.add_subcommand("experiment",
                                  "unsat frequency on critically overconstrained cores");
  add_common(cexp, exp.common);
  cexp->add_option("--cores", exp.cores, "core sizes (cells)")->delimiter(',');
  cexp->add_option("--per-cell", exp.per_cell, "decidable samples per cell");
  cexp->add_option("--alpha-min", exp.alpha_min, "parent density window low edge");
  cexp->add_option("--alpha-max", exp.alpha_max, "parent density window high edge");
  cexp->add_option("--attempts-cap", exp.attempts_cap, "parent draws per cell");
  cexp->add_option("--eps-sat", exp.eps_sat, "e0 below: satisfiable");
  cexp->add_option("--eps-unsat", exp.eps_unsat, "e0 - residual above: unsatisfiable");
  cexp->add_option("--max-iter", exp.max_iter, "Lanczos iteration cap");
  cexp->add_option("--out", exp.out, "CSV output path");
  cexp->add_option("--summary", exp.summary, "summary JSON path");

  LedgerArgs ledger;
  auto* cled = app.add_subcommand("ledger", "entropy contributions with provenance");
  add_common(cled, ledger.common);
  cled->add_option("--alpha", ledger.alpha, "clause density");
  cled->add_option("--alphas", ledger.alphas, "densities for a CSV sweep")->delimiter(',');
  cled->add_option("--k", ledger.k, "clause arity");
  cled->add_option("--core-entropy", ledger.core_entropy, "S/N_c input, nats");
  cled->add_option("--provenance", ledger.provenance, "where the core entropy came from");
  cled->add_flag("--bits", ledger.bits, "emit in bits instead of nats");
  cled->add_flag("--geometric", ledger.geometric, "include the uncovered-fraction hair estimate");
  cled->add_option("--out", ledger.out, "JSON output path");
  cled->add_option("--csv", ledger.csv, "CSV output path for --alphas");

  ReportArgs report;
  auto* crep = app.add_subcommand("report", "print or verify a manifest");
  crep->add_option("--manifest", report.manifest, "manifest file");
  crep->add_flag("--verify", report.verify, "recompute output digests and compare");
  crep->add_option("--dir", report.dir, "directory holding the outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand(cgen)) return cmd_gen(gen);
    if (app.got_subcommand(ccore)) return cmd_core(core);
    if (app.got_subcommand(cdim)) return cmd_dimers(dimers);
    if (app.got_subcommand(ccav)) return cmd_cavity(cavity);
    if (app.got_subcommand(cdiag)) return cmd_diag(diag);
    if (app.got_subcommand(cexp)) return cmd_experiment(exp);
    if (app.got_subcommand(cled)) return cmd_ledger(ledger);
    if (app.got_subcommand(crep)) return cmd_report(report);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.message.c_str());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
