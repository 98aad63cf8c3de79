#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "qsat/qsat.hpp"

using namespace qsat;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  const auto stamp =
      std::chrono::steady_clock::now().time_since_epoch().count();
  fs::path d = fs::temp_directory_path() /
               ("qsat_cli_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(stamp));
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QSAT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  return cells;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

Instance make_instance(ProjectorMode mode, RngSpec g_rng, RngSpec p_rng) {
  Instance inst;
  inst.graph = sample_er_graph(8, 6, 3, g_rng);
  inst.projectors = sample_projectors(inst.graph, mode, p_rng);
  inst.rng = g_rng;
  return inst;
}

}  // namespace

TEST_CASE("instance files round trip", "[io]") {
  const auto dir = fresh_dir("roundtrip");
  for (auto mode : {ProjectorMode::Generic, ProjectorMode::Product}) {
    Instance inst = make_instance(mode, {200, 0}, {201, 0});
    inst.core = strip_core(inst.graph);
    const fs::path path = dir / (to_string(mode) + ".json");
    write_instance(path, inst);
    const Instance back = read_instance(path);

    REQUIRE(back.graph.n_qubits == inst.graph.n_qubits);
    REQUIRE(back.graph.k == inst.graph.k);
    REQUIRE(back.graph.clauses == inst.graph.clauses);
    REQUIRE(back.rng == inst.rng);
    REQUIRE(back.projectors.mode == mode);
    if (mode == ProjectorMode::Generic) {
      REQUIRE(back.projectors.generic == inst.projectors.generic);
    } else {
      REQUIRE(back.projectors.product == inst.projectors.product);
    }
    REQUIRE(back.core.has_value());
    REQUIRE(back.core->core_qubits == inst.core->core_qubits);
    REQUIRE(back.core->core_clauses == inst.core->core_clauses);
    REQUIRE(back.core->hair_qubits == inst.core->hair_qubits);
    REQUIRE(back.core->hair_clauses == inst.core->hair_clauses);
  }
}

TEST_CASE("malformed instance documents are rejected", "[io]") {
  Instance inst = make_instance(ProjectorMode::Generic, {202, 0}, {203, 0});
  Json j = instance_to_json(inst);

  SECTION("format version") {
    j["version"] = 99;
    REQUIRE_THROWS_AS(instance_from_json(j), ContractViolation);
  }
  SECTION("missing projector row") {
    j["projectors"]["amplitudes"].erase(0);
    REQUIRE_THROWS_AS(instance_from_json(j), ContractViolation);
  }
  SECTION("unnormalized amplitudes") {
    j["projectors"]["amplitudes"][0][0][0] = 5.0;
    REQUIRE_THROWS_AS(instance_from_json(j), ContractViolation);
  }
  SECTION("unknown mode") {
    j["projectors"]["mode"] = "stabilized";
    REQUIRE_THROWS_AS(instance_from_json(j), ContractViolation);
  }
}

TEST_CASE("coverings serialize as pair arrays", "[io]") {
  DimerCovering dc;
  dc.pairs = {{0, 3}, {1, 5}, {2, 0}};
  const Json j = covering_to_json(dc);
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 3);
  REQUIRE(j[1][0] == 1);
  REQUIRE(j[1][1] == 5);
  const DimerCovering back = covering_from_json(j);
  REQUIRE(back.pairs == dc.pairs);
  REQUIRE_THROWS_AS(covering_from_json(Json::array({Json::array({1, 2, 3})})),
                    ContractViolation);
}

TEST_CASE("csv tables enforce their width", "[io]") {
  CsvTable t({"a", "b"});
  t.add_row({"1", "2"});
  REQUIRE_THROWS_AS(t.add_row({"1"}), ContractViolation);
  REQUIRE(t.to_string() == "a,b\n1,2\n");

  // documented schemas
  REQUIRE(kCoreCsvHeader ==
          std::vector<std::string>{"alpha", "lambda_star", "nc_frac", "mc_frac", "beta"});
  REQUIRE(kDimersCsvHeader ==
          std::vector<std::string>{"instance", "N_c", "M_c", "count", "log_count"});
  REQUIRE(kDiagCsvHeader ==
          std::vector<std::string>{"N", "N_c", "M_c", "seed", "minifan_count", "e0",
                                   "residual", "verdict", "iters", "wall_ms"});
  const std::vector<std::string> grid_prefix = {"beta",      "lambda",          "pop_size",
                                                "sweeps",    "F_density",       "occupancy",
                                                "entropy_density", "converged"};
  REQUIRE(kCavityCsvHeader.size() >= grid_prefix.size());
  for (std::size_t i = 0; i < grid_prefix.size(); ++i)
    REQUIRE(kCavityCsvHeader[i] == grid_prefix[i]);
}

TEST_CASE("result digests ignore wall-clock columns", "[io]") {
  const auto dir = fresh_dir("digest");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name);
    out << text;
    return dir / name;
  };
  const auto a = write("a.csv", "e0,wall_ms\n0.5,12.3\n0.25,99\n");
  const auto b = write("b.csv", "e0,wall_ms\n0.5,7650.1\n0.25,1\n");
  const auto c = write("c.csv", "e0,wall_ms\n0.75,12.3\n0.25,99\n");
  REQUIRE(digest_result_file(a) == digest_result_file(b));
  REQUIRE(digest_result_file(a) != digest_result_file(c));

  // only .csv files get the column treatment
  const auto ta = write("a.txt", "e0,wall_ms\n0.5,12.3\n");
  const auto tb = write("b.txt", "e0,wall_ms\n0.5,7650.1\n");
  REQUIRE(digest_result_file(ta) != digest_result_file(tb));
}

TEST_CASE("hashes are stable", "[io]") {
  REQUIRE(fnv1a("") == 14695981039346656037ull);
  REQUIRE(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  REQUIRE(hex64(0) == "0000000000000000");
  REQUIRE(hex64(0xdeadbeefull) == "00000000deadbeef");
}

TEST_CASE("manifests record digests and timings", "[io]") {
  const auto dir = fresh_dir("manifest");
  {
    std::ofstream out(dir / "result.csv");
    out << "alpha,beta\n0.9,1\n";
  }
  ExperimentManifest man;
  man.command = "demo";
  man.master_seed = 42;
  man.parameters = {{"alpha", 0.9}};
  man.note_output(dir / "result.csv");
  man.stages.push_back({"solve", 1.5});
  man.wall_seconds = 2.0;
  man.save(dir / "demo.manifest.json");

  std::ifstream in(dir / "demo.manifest.json");
  Json j;
  in >> j;
  REQUIRE(j["command"] == "demo");
  REQUIRE(j["master_seed"] == 42);
  REQUIRE(j["toolkit_version"] == kToolkitVersion);
  REQUIRE(j["output_digests"]["result.csv"] ==
          hex64(digest_result_file(dir / "result.csv")));
  REQUIRE(j["stages"][0]["stage"] == "solve");
}

TEST_CASE("distinct streams give distinct instances", "[io]") {
  std::set<std::string> seen;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto g = sample_er_graph(20, 15, 3, {7, t});
    const auto p = sample_projectors(g, ProjectorMode::Generic, {7, t ^ (1ull << 61)});
    Instance inst{g, p, {7, t}, std::nullopt};
    seen.insert(instance_to_json(inst).dump());
  }
  REQUIRE(seen.size() == 100);
}

// ---------------------------------------------------------------------------
// End-to-end command runs

TEST_CASE("cli gen writes a loadable instance with manifest", "[cli]") {
  const auto dir = fresh_dir("gen");
  REQUIRE(run_cli("gen --n 12 --alpha 0.75 --k 3 --mode generic --seed 7 --out-dir " +
                  dir.string()) == 0);
  const fs::path inst_path = dir / "instance_s7_t0.json";
  REQUIRE(fs::exists(inst_path));
  const Instance inst = read_instance(inst_path);
  REQUIRE(inst.graph.n_qubits == 12);
  REQUIRE(inst.graph.clauses.size() == 9);  // m = round(0.75 * 12)
  REQUIRE(inst.rng == RngSpec{7, 0});

  const fs::path man_path = dir / "instance_s7_t0.json.manifest.json";
  REQUIRE(fs::exists(man_path));
  Json man;
  std::ifstream(man_path) >> man;
  REQUIRE(man["command"] == "gen");
  REQUIRE(man["master_seed"] == 7);
  REQUIRE(man["output_digests"].size() == 1);
  REQUIRE(man["output_digests"]["instance_s7_t0.json"] ==
          hex64(digest_result_file(inst_path)));
}

TEST_CASE("cli runs are deterministic", "[cli]") {
  const auto d1 = fresh_dir("det1");
  const auto d2 = fresh_dir("det2");
  const std::string flags = "gen --n 16 --m 11 --mode product --seed 99 --stream 5 --out-dir ";
  REQUIRE(run_cli(flags + d1.string()) == 0);
  REQUIRE(run_cli(flags + d2.string()) == 0);
  REQUIRE(slurp(d1 / "instance_s99_t5.json") == slurp(d2 / "instance_s99_t5.json"));

  REQUIRE(run_cli("core --alphas 0.85,0.917 --csv " + (d1 / "cs.csv").string()) == 0);
  REQUIRE(run_cli("core --alphas 0.85,0.917 --csv " + (d2 / "cs.csv").string()) == 0);
  REQUIRE(slurp(d1 / "cs.csv") == slurp(d2 / "cs.csv"));
}

TEST_CASE("cli exit codes separate usage, failure, and partial batches", "[cli]") {
  const auto dir = fresh_dir("exit");
  REQUIRE(run_cli("") == 1);                       // missing subcommand
  REQUIRE(run_cli("gen --n 10") == 1);             // neither --alpha nor --m
  REQUIRE(run_cli("gen --n 10 --alpha 0.8 --m 8") == 1);
  REQUIRE(run_cli("core --in " + (dir / "missing.json").string()) == 2);
  // a bad row in a batch is recorded, the batch continues
  REQUIRE(run_cli("diag --in " + (dir / "missing.json").string() + " --out " +
                  (dir / "d.csv").string()) == 3);
  const auto lines = read_lines(dir / "d.csv");
  REQUIRE(lines.size() == 2);
  REQUIRE(split_csv_line(lines[1])[7] == "ERROR");
}

TEST_CASE("cli core annotates a copy and never touches the input", "[cli]") {
  const auto dir = fresh_dir("core");
  REQUIRE(run_cli("gen --n 30 --alpha 0.95 --seed 11 --out " + (dir / "inst.json").string()) ==
          0);
  const std::string before = slurp(dir / "inst.json");

  REQUIRE(run_cli("core --in " + (dir / "inst.json").string() + " --out " +
                  (dir / "inst.json").string()) == 1);  // refuses overwrite
  REQUIRE(run_cli("core --in " + (dir / "inst.json").string() + " --out-dir " + dir.string()) ==
          0);
  REQUIRE(slurp(dir / "inst.json") == before);

  const Instance annotated = read_instance(dir / "inst.core.json");
  REQUIRE(annotated.core.has_value());
  const auto cd = strip_core(annotated.graph);
  REQUIRE(annotated.core->core_qubits == cd.core_qubits);
  REQUIRE(annotated.core->core_clauses == cd.core_clauses);
}

TEST_CASE("cli dimers matches the library count", "[cli]") {
  const auto dir = fresh_dir("dimers");
  REQUIRE(run_cli("gen --n 9 --m 6 --mode product --seed 31 --out " +
                  (dir / "inst.json").string()) == 0);
  REQUIRE(run_cli("dimers --in " + (dir / "inst.json").string() + " --out " +
                  (dir / "dimers.csv").string()) == 0);
  const auto lines = read_lines(dir / "dimers.csv");
  REQUIRE(lines.size() == 2);
  const auto cells = split_csv_line(lines[1]);
  REQUIRE(cells[0] == "inst");

  const Instance inst = read_instance(dir / "inst.json");
  const auto res =
      enumerate_coverings(BipartiteIncidence::from_graph(inst.graph), EnumerationOptions{});
  REQUIRE(cells[3] == res.count.str());
}

TEST_CASE("cli ledger emits the three provenance entries", "[cli]") {
  const auto dir = fresh_dir("ledger");
  REQUIRE(run_cli("ledger --alpha 0.917 --core-entropy 0.23 --provenance cavity --out " +
                  (dir / "ledger.json").string()) == 0);
  Json j;
  std::ifstream(dir / "ledger.json") >> j;
  REQUIRE(j["units"] == "nats");
  REQUIRE(j["entries"].size() == 3);
  REQUIRE(j["entries"][0]["name"] == "core");
  REQUIRE(j["entries"][0]["provenance"] == "cavity");
  REQUIRE(j["entries"][1]["name"] == "zero_modes");
  REQUIRE(j["entries"][2]["name"] == "hair_spins");
  REQUIRE(j["entries"][0]["per_qubit"].get<double>() == Catch::Approx(0.145264412).margin(1e-8));
  REQUIRE(j["entries"][1]["per_qubit"].get<double>() == Catch::Approx(0.196557491).margin(1e-8));
  REQUIRE(j["entries"][2]["per_qubit"].get<double>() == Catch::Approx(0.255366234).margin(1e-8));

  REQUIRE(run_cli("ledger --alpha 0.917 --core-entropy 0.23 --bits --out " +
                  (dir / "bits.json").string()) == 0);
  Json jb;
  std::ifstream(dir / "bits.json") >> jb;
  REQUIRE(jb["units"] == "bits");
  REQUIRE(jb["entries"][0]["per_qubit"].get<double>() ==
          Catch::Approx(0.145264412 / std::log(2.0)).margin(1e-8));
}

TEST_CASE("cli report verifies output digests", "[cli]") {
  const auto dir = fresh_dir("report");
  REQUIRE(run_cli("gen --n 10 --m 7 --seed 3 --out " + (dir / "i.json").string()) == 0);
  const std::string man = (dir / "i.json.manifest.json").string();
  REQUIRE(run_cli("report --manifest " + man + " --verify") == 0);
  {
    std::ofstream out(dir / "i.json", std::ios::app);
    out << " ";
  }
  REQUIRE(run_cli("report --manifest " + man + " --verify") == 2);
}

TEST_CASE("cli cavity regular emits the grid schema", "[cli]") {
  const auto dir = fresh_dir("cavity");
  REQUIRE(run_cli("cavity --regular --lambdas 100 --out " + (dir / "reg.csv").string()) == 0);
  const auto lines = read_lines(dir / "reg.csv");
  REQUIRE(lines.size() == 2);
  std::string header;
  for (std::size_t i = 0; i < kCavityCsvHeader.size(); ++i)
    header += (i ? "," : "") + kCavityCsvHeader[i];
  REQUIRE(lines[0] == header);
  const auto cells = split_csv_line(lines[1]);
  REQUIRE(cells[0] == "1");
  const auto fp = regular_fixed_point(100.0);
  REQUIRE(std::stod(cells[4]) == Catch::Approx(fp.report.free_energy_density).epsilon(1e-14));
  REQUIRE(std::stod(cells[6]) == Catch::Approx(fp.report.entropy_density).epsilon(1e-14));
}
