#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "dimer.hpp"
#include "errors.hpp"
#include "hypergraph.hpp"

namespace qsat {

inline constexpr const char* kToolkitVersion = "1.0.0";
inline constexpr int kInstanceFormatVersion = 1;

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Instance files

struct Instance {
  InteractionGraph graph;
  ProjectorSet projectors;
  RngSpec rng;
  std::optional<CoreDecomposition> core;
};

namespace detail {

inline Json complex_pair(Cplx z) { return Json::array({z.real(), z.imag()}); }

inline Cplx complex_from(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ContractViolation("amplitude must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void check_unit_norm(double norm_sq, const char* what) {
  if (std::abs(norm_sq - 1.0) > 2e-12)
    throw ContractViolation(std::string(what) + " is not unit-normalized");
}

}  // namespace detail

inline Json instance_to_json(const Instance& inst) {
  Json j;
  j["version"] = kInstanceFormatVersion;
  j["n"] = inst.graph.n_qubits;
  j["k"] = inst.graph.k;
  j["clauses"] = Json::array();
  for (const auto& c : inst.graph.clauses) j["clauses"].push_back(c);

  Json amps = Json::array();
  if (inst.projectors.mode == ProjectorMode::Generic) {
    for (const auto& v : inst.projectors.generic) {
      Json row = Json::array();
      for (Cplx z : v) row.push_back(detail::complex_pair(z));
      amps.push_back(std::move(row));
    }
  } else {
    for (const auto& factors : inst.projectors.product) {
      Json row = Json::array();
      for (const auto& s : factors)
        row.push_back(Json::array({detail::complex_pair(s[0]), detail::complex_pair(s[1])}));
      amps.push_back(std::move(row));
    }
  }
  j["projectors"] = {{"mode", to_string(inst.projectors.mode)}, {"amplitudes", std::move(amps)}};
  j["rng"] = {{"seed", inst.rng.seed}, {"stream", inst.rng.stream}};

  if (inst.core) {
    j["core"] = {{"core_qubits", inst.core->core_qubits},
                 {"core_clauses", inst.core->core_clauses},
                 {"hair_qubits", inst.core->hair_qubits},
                 {"hair_clauses", inst.core->hair_clauses}};
  }
  return j;
}

inline Instance instance_from_json(const Json& j) {
  if (!j.contains("version") || j["version"].get<int>() != kInstanceFormatVersion)
    throw ContractViolation("unsupported instance format version");
  Instance inst;
  inst.graph.n_qubits = j.at("n").get<std::uint32_t>();
  inst.graph.k = j.at("k").get<std::uint32_t>();
  for (const auto& jc : j.at("clauses"))
    inst.graph.clauses.push_back(jc.get<std::vector<std::uint32_t>>());
  validate(inst.graph);

  const auto& jp = j.at("projectors");
  const std::string mode = jp.at("mode").get<std::string>();
  const auto& amps = jp.at("amplitudes");
  if (amps.size() != inst.graph.clauses.size())
    throw ContractViolation("projector count != clause count");
  const std::size_t sub = std::size_t(1) << inst.graph.k;
  if (mode == "generic") {
    inst.projectors.mode = ProjectorMode::Generic;
    for (const auto& row : amps) {
      if (row.size() != sub) throw ContractViolation("generic amplitude block has wrong size");
      std::vector<Cplx> v(sub);
      double ns = 0.0;
      for (std::size_t t = 0; t < sub; ++t) {
        v[t] = detail::complex_from(row[t]);
        ns += std::norm(v[t]);
      }
      detail::check_unit_norm(ns, "projector vector");
      inst.projectors.generic.push_back(std::move(v));
    }
  } else if (mode == "product") {
    inst.projectors.mode = ProjectorMode::Product;
    for (const auto& row : amps) {
      if (row.size() != inst.graph.k)
        throw ContractViolation("product amplitude block has wrong arity");
      std::vector<Spinor> factors;
      for (const auto& js : row) {
        if (!js.is_array() || js.size() != 2)
          throw ContractViolation("spinor must hold two amplitudes");
        Spinor s{detail::complex_from(js[0]), detail::complex_from(js[1])};
        detail::check_unit_norm(std::norm(s[0]) + std::norm(s[1]), "product factor");
        factors.push_back(s);
      }
      inst.projectors.product.push_back(std::move(factors));
    }
  } else {
    throw ContractViolation("unknown projector mode: " + mode);
  }
  inst.projectors.k = inst.graph.k;

  const auto& jr = j.at("rng");
  inst.rng.seed = jr.at("seed").get<std::uint64_t>();
  inst.rng.stream = jr.at("stream").get<std::uint64_t>();

  if (j.contains("core")) {
    CoreDecomposition cd;
    const auto& jcore = j["core"];
    cd.core_qubits = jcore.at("core_qubits").get<std::vector<std::uint32_t>>();
    cd.core_clauses = jcore.at("core_clauses").get<std::vector<std::uint32_t>>();
    cd.hair_qubits = jcore.at("hair_qubits").get<std::vector<std::uint32_t>>();
    cd.hair_clauses = jcore.at("hair_clauses").get<std::vector<std::uint32_t>>();
    inst.core = std::move(cd);
  }
  return inst;
}

inline void write_instance(const std::filesystem::path& path, const Instance& inst) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << instance_to_json(inst).dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline Instance read_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  Json j;
  in >> j;
  return instance_from_json(j);
}

// ---------------------------------------------------------------------------
// Coverings

inline Json covering_to_json(const DimerCovering& dc) {
  Json arr = Json::array();
  for (const auto& [m, q] : dc.pairs) arr.push_back(Json::array({m, q}));
  return arr;
}

inline DimerCovering covering_from_json(const Json& j) {
  DimerCovering dc;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw ContractViolation("pair must be [clause, qubit]");
    dc.pairs.emplace_back(p[0].get<std::uint32_t>(), p[1].get<std::uint32_t>());
  }
  return dc;
}

// ---------------------------------------------------------------------------
// CSV tables

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  explicit CsvTable(std::vector<std::string> head) : header(std::move(head)) {}

  void add_row(std::vector<std::string> cells) {
    if (cells.size() != header.size())
      throw ContractViolation("csv row width does not match header");
    rows.push_back(std::move(cells));
  }

  std::string to_string() const {
    std::ostringstream out;
    auto emit = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ',';
        out << cells[i];
      }
      out << '\n';
    };
    emit(header);
    for (const auto& r : rows) emit(r);
    return out.str();
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << to_string();
    if (!out) throw std::runtime_error("write failed: " + path.string());
  }
};

inline const std::vector<std::string> kCoreCsvHeader = {"alpha", "lambda_star", "nc_frac",
                                                        "mc_frac", "beta"};
inline const std::vector<std::string> kCavityCsvHeader = {
    "beta",      "lambda",    "pop_size", "sweeps", "F_density",
    "occupancy", "entropy_density", "converged", "covering_entropy_density"};
inline const std::vector<std::string> kDimersCsvHeader = {"instance", "N_c", "M_c", "count",
                                                          "log_count"};
inline const std::vector<std::string> kDiagCsvHeader = {
    "N",  "N_c",      "M_c",     "seed",  "minifan_count",
    "e0", "residual", "verdict", "iters", "wall_ms"};

// ---------------------------------------------------------------------------
// Digests and manifests

inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Digest of a result file. Wall-clock columns are not reproducible, so for
// CSV files any column named wall_ms is blanked before hashing; every other
// byte participates.
inline std::uint64_t digest_result_file(const std::filesystem::path& path) {
  std::string text = slurp(path);
  if (path.extension() == ".csv") {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    if (!lines.empty()) {
      std::vector<std::size_t> skip;
      {
        std::istringstream hs(lines[0]);
        std::string cell;
        std::size_t idx = 0;
        while (std::getline(hs, cell, ',')) {
          if (cell == "wall_ms") skip.push_back(idx);
          ++idx;
        }
      }
      if (!skip.empty()) {
        for (std::size_t r = 1; r < lines.size(); ++r) {
          std::istringstream rs(lines[r]);
          std::string cell;
          std::vector<std::string> cells;
          while (std::getline(rs, cell, ',')) cells.push_back(cell);
          for (auto s : skip)
            if (s < cells.size()) cells[s] = "-";
          std::string joined;
          for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) joined += ',';
            joined += cells[i];
          }
          lines[r] = joined;
        }
        text.clear();
        for (const auto& l : lines) {
          text += l;
          text += '\n';
        }
      }
    }
  }
  return fnv1a(text);
}

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

// Record of one command run: everything needed to reproduce the outputs and
// check they came out identical (modulo wall-clock columns).
struct ExperimentManifest {
  std::string command;
  Json parameters;
  std::uint64_t master_seed = 0;
  std::string toolkit_version = kToolkitVersion;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> output_digests;
  double wall_seconds = 0.0;
  std::vector<StageTiming> stages;

  void note_input(const std::filesystem::path& p) {
    input_digests[p.filename().string()] = hex64(digest_result_file(p));
  }
  void note_output(const std::filesystem::path& p) {
    output_digests[p.filename().string()] = hex64(digest_result_file(p));
  }

  Json to_json() const {
    Json j;
    j["command"] = command;
    j["parameters"] = parameters;
    j["master_seed"] = master_seed;
    j["toolkit_version"] = toolkit_version;
    j["input_digests"] = input_digests;
    j["output_digests"] = output_digests;
    j["wall_seconds"] = wall_seconds;
    Json st = Json::array();
    for (const auto& s : stages) st.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    j["stages"] = std::move(st);
    return j;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << to_json().dump(1) << '\n';
  }
};

}  // namespace qsat
