#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "qsat/dimer.hpp"
#include "qsat/spectrum.hpp"

using namespace qsat;

namespace {

InteractionGraph graph_of(std::uint32_t n, std::vector<Clause> clauses) {
  InteractionGraph g;
  g.n_qubits = n;
  g.k = 3;
  g.clauses = std::move(clauses);
  return g;
}

std::vector<Cplx> random_vector(std::uint64_t dim, SplitRng& r) {
  std::vector<Cplx> v(dim);
  for (auto& x : v) x = Cplx{r.uniform01() - 0.5, r.uniform01() - 0.5};
  return v;
}

std::vector<Cplx> dense_apply(const std::vector<Cplx>& a, const std::vector<Cplx>& v) {
  const std::size_t n = v.size();
  std::vector<Cplx> out(n, Cplx{0.0, 0.0});
  for (std::size_t col = 0; col < n; ++col)
    for (std::size_t row = 0; row < n; ++row) out[row] += a[col * n + row] * v[col];
  return out;
}

double norm(const std::vector<Cplx>& v) {
  double s = 0.0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

// full tensor product of a fully assigned product state, bit q = qubit q
std::vector<Cplx> assemble(const ProductState& st) {
  const std::uint64_t dim = std::uint64_t(1) << st.sites.size();
  std::vector<Cplx> v(dim);
  for (std::uint64_t idx = 0; idx < dim; ++idx) {
    Cplx amp{1.0, 0.0};
    for (std::size_t q = 0; q < st.sites.size(); ++q)
      amp *= (*st.sites[q])[(idx >> q) & 1u];
    v[idx] = amp;
  }
  return v;
}

InteractionGraph overconstrained5() {
  InteractionGraph g;
  g.n_qubits = 5;
  g.k = 3;
  for (std::uint32_t a = 0; a < 5; ++a)
    for (std::uint32_t b = a + 1; b < 5; ++b)
      for (std::uint32_t c = b + 1; c < 5; ++c) g.clauses.push_back({a, b, c});
  return g;
}

}  // namespace

TEST_CASE("handle construction validates its inputs", "[spectrum]") {
  const auto g = graph_of(4, {{0, 1, 2}});
  const auto p = sample_projectors(g, ProjectorMode::Generic, {110, 0});
  const auto h = HamiltonianHandle::build(g, p);
  REQUIRE(h.dim == 16);
  REQUIRE(h.plans.size() == 1);

  auto short_p = p;
  short_p.generic.clear();
  REQUIRE_THROWS_AS(HamiltonianHandle::build(g, short_p), ContractViolation);

  const auto g2 = graph_of(4, {{0, 1, 2}, {1, 2, 3}});
  REQUIRE_THROWS_AS(HamiltonianHandle::build(g2, p), ContractViolation);

  std::vector<Cplx> wrong(8);
  REQUIRE_THROWS_AS(apply_h(h, wrong), ContractViolation);
}

TEST_CASE("matrix-free application agrees with the dense matrix", "[spectrum]") {
  for (std::uint32_t t = 0; t < 6; ++t) {
    const auto mode = t % 2 ? ProjectorMode::Product : ProjectorMode::Generic;
    const auto g = sample_er_graph(4 + t % 4, 3 + t % 3, 3, {111, t});
    const auto p = sample_projectors(g, mode, {112, t});
    const auto h = HamiltonianHandle::build(g, p);
    const auto a = dense_matrix(h);
    SplitRng r({113, t});
    for (int rep = 0; rep < 3; ++rep) {
      const auto v = random_vector(h.dim, r);
      const auto fast = apply_h(h, v);
      const auto slow = dense_apply(a, v);
      double diff = 0.0;
      for (std::uint64_t i = 0; i < h.dim; ++i) diff = std::max(diff, std::abs(fast[i] - slow[i]));
      REQUIRE(diff < 1e-12);
    }
  }
}

TEST_CASE("H is a positive sum of M rank-one projectors", "[spectrum]") {
  const auto g = sample_er_graph(7, 6, 3, {114, 0});
  const auto p = sample_projectors(g, ProjectorMode::Generic, {115, 0});
  const auto h = HamiltonianHandle::build(g, p);
  const double m = static_cast<double>(g.clauses.size());

  SplitRng r({116, 0});
  for (int rep = 0; rep < 20; ++rep) {
    const auto v = random_vector(h.dim, r);
    const auto hv = apply_h(h, v);
    Cplx quad{0.0, 0.0};
    for (std::uint64_t i = 0; i < h.dim; ++i) quad += std::conj(v[i]) * hv[i];
    REQUIRE(quad.real() >= -1e-12);                    // positive semidefinite
    REQUIRE(std::abs(quad.imag()) < 1e-12);            // Hermitian
    REQUIRE(norm(hv) <= m * norm(v) * (1.0 + 1e-12));  // operator norm <= M
  }

  // each clause term is a rank-one projector padded by identity on the other
  // n-k qubits, so it contributes 2^(n-k) to the full-space trace
  const double pad = static_cast<double>(std::uint64_t(1) << (g.n_qubits - g.k));
  const auto w = dense_eigenvalues(h);
  REQUIRE(std::accumulate(w.begin(), w.end(), 0.0) == Catch::Approx(m * pad).margin(1e-9));
  REQUIRE(w.front() >= -1e-12);
  REQUIRE(w.back() <= m + 1e-12);
}

TEST_CASE("single clause spectrum: one unit eigenvalue", "[spectrum]") {
  const auto g = graph_of(3, {{0, 1, 2}});
  for (auto mode : {ProjectorMode::Generic, ProjectorMode::Product}) {
    const auto p = sample_projectors(g, mode, {117, 0});
    const auto h = HamiltonianHandle::build(g, p);
    const auto w = dense_eigenvalues(h);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) REQUIRE(std::abs(w[i]) < 1e-12);
    REQUIRE(w.back() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("iterative ground energies match dense diagonalization", "[spectrum][slow]") {
  for (std::uint32_t t = 0; t < 8; ++t) {
    const auto mode = t % 2 ? ProjectorMode::Product : ProjectorMode::Generic;
    const auto g = sample_er_graph(5 + t % 5, 4 + t % 4, 3, {118, t});
    const auto p = sample_projectors(g, mode, {119, t});
    const auto h = HamiltonianHandle::build(g, p);
    const auto w = dense_eigenvalues(h);
    const auto ge = ground_energy(h, {120, t}, {});
    REQUIRE(ge.converged);
    REQUIRE(std::abs(ge.e0 - std::max(0.0, w[0])) < 1e-8);
    REQUIRE(ge.residual < 1e-8);
  }
}

TEST_CASE("product-mode instances with a covering are accepted", "[spectrum]") {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto g = sample_er_graph(10, 8, 3, {121, s});
    if (!has_covering(BipartiteIncidence::from_graph(g))) continue;
    const auto rep = decide_sat(g, ProjectorMode::Product, {122, s}, {}, {});
    REQUIRE(rep.verdict == Verdict::Sat);
    REQUIRE(rep.e0 < 1e-8);
  }
  // minifan pair stays satisfiable even with generic projectors
  const auto mf = graph_of(5, {{1, 2, 3}, {1, 2, 4}});
  const auto rep = decide_sat(mf, ProjectorMode::Generic, {123, 0}, {}, {});
  REQUIRE(rep.verdict == Verdict::Sat);
  REQUIRE(rep.e0 < 1e-8);
}

TEST_CASE("overconstrained generic instances are certified unsatisfiable", "[spectrum]") {
  const auto g = overconstrained5();  // ten clauses on five qubits: no covering
  REQUIRE_FALSE(has_covering(BipartiteIncidence::from_graph(g)));
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto p = sample_projectors(g, ProjectorMode::Generic, {124, s});
    const auto h = HamiltonianHandle::build(g, p);
    const auto rep = decide_sat(h, {125, s}, {}, {});
    REQUIRE(rep.verdict == Verdict::Unsat);
    // the verdict certificate: Ritz value minus residual clears the threshold
    REQUIRE(rep.e0 - rep.residual > 1e-6);
    const auto w = dense_eigenvalues(h);
    REQUIRE(w[0] > 1e-6);
    REQUIRE(rep.e0 >= w[0] - 1e-9);  // Ritz values approach from above
  }
}

TEST_CASE("kernel dimensions on hand-checkable instances", "[spectrum]") {
  SECTION("one clause removes one direction") {
    const auto g = graph_of(3, {{0, 1, 2}});
    for (auto mode : {ProjectorMode::Generic, ProjectorMode::Product}) {
      const auto p = sample_projectors(g, mode, {126, 0});
      const auto h = HamiltonianHandle::build(g, p);
      const auto kr = kernel_dimension(h, {}, {127, 0});
      REQUIRE(kr.dimension == 7);
      REQUIRE_FALSE(kr.ambiguous);
    }
  }
  SECTION("disjoint clauses multiply their kernels") {
    const auto g = graph_of(6, {{0, 1, 2}, {3, 4, 5}});
    for (std::uint64_t s = 0; s < 2; ++s) {
      const auto p = sample_projectors(g, ProjectorMode::Generic, {128, s});
      const auto h = HamiltonianHandle::build(g, p);
      REQUIRE(kernel_dimension(h, {}, {129, s}).dimension == 49);
    }
  }
  SECTION("generic dimension depends on the graph alone") {
    const auto g = sample_er_graph(8, 6, 3, {130, 0});
    KernelOptions opt;
    opt.max_dim = 256;
    std::uint32_t first = 0;
    for (std::uint64_t s = 0; s < 3; ++s) {
      const auto p = sample_projectors(g, ProjectorMode::Generic, {131, s});
      const auto h = HamiltonianHandle::build(g, p);
      const auto kr = kernel_dimension(h, opt, {132, s});
      REQUIRE_FALSE(kr.saturated);
      if (s == 0)
        first = kr.dimension;
      else
        REQUIRE(kr.dimension == first);
    }
    REQUIRE(first > 0);
  }
}

TEST_CASE("adding clauses never lowers the ground energy", "[spectrum]") {
  for (std::uint32_t t = 0; t < 4; ++t) {
    const auto g = sample_er_graph(6, 7, 3, {133, t});
    const auto p = sample_projectors(g, ProjectorMode::Generic, {134, t});
    double prev = -1.0;
    for (std::size_t m = 1; m <= g.clauses.size(); ++m) {
      InteractionGraph sub = g;
      sub.clauses.assign(g.clauses.begin(), g.clauses.begin() + m);
      ProjectorSet ps = p;
      ps.generic.assign(p.generic.begin(), p.generic.begin() + m);
      const auto w = dense_eigenvalues(HamiltonianHandle::build(sub, ps));
      REQUIRE(w[0] >= prev - 1e-12);
      prev = w[0];
    }
  }
}

TEST_CASE("clause-local product energy equals the operator expectation", "[spectrum]") {
  for (std::uint32_t t = 0; t < 5; ++t) {
    const auto g = sample_er_graph(8, 6, 3, {135, t});
    const auto p = sample_projectors(g, ProjectorMode::Generic, {136, t});
    const auto h = HamiltonianHandle::build(g, p);

    // random fully assigned product state
    SplitRng r({137, t});
    ProductState st;
    st.sites.resize(g.n_qubits);
    for (auto& site : st.sites) {
      const auto v = haar_state(2, r);
      site = Spinor{v[0], v[1]};
    }
    const auto full = assemble(st);
    const auto hv = apply_h(h, full);
    Cplx quad{0.0, 0.0};
    for (std::uint64_t i = 0; i < h.dim; ++i) quad += std::conj(full[i]) * hv[i];
    REQUIRE(product_state_energy(g, p, st) == Catch::Approx(quad.real()).margin(1e-10));
  }

  SECTION("covering-built states sit in the kernel of the full operator") {
    const auto g = sample_er_graph(10, 8, 3, {138, 0});
    const auto v = BipartiteIncidence::from_graph(g);
    EnumerationOptions opt;
    opt.count_bound = 32;
    opt.list_cap = 1;
    const auto res = enumerate_coverings(v, opt);
    REQUIRE_FALSE(res.coverings.empty());
    const auto p = sample_projectors(g, ProjectorMode::Product, {139, 0});
    const auto st = build_product_state(g, p, res.coverings[0], {140, 0});
    SplitRng fill({141, 0});
    const auto full = assemble(st.materialized(fill));
    const auto h = HamiltonianHandle::build(g, p);
    REQUIRE(norm(apply_h(h, full)) < 1e-6);
  }
}

TEST_CASE("free site energy is refused", "[spectrum]") {
  const auto g = graph_of(3, {{0, 1, 2}});
  const auto p = sample_projectors(g, ProjectorMode::Product, {142, 0});
  ProductState st;
  st.sites.resize(3);  // all free
  REQUIRE_THROWS_AS(product_state_energy(g, p, st), ContractViolation);
}

TEST_CASE("experiment cells carry the pinned core shape", "[spectrum][slow]") {
  UnsatExperimentParams params;
  params.core_sizes = {6};
  params.decidable_per_cell = 3;
  params.attempts_cap = 200000;
  const auto res = unsat_core_experiment(params, {108, 0});

  REQUIRE(res.cells.size() == 1);
  const auto& cell = res.cells[0];
  REQUIRE_FALSE(cell.sample_deficit);
  REQUIRE(cell.n_core == 6);
  REQUIRE(cell.decidable == 3);
  REQUIRE(cell.p_unsat >= 0.0);
  REQUIRE(cell.p_unsat <= 1.0);
  REQUIRE(cell.minifan_fraction >= 0.0);
  REQUIRE(cell.minifan_fraction <= 1.0);

  REQUIRE(res.rows.size() >= 3);
  for (const auto& row : res.rows) {
    REQUIRE(row.n_core == 6);
    REQUIRE(row.m_core == 7);  // one clause past the covering threshold
    REQUIRE(row.n >= row.n_core);
    REQUIRE(row.wall_ms >= 0.0);
    if (row.verdict == Verdict::Unsat) REQUIRE(row.e0 - row.residual > 0.0);
    if (row.verdict == Verdict::Sat) REQUIRE(row.e0 < 1e-6);
  }
}

TEST_CASE("verdict labels", "[spectrum]") {
  REQUIRE(to_string(Verdict::Sat) == "SAT");
  REQUIRE(to_string(Verdict::Unsat) == "UNSAT");
  REQUIRE(to_string(Verdict::Undecided) == "UNDECIDED");
}
