#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qsat/entropy.hpp"
#include "qsat/spectrum.hpp"

using namespace qsat;

namespace {

// Rotate every site along a tangent direction: site -> site + eps*v*perp,
// renormalized. First derivative lies exactly in the linearized mode space.
ProductState rotated(const ProductState& st, const Eigen::MatrixXcd& modes,
                     Eigen::Index row, double eps) {
  ProductState out = st;
  for (std::size_t q = 0; q < st.sites.size(); ++q) {
    const Spinor& s = *st.sites[q];
    const Spinor perp{-std::conj(s[1]), std::conj(s[0])};
    const Cplx v = modes(row, static_cast<Eigen::Index>(q));
    Spinor r{s[0] + eps * v * perp[0], s[1] + eps * v * perp[1]};
    const double n = std::sqrt(std::norm(r[0]) + std::norm(r[1]));
    r[0] /= n;
    r[1] /= n;
    out.sites[q] = r;
  }
  return out;
}

}  // namespace

TEST_CASE("binary entropy", "[entropy]") {
  REQUIRE(binary_entropy(0.0) == 0.0);
  REQUIRE(binary_entropy(1.0) == 0.0);
  REQUIRE(binary_entropy(0.5) == Catch::Approx(std::log(2.0)).margin(1e-15));
  REQUIRE(binary_entropy(0.2) == Catch::Approx(0.500402424).margin(1e-9));
  REQUIRE(binary_entropy(0.3) == binary_entropy(0.7));
  REQUIRE_THROWS_AS(binary_entropy(-0.1), ContractViolation);
  REQUIRE_THROWS_AS(binary_entropy(1.1), ContractViolation);
}

TEST_CASE("monomer counting estimate", "[entropy]") {
  // regular degree 3: log k + log((1+3)/2^3)
  REQUIRE(pauling_estimate(1.0, 3, DegreeLaw::regular(3, 3)) ==
          Catch::Approx(std::log(3.0) - std::log(2.0)).margin(1e-12));

  // critical-core degree law at unit clause density
  const auto law = DegreeLaw::truncated_poisson_for_density(1.0, 3);
  REQUIRE(law.has_value());
  REQUIRE(pauling_estimate(1.0, 3, *law) == Catch::Approx(0.369902352).margin(1e-8));

  REQUIRE_THROWS_AS(pauling_estimate(1.0, 1, DegreeLaw::regular(1, 3)), ContractViolation);
}

TEST_CASE("hair rearrangement entropy", "[entropy]") {
  // asymptotic core geometry at clause density 0.917 (million-qubit rounding)
  const double s = geometric_hair_entropy(1000000.0, 917000.0, 631584.401, 630940.237);
  REQUIRE(s == Catch::Approx(0.531352765).margin(1e-6));

  // depends only on the covered fraction, not on absolute counts
  REQUIRE(geometric_hair_entropy(10.0, 5.0, 4.0, 1.0) ==
          Catch::Approx(geometric_hair_entropy(20.0, 10.0, 8.0, 2.0)).margin(1e-15));
  // all hair covered -> no freedom left
  REQUIRE(geometric_hair_entropy(10.0, 8.0, 4.0, 2.0) == 0.0);
  REQUIRE_THROWS_AS(geometric_hair_entropy(10.0, 8.0, 10.0, 8.0), ContractViolation);
  REQUIRE_THROWS_AS(geometric_hair_entropy(10.0, 9.0, 4.0, 1.0), ContractViolation);
}

TEST_CASE("cluster dimensions", "[entropy]") {
  REQUIRE(zero_mode_dimension_product(0) == 1);
  REQUIRE(zero_mode_dimension_product(4) == 16);

  // d=1 on two hair sites: orders 0,1,2 each contribute one state
  REQUIRE(zero_mode_dimension_bound(1, 2) == 3);
  REQUIRE(zero_mode_dimension_bound(4, 20) == 6196);
  REQUIRE_THROWS_AS(zero_mode_dimension_bound(5, 3), ContractViolation);

  SECTION("the generic bound dominates the product count") {
    for (std::uint32_t d = 0; d <= 12; ++d)
      REQUIRE(zero_mode_dimension_bound(d, 12) >= zero_mode_dimension_product(d));
  }
  SECTION("wrapper consistency and log values") {
    const auto exact = zero_mode_dimension(20, 4, ZeroModeMode::ExactProduct);
    REQUIRE(exact.dimension == 16);
    REQUIRE(exact.log_dimension == Catch::Approx(4.0 * std::log(2.0)).margin(1e-12));
    const auto bound = zero_mode_dimension(20, 4, ZeroModeMode::GenericBound);
    REQUIRE(bound.dimension == 6196);
    REQUIRE(bound.log_dimension == Catch::Approx(std::log(6196.0)).margin(1e-12));
    REQUIRE_THROWS_AS(zero_mode_dimension(3, 5, ZeroModeMode::ExactProduct),
                      ContractViolation);
  }
  SECTION("bit-split logarithm handles huge counts") {
    const BigInt big = BigInt(1) << 2000;
    REQUIRE(log_big(big) == Catch::Approx(2000.0 * std::log(2.0)).epsilon(1e-12));
    REQUIRE_THROWS_AS(log_big(BigInt(0)), ContractViolation);
  }
}

TEST_CASE("asymptotic rate of the generic bound", "[entropy]") {
  REQUIRE(zero_mode_entropy_rate(0.2) == Catch::Approx(binary_entropy(0.2)).margin(1e-15));
  REQUIRE(zero_mode_entropy_rate(0.7) == Catch::Approx(std::log(2.0)).margin(1e-15));
  // continuous through the saturation point
  REQUIRE(std::abs(zero_mode_entropy_rate(0.5 - 1e-9) - zero_mode_entropy_rate(0.5 + 1e-9)) <
          1e-6);
  REQUIRE_THROWS_AS(zero_mode_entropy_rate(-0.01), ContractViolation);
  REQUIRE_THROWS_AS(zero_mode_entropy_rate(1.01), ContractViolation);

  SECTION("saddle point of the tensor sum sits at the binary entropy") {
    for (double gamma : {0.1, 0.2, 0.4})
      REQUIRE(steepest_descent_exponent(1.0 - gamma, gamma) ==
              Catch::Approx(binary_entropy(gamma)).margin(1e-12));
    REQUIRE(steepest_descent_exponent(0.3, 0.0) == 0.0);
  }
  SECTION("finite-size rate approaches the asymptote from below") {
    const double rate200 = log_big(zero_mode_dimension_bound(40, 200)) / 200.0;
    REQUIRE(rate200 == Catch::Approx(0.488544102).margin(1e-8));
    REQUIRE(std::abs(rate200 - binary_entropy(0.2)) / binary_entropy(0.2) < 0.05);
    REQUIRE(rate200 < binary_entropy(0.2));
  }
}

TEST_CASE("linearized zero modes around covering states", "[entropy]") {
  SECTION("product projectors: modes avoid the pinned qubits exactly") {
    const auto g = sample_er_graph(10, 7, 3, {150, 0});
    EnumerationOptions eo;
    eo.list_cap = 1;
    eo.count_bound = 16;
    const auto res = enumerate_coverings(BipartiteIncidence::from_graph(g), eo);
    REQUIRE_FALSE(res.coverings.empty());
    const auto p = sample_projectors(g, ProjectorMode::Product, {151, 0});
    SplitRng fill({153, 0});
    const auto st = build_product_state(g, p, res.coverings[0], {152, 0}).materialized(fill);
    REQUIRE(product_state_energy(g, p, st) < 1e-20);

    const auto mm = linearized_zero_modes(g, p, st);
    REQUIRE(mm.constraint_rank == g.clauses.size());
    REQUIRE_FALSE(mm.rank_deficient);
    REQUIRE(mm.modes.rows() ==
            static_cast<Eigen::Index>(g.n_qubits - g.clauses.size()));

    // orthonormal rows
    const Eigen::MatrixXcd gram = mm.modes * mm.modes.adjoint();
    REQUIRE((gram - Eigen::MatrixXcd::Identity(gram.rows(), gram.cols())).norm() < 1e-10);

    // pinned (dimer) qubits carry no mode amplitude
    for (const auto& [c, q] : res.coverings[0].pairs)
      for (Eigen::Index i = 0; i < mm.modes.rows(); ++i)
        REQUIRE(std::abs(mm.modes(i, q)) < 1e-10);

    // moving along a mode leaves the energy at zero to all orders here:
    // product projectors only ever see the pinned qubits
    for (Eigen::Index i = 0; i < mm.modes.rows(); ++i)
      REQUIRE(product_state_energy(g, p, rotated(st, mm.modes, i, 1e-2)) < 1e-20);

    // a generic direction is quadratically punished
    Eigen::MatrixXcd dir = Eigen::MatrixXcd::Constant(1, g.n_qubits, Cplx{0.6, 0.3});
    REQUIRE(product_state_energy(g, p, rotated(st, dir, 0, 1e-3)) > 1e-9);
  }

  SECTION("generic projectors: modes are flat to second order") {
    InteractionGraph g;
    g.n_qubits = 9;
    g.k = 3;
    g.clauses = {{0, 1, 2}, {2, 3, 4}, {4, 5, 6}, {1, 7, 8}};
    EnumerationOptions eo;
    eo.list_cap = 1;
    const auto res = enumerate_coverings(BipartiteIncidence::from_graph(g), eo);
    const auto p = sample_projectors(g, ProjectorMode::Generic, {154, 0});
    SplitRng fill({156, 0});
    const auto st = build_product_state(g, p, res.coverings[0], {155, 0}).materialized(fill);
    REQUIRE(product_state_energy(g, p, st) < 1e-20);

    const auto mm = linearized_zero_modes(g, p, st);
    REQUIRE(mm.constraint_rank == g.clauses.size());
    REQUIRE(mm.modes.rows() == 5);
    for (Eigen::Index i = 0; i < 2; ++i) {
      const double e_small = product_state_energy(g, p, rotated(st, mm.modes, i, 1e-3));
      const double e_large = product_state_energy(g, p, rotated(st, mm.modes, i, 1e-2));
      REQUIRE(e_small < 1e-12);   // no quadratic term along the kernel
      REQUIRE(e_large < 1e-9);
      REQUIRE(e_large > 1e3 * e_small);  // quartic growth, not quadratic
    }
  }

  SECTION("more clauses than qubits exhaust the kernel") {
    InteractionGraph g;
    g.n_qubits = 5;
    g.k = 3;
    for (std::uint32_t a = 0; a < 5; ++a)
      for (std::uint32_t b = a + 1; b < 5; ++b)
        for (std::uint32_t c = b + 1; c < 5; ++c) g.clauses.push_back({a, b, c});
    const auto p = sample_projectors(g, ProjectorMode::Generic, {157, 0});
    ProductState st;
    st.sites.resize(5);
    SplitRng r({158, 0});
    for (auto& s : st.sites) {
      const auto v = haar_state(2, r);
      s = Spinor{v[0], v[1]};
    }
    const auto mm = linearized_zero_modes(g, p, st);
    REQUIRE(mm.constraint_rank == 5);
    REQUIRE(mm.rank_deficient);  // ten constraints cannot be independent
    REQUIRE(mm.modes.rows() == 0);
  }

  SECTION("free sites are refused") {
    InteractionGraph g;
    g.n_qubits = 3;
    g.k = 3;
    g.clauses = {{0, 1, 2}};
    const auto p = sample_projectors(g, ProjectorMode::Product, {159, 0});
    ProductState st;
    st.sites.resize(3);
    REQUIRE_THROWS_AS(linearized_zero_modes(g, p, st), ContractViolation);
  }

  SECTION("split hair is flagged") {
    InteractionGraph g;
    g.n_qubits = 10;
    g.k = 3;
    // complete core on {0..3} plus two hair clauses with disjoint supports
    g.clauses = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
    const auto p = sample_projectors(g, ProjectorMode::Generic, {160, 0});
    ProductState st;
    st.sites.resize(10);
    SplitRng r({161, 0});
    for (auto& s : st.sites) {
      const auto v = haar_state(2, r);
      s = Spinor{v[0], v[1]};
    }
    REQUIRE(linearized_zero_modes(g, p, st).hair_disconnected);

    g.clauses.pop_back();  // single hair blob
    auto p2 = p;
    p2.generic.pop_back();
    REQUIRE_FALSE(linearized_zero_modes(g, p2, st).hair_disconnected);
  }
}

TEST_CASE("entropy ledger assembles the three contributions", "[entropy]") {
  const auto led = entropy_ledger(0.917, 3, 0.23, "cavity");
  REQUIRE(led.gamma == Catch::Approx(0.225289049).margin(1e-8));
  REQUIRE(led.core_fraction == Catch::Approx(0.631584401).margin(1e-8));
  REQUIRE(led.hair_fraction == Catch::Approx(0.368415599).margin(1e-8));
  REQUIRE(led.core_total == Catch::Approx(0.145264412).margin(1e-8));
  REQUIRE(led.zero_total == Catch::Approx(0.196557491).margin(1e-8));
  REQUIRE(led.hair_bound == Catch::Approx(0.255366234).margin(1e-8));
  REQUIRE(led.core_provenance == "cavity");
  // the zero-mode share can never exceed free hair spins
  REQUIRE(led.zero_total <= led.hair_bound + 1e-15);

  REQUIRE(ledger(0.917, 3, 0.23, "cavity").core_total == led.core_total);

  SECTION("rejects densities without an extensive core") {
    REQUIRE_THROWS_AS(entropy_ledger(0.2, 3, 0.23, "x"), UnsupportedInstanceError);
  }
  SECTION("rejects negative core entropy and alpha beyond one") {
    REQUIRE_THROWS_AS(entropy_ledger(0.917, 3, -0.1, "x"), ContractViolation);
    REQUIRE_THROWS_AS(entropy_ledger(1.05, 3, 0.23, "x"), ContractViolation);
  }
}
