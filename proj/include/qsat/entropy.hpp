#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <boost/multiprecision/cpp_int.hpp>

#include "core.hpp"
#include "dimer.hpp"
#include "errors.hpp"
#include "hypergraph.hpp"

namespace qsat {

// Coin-flip entropy in nats; 0 at both endpoints by continuity.
inline double binary_entropy(double x) {
  if (x < 0.0 || x > 1.0) throw ContractViolation("binary_entropy needs x in [0,1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log(x) - (1.0 - x) * std::log(1.0 - x);
}

// Mean-field covering-count estimate: each qubit of degree d keeps (1+d)/2^d
// of its local freedom, each clause contributes log k choices.
//   S/N_c = density*log k + E_d[ log((1+d)/2^d) ].
inline double pauling_estimate(double density, std::uint32_t k, const DegreeLaw& law) {
  if (k < 2) throw ContractViolation("arity must be >= 2");
  double e = 0.0;
  for (std::size_t d = 0; d < law.pmf.size(); ++d) {
    if (law.pmf[d] == 0.0) continue;
    e += law.pmf[d] *
         (std::log1p(static_cast<double>(d)) - static_cast<double>(d) * std::log(2.0));
  }
  return density * std::log(static_cast<double>(k)) + e;
}

// Naive per-hair-spin entropy of monomer rearrangements: the fraction of hair
// qubits covered by hair clauses is (M-M_c)/(N-N_c).
inline double geometric_hair_entropy(double n, double m, double n_core, double m_core) {
  if (!(n > n_core)) throw ContractViolation("no hair: N must exceed N_c");
  const double covered = (m - m_core) / (n - n_core);
  if (covered < 0.0 || covered > 1.0)
    throw ContractViolation("hair coverage outside [0,1]");
  return binary_entropy(1.0 - covered);
}

// ---------------------------------------------------------------------------
// Zero-mode dimension counting

namespace detail {

// Exact binomial as a big integer; zero when n > top, one when n == 0.
inline BigInt big_binomial(std::int64_t top, std::int64_t n) {
  if (n == 0) return 1;
  if (n < 0 || top < n) return 0;
  BigInt r = 1;
  for (std::int64_t i = 1; i <= n; ++i) {
    r *= (top - n + i);
    r /= i;
  }
  return r;
}

}  // namespace detail

// Product-form projectors pin the covered spins completely, so the cluster
// span is the full Hilbert space of the d free spins.
inline BigInt zero_mode_dimension_product(std::uint32_t d) {
  return BigInt(1) << d;
}

// Generic-mode upper bound: at flip order n the span is capped both by the
// symmetric tensors over the d modes and by the hard-core states on the
// N_h hair sites:  D <= sum_n min{ C(n+d-1, n), C(N_h, n) }.
inline BigInt zero_mode_dimension_bound(std::uint32_t d, std::uint32_t n_hair) {
  if (d > n_hair) throw ContractViolation("mode count exceeds hair size");
  BigInt total = 0;
  for (std::uint32_t n = 0; n <= n_hair; ++n) {
    const BigInt sym = detail::big_binomial(static_cast<std::int64_t>(n) + d - 1, n);
    const BigInt hard = detail::big_binomial(n_hair, n);
    total += sym < hard ? sym : hard;
  }
  return total;
}

enum class ZeroModeMode { ExactProduct, GenericBound };

struct ZeroModeCount {
  BigInt dimension;
  double log_dimension = 0.0;  // natural log
};

inline double log_big(const BigInt& x) {
  if (x <= 0) throw ContractViolation("log of non-positive count");
  // Split off the bit length so huge counts stay in double range.
  const auto bits = boost::multiprecision::msb(x);
  if (bits <= 900) return std::log(x.convert_to<double>());
  const BigInt shifted = x >> (bits - 900);
  return std::log(shifted.convert_to<double>()) +
         static_cast<double>(bits - 900) * std::log(2.0);
}

// Cluster dimension for d modes on n_hair free sites. ExactProduct ignores
// n_hair beyond the d <= n_hair sanity check; GenericBound caps by both counts.
inline ZeroModeCount zero_mode_dimension(std::uint32_t n_hair, std::uint32_t d,
                                         ZeroModeMode mode) {
  if (d > n_hair) throw ContractViolation("mode count exceeds hair size");
  ZeroModeCount out;
  out.dimension = (mode == ZeroModeMode::ExactProduct) ? zero_mode_dimension_product(d)
                                                       : zero_mode_dimension_bound(d, n_hair);
  out.log_dimension = log_big(out.dimension);
  return out;
}

// Leading exponential rate of the generic bound at mode density gamma = d/N_h.
inline double zero_mode_entropy_rate(double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw ContractViolation("gamma must lie in [0,1]");
  if (gamma > 0.5) return std::log(2.0);
  return binary_entropy(gamma);
}

// Steepest-descent exponent of the symmetric-tensor sum,
//   f(x) = -[ x log(x/(x+gamma)) + gamma log(gamma/(x+gamma)) ];
// f(1-gamma) = S_2(gamma), which the rate above uses.
inline double steepest_descent_exponent(double x, double gamma) {
  if (x < 0.0 || gamma < 0.0) throw ContractViolation("arguments must be non-negative");
  if (gamma == 0.0) return 0.0;
  double f = gamma * std::log((x + gamma) / gamma);
  if (x > 0.0) f += x * std::log((x + gamma) / x);
  return f;
}

// ---------------------------------------------------------------------------
// Linearized zero modes

// Orthonormal kernel basis of the linearized zero-energy conditions around a
// zero-energy product state. Row alpha, column j: amplitude of mode alpha on
// qubit j in the local basis (state_j, state_j_perp).
struct ModeMatrix {
  Eigen::MatrixXcd modes;           // d x N
  std::uint32_t constraint_rank = 0;
  bool rank_deficient = false;       // rank < clause count (non-generic state)
  bool hair_disconnected = false;    // hair splits into >1 clause-bearing parts
};

// A[m][j] = <phi_m | state with qubit j rotated to its orthogonal complement>,
// nonzero only for j in clause m. The kernel of A spans the first-order
// zero-mode directions; its dimension is N - rank.
inline ModeMatrix linearized_zero_modes(const InteractionGraph& g, const ProjectorSet& p,
                                        const ProductState& st) {
  if (st.size() != g.n_qubits) throw ContractViolation("state size != qubit count");
  for (const auto& s : st.sites)
    if (!s) throw ContractViolation("state must be fully assigned (materialize FREE first)");

  const std::size_t m_count = g.clauses.size();
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(m_count, g.n_qubits);
  for (std::uint32_t m = 0; m < m_count; ++m) {
    const auto phi = p.clause_vector(m);
    const auto& c = g.clauses[m];
    const std::size_t sub = std::size_t(1) << g.k;
    for (std::uint32_t jpos = 0; jpos < g.k; ++jpos) {
      Cplx amp{0.0, 0.0};
      for (std::size_t t = 0; t < sub; ++t) {
        Cplx w = std::conj(phi[t]);
        for (std::uint32_t l = 0; l < g.k; ++l) {
          const Spinor& site = *st.sites[c[l]];
          const Spinor perp{-std::conj(site[1]), std::conj(site[0])};
          const Spinor& use = (l == jpos) ? perp : site;
          w *= use[(t >> l) & 1u];
        }
        amp += w;
      }
      a(m, c[jpos]) = amp;
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? sv(0) * 1e-10 : 0.0;
  std::uint32_t rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv(i) > cutoff;

  ModeMatrix out;
  out.constraint_rank = rank;
  out.rank_deficient = rank < m_count;
  const Eigen::Index d = static_cast<Eigen::Index>(g.n_qubits) - rank;
  out.modes = Eigen::MatrixXcd(d, g.n_qubits);
  for (Eigen::Index i = 0; i < d; ++i)
    out.modes.row(i) = svd.matrixV().col(rank + i).transpose();

  const auto cd = strip_core(g);
  if (!cd.hair_clauses.empty()) {
    // Union-find over hair qubits through hair clauses.
    std::vector<std::uint32_t> parent(g.n_qubits);
    for (std::uint32_t i = 0; i < g.n_qubits; ++i) parent[i] = i;
    std::function<std::uint32_t(std::uint32_t)> find = [&](std::uint32_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::vector<char> is_core_qubit(g.n_qubits, 0);
    for (auto q : cd.core_qubits) is_core_qubit[q] = 1;
    for (auto mc : cd.hair_clauses) {
      std::uint32_t first = UINT32_MAX;
      for (auto q : g.clauses[mc]) {
        if (is_core_qubit[q]) continue;
        if (first == UINT32_MAX) first = q;
        else parent[find(q)] = find(first);
      }
    }
    std::set<std::uint32_t> roots;
    for (auto mc : cd.hair_clauses)
      for (auto q : g.clauses[mc])
        if (!is_core_qubit[q]) {
          roots.insert(find(q));
          break;
        }
    out.hair_disconnected = roots.size() > 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entropy ledger

// Total-entropy bookkeeping per original qubit, assembled from the asymptotic
// core geometry at clause density alpha and a core entropy estimate.
struct EntropyLedger {
  double alpha = 0.0;
  std::uint32_t k = 3;
  double core_fraction = 0.0;  // N_c / N
  double hair_fraction = 0.0;  // N_h / N
  double gamma = 0.0;          // free-mode density on the hair, (1-alpha)/hair_fraction
  double core_entropy_per_core_qubit = 0.0;
  std::string core_provenance;  // "cavity", "exact", "pauling", ...
  double core_total = 0.0;      // S_core / N
  double zero_total = 0.0;      // S_zero / N
  double hair_bound = 0.0;      // S_hair / N upper bound (free hair spins)
};

inline EntropyLedger entropy_ledger(double alpha, std::uint32_t k,
                                    double core_entropy_per_core_qubit,
                                    const std::string& provenance) {
  const auto stats = core_stats(alpha, k);
  if (!stats) throw UnsupportedInstanceError("no extensive core at this clause density");
  if (core_entropy_per_core_qubit < 0.0)
    throw ContractViolation("core entropy must be non-negative");
  EntropyLedger led;
  led.alpha = alpha;
  led.k = k;
  led.core_fraction = stats->nc_frac;
  led.hair_fraction = 1.0 - stats->nc_frac;
  led.core_entropy_per_core_qubit = core_entropy_per_core_qubit;
  led.core_provenance = provenance;
  if (led.hair_fraction <= 0.0) throw UnsupportedInstanceError("core swallows every qubit");
  const double gamma = (1.0 - alpha) / led.hair_fraction;
  if (gamma < 0.0 || gamma > 1.0)
    throw ContractViolation("mode density outside [0,1]; ledger needs alpha <= 1");
  led.gamma = gamma;
  led.core_total = core_entropy_per_core_qubit * led.core_fraction;
  led.zero_total = zero_mode_entropy_rate(gamma) * led.hair_fraction;
  led.hair_bound = std::log(2.0) * led.hair_fraction;
  return led;
}

inline EntropyLedger ledger(double alpha, std::uint32_t k, double core_entropy_per_core_qubit,
                            const std::string& provenance) {
  return entropy_ledger(alpha, k, core_entropy_per_core_qubit, provenance);
}

}  // namespace qsat
