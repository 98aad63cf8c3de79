#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace qsat {

using Clause = std::vector<std::uint32_t>;  // sorted, distinct qubit indices

// k-uniform interaction hypergraph: n qubits, one hyperedge per clause.
struct InteractionGraph {
  std::uint32_t n_qubits = 0;
  std::uint32_t k = 0;
  std::vector<Clause> clauses;

  std::size_t clause_count() const { return clauses.size(); }
  double clause_density() const {
    return n_qubits == 0 ? 0.0 : static_cast<double>(clauses.size()) / n_qubits;
  }

  std::vector<std::uint32_t> degrees() const {
    std::vector<std::uint32_t> deg(n_qubits, 0);
    for (const auto& c : clauses)
      for (auto q : c) ++deg[q];
    return deg;
  }

  // Qubit -> indices of incident clauses.
  std::vector<std::vector<std::uint32_t>> incidence() const {
    std::vector<std::vector<std::uint32_t>> inc(n_qubits);
    for (std::uint32_t m = 0; m < clauses.size(); ++m)
      for (auto q : clauses[m]) inc[q].push_back(m);
    return inc;
  }
};

// Structural sanity: every clause sorted, distinct, in range, arity k, no duplicate clauses.
inline void validate(const InteractionGraph& g) {
  std::set<Clause> seen;
  for (const auto& c : g.clauses) {
    if (c.size() != g.k) throw ContractViolation("clause arity != k");
    for (auto q : c)
      if (q >= g.n_qubits) throw ContractViolation("qubit index out of range");
    if (!std::is_sorted(c.begin(), c.end())) throw ContractViolation("clause not sorted");
    if (std::adjacent_find(c.begin(), c.end()) != c.end())
      throw ContractViolation("repeated qubit inside clause");
    if (!seen.insert(c).second) throw ContractViolation("duplicate clause");
  }
}

// C(n, k) capped at `cap` to avoid overflow; exact when below the cap.
inline std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k,
                                     std::uint64_t cap = std::uint64_t(1) << 62) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;  // exact: product of i consecutive ints divisible by i!
    if (r > cap) return cap;
  }
  return static_cast<std::uint64_t>(r);
}

// Uniform sample of m distinct k-subsets of [0, n) (fixed-M ensemble, no replacement).
// Rejection on a hash set except when the subset space is small relative to m,
// where a partial shuffle of the full enumeration avoids coupon-collector stalls.
inline InteractionGraph sample_er_graph(std::uint32_t n, std::uint64_t m, std::uint32_t k,
                                        RngSpec rng) {
  if (k == 0 || k > n) throw ContractViolation("need 0 < k <= n");
  const std::uint64_t space = binomial_capped(n, k);
  if (m > space)
    throw InfeasibleEnsembleError("requested " + std::to_string(m) + " clauses but only " +
                                  std::to_string(space) + " distinct " + std::to_string(k) +
                                  "-subsets exist");
  InteractionGraph g;
  g.n_qubits = n;
  g.k = k;
  g.clauses.reserve(m);
  SplitRng r(rng);

  if (space <= std::max<std::uint64_t>(4 * m, 1024) && space <= (1u << 22)) {
    // Enumerate all subsets, then Fisher-Yates the first m into place.
    std::vector<Clause> all;
    all.reserve(space);
    Clause idx(k);
    for (std::uint32_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      all.push_back(idx);
      int pos = static_cast<int>(k) - 1;
      while (pos >= 0 && idx[pos] == n - k + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (std::uint32_t j = pos + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
    for (std::uint64_t i = 0; i < m; ++i) {
      const std::uint64_t j = i + r.uniform_below(all.size() - i);
      std::swap(all[i], all[j]);
      g.clauses.push_back(all[i]);
    }
  } else {
    std::set<Clause> seen;
    Clause c(k);
    while (g.clauses.size() < m) {
      // k distinct draws; k << n here so rejection rarely loops.
      for (std::uint32_t i = 0; i < k; ++i) {
        bool fresh;
        do {
          c[i] = static_cast<std::uint32_t>(r.uniform_below(n));
          fresh = true;
          for (std::uint32_t j = 0; j < i; ++j) fresh = fresh && (c[j] != c[i]);
        } while (!fresh);
      }
      std::sort(c.begin(), c.end());
      if (seen.insert(c).second) g.clauses.push_back(c);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Projectors

enum class ProjectorMode { Generic, Product };

inline std::string to_string(ProjectorMode m) {
  return m == ProjectorMode::Generic ? "generic" : "product";
}

// Haar-random unit vector in C^dim (normalized complex Gaussian).
inline std::vector<std::complex<double>> haar_state(std::size_t dim, SplitRng& r) {
  std::vector<std::complex<double>> v(dim);
  double norm2 = 0.0;
  for (auto& a : v) {
    a = r.complex_normal();
    norm2 += std::norm(a);
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& a : v) a *= inv;
  return v;
}

// One rank-1 projector direction per clause. Local amplitude index convention:
// bit j of the 2^k index is the state of the clause's j-th qubit in sorted order.
struct ProjectorSet {
  ProjectorMode mode = ProjectorMode::Generic;
  std::uint32_t k = 0;
  // Generic mode: per clause a unit vector of 2^k amplitudes.
  std::vector<std::vector<std::complex<double>>> generic;
  // Product mode: per clause, k single-qubit unit spinors.
  std::vector<std::vector<std::array<std::complex<double>, 2>>> product;

  std::size_t clause_count() const {
    return mode == ProjectorMode::Generic ? generic.size() : product.size();
  }

  // Materialize clause m's direction as a dense 2^k vector (both modes).
  std::vector<std::complex<double>> clause_vector(std::size_t m) const {
    const std::size_t dim = std::size_t(1) << k;
    if (mode == ProjectorMode::Generic) return generic.at(m);
    std::vector<std::complex<double>> v(dim, {1.0, 0.0});
    const auto& factors = product.at(m);
    for (std::size_t idx = 0; idx < dim; ++idx)
      for (std::uint32_t j = 0; j < k; ++j) v[idx] *= factors[j][(idx >> j) & 1u];
    return v;
  }
};

// i.i.d. Haar directions for every clause. Generic: one 2^k Haar vector each.
// Product: k independent single-qubit Haar spinors each.
inline ProjectorSet sample_projectors(const InteractionGraph& g, ProjectorMode mode,
                                      RngSpec rng) {
  ProjectorSet p;
  p.mode = mode;
  p.k = g.k;
  SplitRng r(rng);
  if (mode == ProjectorMode::Generic) {
    p.generic.reserve(g.clauses.size());
    for (std::size_t m = 0; m < g.clauses.size(); ++m)
      p.generic.push_back(haar_state(std::size_t(1) << g.k, r));
  } else {
    p.product.reserve(g.clauses.size());
    for (std::size_t m = 0; m < g.clauses.size(); ++m) {
      std::vector<std::array<std::complex<double>, 2>> factors(g.k);
      for (auto& f : factors) {
        auto v = haar_state(2, r);
        f = {v[0], v[1]};
      }
      p.product.push_back(std::move(factors));
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Local structure

// Clause pairs sharing at least two qubits. Sorted, deduplicated.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> find_minifans(
    const InteractionGraph& g) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> pair_to_clauses;
  for (std::uint32_t m = 0; m < g.clauses.size(); ++m) {
    const auto& c = g.clauses[m];
    for (std::size_t a = 0; a < c.size(); ++a)
      for (std::size_t b = a + 1; b < c.size(); ++b)
        pair_to_clauses[{c[a], c[b]}].push_back(m);
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& [qs, ms] : pair_to_clauses)
    for (std::size_t a = 0; a < ms.size(); ++a)
      for (std::size_t b = a + 1; b < ms.size(); ++b) out.insert({ms[a], ms[b]});
  return {out.begin(), out.end()};
}

// Exact fixed-M expectation of the minifan pair count: C(m,2) times the
// probability that a second distinct k-subset shares >= 2 qubits with a first.
inline double expected_minifan_pairs(std::uint32_t n, std::uint64_t m, std::uint32_t k) {
  const double space = static_cast<double>(binomial_capped(n, k));
  if (space <= 1.0 || m < 2) return 0.0;
  double share = 0.0;  // # distinct subsets sharing >= 2 qubits with a fixed one
  for (std::uint32_t j = 2; j < k; ++j)
    share += static_cast<double>(binomial_capped(k, j)) *
             static_cast<double>(binomial_capped(n - k, k - j));
  const double pairs = 0.5 * static_cast<double>(m) * (static_cast<double>(m) - 1.0);
  return pairs * share / (space - 1.0);
}

inline std::map<std::uint32_t, std::uint64_t> degree_histogram(const InteractionGraph& g) {
  std::map<std::uint32_t, std::uint64_t> h;
  for (auto d : g.degrees()) ++h[d];
  return h;
}

}  // namespace qsat
