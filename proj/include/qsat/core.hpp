#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "hypergraph.hpp"
#include "rng.hpp"

namespace qsat {

// Result of leaf removal: the 2-core (every core qubit touches >= 2 core
// clauses) plus the stripped-off hair, with a replayable removal trace.
struct CoreDecomposition {
  std::vector<std::uint32_t> core_qubits;   // sorted
  std::vector<std::uint32_t> core_clauses;  // sorted
  std::vector<std::uint32_t> hair_qubits;   // sorted
  std::vector<std::uint32_t> hair_clauses;  // sorted

  struct Removal {
    std::uint32_t qubit;
    std::optional<std::uint32_t> clause;  // nullopt: qubit had degree 0 when removed
  };
  std::vector<Removal> trace;  // in removal order

  bool core_empty() const { return core_clauses.empty(); }
};

namespace detail {

template <typename PickLeaf>
CoreDecomposition strip_core_impl(const InteractionGraph& g, PickLeaf&& pick) {
  const auto inc = g.incidence();
  std::vector<std::uint32_t> deg = g.degrees();
  std::vector<char> qubit_alive(g.n_qubits, 1);
  std::vector<char> clause_alive(g.clauses.size(), 1);

  // Work set of candidate leaves; stale entries are skipped on pop.
  std::vector<std::uint32_t> bag;
  for (std::uint32_t q = 0; q < g.n_qubits; ++q)
    if (deg[q] <= 1) bag.push_back(q);

  CoreDecomposition out;
  for (auto next = pick(bag); next; next = pick(bag)) {
    const std::uint32_t q = *next;
    if (!qubit_alive[q] || deg[q] > 1) continue;
    qubit_alive[q] = 0;
    if (deg[q] == 0) {
      out.trace.push_back({q, std::nullopt});
      continue;
    }
    std::uint32_t leaf_clause = 0;
    for (auto m : inc[q])
      if (clause_alive[m]) {
        leaf_clause = m;
        break;
      }
    out.trace.push_back({q, leaf_clause});
    clause_alive[leaf_clause] = 0;
    for (auto j : g.clauses[leaf_clause]) {
      if (!qubit_alive[j]) continue;
      if (--deg[j] <= 1) bag.push_back(j);
    }
    deg[q] = 0;
  }

  for (std::uint32_t q = 0; q < g.n_qubits; ++q)
    (qubit_alive[q] ? out.core_qubits : out.hair_qubits).push_back(q);
  for (std::uint32_t m = 0; m < g.clauses.size(); ++m)
    (clause_alive[m] ? out.core_clauses : out.hair_clauses).push_back(m);
  return out;
}

}  // namespace detail

// Deterministic order: FIFO over discovery order.
inline CoreDecomposition strip_core(const InteractionGraph& g) {
  std::size_t head = 0;
  return detail::strip_core_impl(
      g, [&](std::vector<std::uint32_t>& bag) -> std::optional<std::uint32_t> {
        if (head == bag.size()) return std::nullopt;
        return bag[head++];  // bag only grows; head walks it as a queue
      });
}

// Randomized processing order. The 2-core is order-independent, so the
// partition must match the deterministic variant (property-tested).
inline CoreDecomposition strip_core(const InteractionGraph& g, SplitRng& order) {
  return detail::strip_core_impl(
      g, [&](std::vector<std::uint32_t>& bag) -> std::optional<std::uint32_t> {
        if (bag.empty()) return std::nullopt;
        const std::size_t i = order.uniform_below(bag.size());
        const std::uint32_t q = bag[i];
        bag[i] = bag.back();
        bag.pop_back();
        return q;
      });
}

// Re-applies a removal trace from the full graph; throws if any step is not a
// legal leaf removal. Returns surviving (qubit, clause) alive masks.
inline std::pair<std::vector<char>, std::vector<char>> replay_trace(
    const InteractionGraph& g, const std::vector<CoreDecomposition::Removal>& trace) {
  const auto inc = g.incidence();
  std::vector<std::uint32_t> deg = g.degrees();
  std::vector<char> qubit_alive(g.n_qubits, 1);
  std::vector<char> clause_alive(g.clauses.size(), 1);
  for (const auto& step : trace) {
    if (!qubit_alive[step.qubit] || deg[step.qubit] > 1)
      throw ContractViolation("trace step is not a leaf removal");
    qubit_alive[step.qubit] = 0;
    if (!step.clause) {
      if (deg[step.qubit] != 0) throw ContractViolation("trace drops a qubit of degree 1");
      continue;
    }
    const std::uint32_t m = *step.clause;
    bool incident = false;
    for (auto x : inc[step.qubit]) incident = incident || (x == m);
    if (!clause_alive[m] || !incident)
      throw ContractViolation("trace removes a clause not at the leaf");
    clause_alive[m] = 0;
    for (auto j : g.clauses[m])
      if (qubit_alive[j]) --deg[j];
  }
  return {std::move(qubit_alive), std::move(clause_alive)};
}

// Core subgraph with qubits and clauses relabeled to 0..N_c-1 / 0..M_c-1.
// Optional maps return original ids per new index.
inline InteractionGraph induced_core_graph(const InteractionGraph& g,
                                           const CoreDecomposition& cd,
                                           std::vector<std::uint32_t>* qubit_ids = nullptr,
                                           std::vector<std::uint32_t>* clause_ids = nullptr) {
  std::vector<std::uint32_t> newid(g.n_qubits, UINT32_MAX);
  for (std::uint32_t i = 0; i < cd.core_qubits.size(); ++i) newid[cd.core_qubits[i]] = i;
  InteractionGraph core;
  core.n_qubits = static_cast<std::uint32_t>(cd.core_qubits.size());
  core.k = g.k;
  for (auto m : cd.core_clauses) {
    Clause c;
    c.reserve(g.k);
    for (auto q : g.clauses[m]) {
      if (newid[q] == UINT32_MAX)
        throw ContractViolation("core clause touches a non-core qubit");
      c.push_back(newid[q]);
    }
    std::sort(c.begin(), c.end());
    core.clauses.push_back(std::move(c));
  }
  if (qubit_ids) *qubit_ids = cd.core_qubits;
  if (clause_ids) *clause_ids = cd.core_clauses;
  return core;
}

// ---------------------------------------------------------------------------
// Degree laws

// Qubit-degree distribution paired with the clause arity it feeds.
struct DegreeLaw {
  std::uint32_t k = 3;
  std::vector<double> pmf;  // pmf[d] = P(degree = d), normalized

  double mean() const {
    double s = 0.0;
    for (std::size_t d = 0; d < pmf.size(); ++d) s += static_cast<double>(d) * pmf[d];
    return s;
  }
  // Clauses per qubit implied by the law.
  double density() const { return mean() / k; }

  static DegreeLaw regular(std::uint32_t k, std::uint32_t d) {
    DegreeLaw law;
    law.k = k;
    law.pmf.assign(d + 1, 0.0);
    law.pmf[d] = 1.0;
    return law;
  }

  // Poisson(lambda) conditioned on degree >= 2, truncated where the tail
  // drops below 1e-16 of the mass.
  static DegreeLaw truncated_poisson(double lambda, std::uint32_t k) {
    if (!(lambda > 0.0)) throw ContractViolation("truncated_poisson: lambda must be > 0");
    DegreeLaw law;
    law.k = k;
    const double z = 1.0 - std::exp(-lambda) * (1.0 + lambda);  // P(Poisson >= 2)
    if (z <= 0.0) throw ContractViolation("truncated_poisson: no mass at degree >= 2");
    double term = std::exp(-lambda) * lambda * lambda / 2.0;  // P(d = 2)
    law.pmf.assign(3, 0.0);
    law.pmf[2] = term / z;
    double cum = law.pmf[2];
    for (std::uint32_t d = 3; cum < 1.0 - 1e-16; ++d) {
      term *= lambda / d;
      law.pmf.push_back(term / z);
      cum += term / z;
      if (d > 500) break;
    }
    return law;
  }

  // Truncated Poisson whose mean equals k * density; exists only for density > 2/k.
  static std::optional<DegreeLaw> truncated_poisson_for_density(double density,
                                                                std::uint32_t k) {
    const double target = density * k;
    if (!(target > 2.0)) return std::nullopt;  // truncated mean -> 2 as lambda -> 0
    auto mean_of = [](double lam) {
      return lam * (1.0 - std::exp(-lam)) / (1.0 - std::exp(-lam) * (1.0 + lam));
    };
    double lo = 1e-9, hi = std::max(4.0, 2.0 * target);
    while (mean_of(hi) < target) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mean_of(mid) < target ? lo : hi) = mid;
    }
    return truncated_poisson(0.5 * (lo + hi), k);
  }
};

// ---------------------------------------------------------------------------
// Asymptotic core statistics

// Largest root of exp(-L) - 1 + (L / (k*alpha))^(1/(k-1)) = 0, or nullopt when
// the fixed point has no positive root (no extensive core). Bisection to 1e-12
// after a fine right-to-left scan, well inside the 1e-10 contract.
inline std::optional<double> lambda_star(double alpha, std::uint32_t k) {
  if (!(alpha > 0.0) || k < 2) throw ContractViolation("need alpha > 0 and k >= 2");
  const double ka = k * alpha;
  auto f = [&](double lam) {
    return std::exp(-lam) - 1.0 + std::pow(lam / ka, 1.0 / (k - 1.0));
  };
  const double hi = std::max(8.0 * ka, 16.0);
  const int grid = 1 << 15;
  double above = hi;  // f(hi) > 0: the power term exceeds 1 there
  for (int i = grid - 1; i >= 1; --i) {
    const double x = hi * i / grid;
    if (f(x) <= 0.0) {
      double lo = x, up = above;
      for (int it = 0; it < 200 && up - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + up);
        (f(mid) <= 0.0 ? lo : up) = mid;
      }
      return 0.5 * (lo + up);
    }
    above = x;
  }
  return std::nullopt;
}

// Thermodynamic leaf-removal outcome at clause density alpha.
struct CoreStats {
  double lambda_star = 0.0;  // L solving the fixed point
  double nc_frac = 0.0;      // N_c / N
  double mc_frac = 0.0;      // M_c / N
  double beta = 0.0;         // M_c / N_c
  DegreeLaw degree_law;      // truncated Poisson core degree law
};

inline std::optional<CoreStats> core_stats(double alpha, std::uint32_t k) {
  const auto lam = lambda_star(alpha, k);
  if (!lam) return std::nullopt;
  CoreStats s;
  s.lambda_star = *lam;
  const double e = std::exp(-*lam);
  s.nc_frac = 1.0 - (1.0 + *lam) * e;
  s.mc_frac = (*lam / k) * (1.0 - e);
  if (s.nc_frac <= 0.0) return std::nullopt;
  s.beta = s.mc_frac / s.nc_frac;
  s.degree_law = DegreeLaw::truncated_poisson(*lam, k);
  return s;
}

// Density at which the core reaches one clause per qubit (M_c = N_c), found by
// solving L - k + exp(-L) * (k + (k-1) L) = 0 jointly with the fixed point.
inline double critical_clause_density(std::uint32_t k) {
  if (k < 2) throw ContractViolation("need k >= 2");
  auto h = [&](double lam) {
    return lam - k + std::exp(-lam) * (k + (k - 1.0) * lam);
  };
  double lo = 1e-6, hi = 16.0 + 4.0 * k;
  while (h(hi) < 0.0) hi *= 2.0;
  // h(0+) > 0 and h flips sign once before the positive branch; take the
  // largest root by scanning from the right.
  const int grid = 1 << 14;
  double above = hi;
  double root = -1.0;
  for (int i = grid - 1; i >= 1; --i) {
    const double x = lo + (hi - lo) * i / grid;
    if (h(x) <= 0.0) {
      double a = x, b = above;
      for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
        const double mid = 0.5 * (a + b);
        (h(mid) <= 0.0 ? a : b) = mid;
      }
      root = 0.5 * (a + b);
      break;
    }
    above = x;
  }
  if (root < 0.0) throw NumericalDomainError("critical density: no root located");
  const double one_minus_e = 1.0 - std::exp(-root);
  return root / (k * one_minus_e * one_minus_e);
}

// Empirical vs analytic core fractions at one (alpha, k, n) point.
struct CoreComparison {
  std::uint32_t n = 0;
  std::uint32_t samples = 0;
  double mean_core_qubit_fraction = 0.0;
  double mean_core_clause_fraction = 0.0;
  double analytic_core_qubit_fraction = 0.0;
  double analytic_core_clause_fraction = 0.0;
  bool handshake_ok = true;  // every sample: counts add up and all degrees >= 2
};

inline CoreComparison empirical_vs_analytic(double alpha, std::uint32_t k, std::uint32_t n,
                                            std::uint32_t samples, RngSpec rng) {
  const auto stats = core_stats(alpha, k);
  CoreComparison out;
  out.n = n;
  out.samples = samples;
  out.analytic_core_qubit_fraction = stats ? stats->nc_frac : 0.0;
  out.analytic_core_clause_fraction = stats ? stats->mc_frac : 0.0;
  const auto m = static_cast<std::uint64_t>(std::llround(static_cast<double>(alpha) * n));
  for (std::uint32_t s = 0; s < samples; ++s) {
    const auto g = sample_er_graph(n, m, k, rng.with_stream(rng.stream + s));
    const auto cd = strip_core(g);
    out.mean_core_qubit_fraction += static_cast<double>(cd.core_qubits.size()) / n;
    out.mean_core_clause_fraction += static_cast<double>(cd.core_clauses.size()) / n;
    if (cd.core_qubits.size() + cd.hair_qubits.size() != g.n_qubits ||
        cd.core_clauses.size() + cd.hair_clauses.size() != g.clauses.size())
      out.handshake_ok = false;
    if (!cd.core_clauses.empty()) {
      const auto core = induced_core_graph(g, cd);
      for (auto d : core.degrees())
        if (d < 2) out.handshake_ok = false;
    }
  }
  out.mean_core_qubit_fraction /= samples;
  out.mean_core_clause_fraction /= samples;
  return out;
}

}  // namespace qsat
