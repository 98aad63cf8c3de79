#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "core.hpp"
#include "errors.hpp"
#include "hypergraph.hpp"
#include "rng.hpp"

namespace qsat {

using BigInt = boost::multiprecision::cpp_int;

// Clause/qubit incidence restricted to a subgraph. Original indices are kept
// in the id maps; adjacency uses local indices internally.
struct BipartiteIncidence {
  std::vector<std::uint32_t> clause_ids;               // local clause -> original id
  std::vector<std::uint32_t> qubit_ids;                // local qubit -> original id
  std::vector<std::vector<std::uint32_t>> clause_adj;  // local clause -> local qubits

  std::size_t clause_count() const { return clause_ids.size(); }
  std::size_t qubit_count() const { return qubit_ids.size(); }

  static BipartiteIncidence from_graph(const InteractionGraph& g) {
    std::vector<std::uint32_t> all_clauses(g.clauses.size());
    for (std::uint32_t i = 0; i < all_clauses.size(); ++i) all_clauses[i] = i;
    std::vector<std::uint32_t> all_qubits(g.n_qubits);
    for (std::uint32_t i = 0; i < all_qubits.size(); ++i) all_qubits[i] = i;
    return restricted(g, all_clauses, all_qubits);
  }

  static BipartiteIncidence from_core(const InteractionGraph& g, const CoreDecomposition& cd) {
    return restricted(g, cd.core_clauses, cd.core_qubits);
  }

  // Keep only the given clauses and the given qubits; clause members outside
  // the allowed qubit set are dropped from adjacency (a clause may end up with
  // no candidates, which simply makes a covering impossible).
  static BipartiteIncidence restricted(const InteractionGraph& g,
                                       const std::vector<std::uint32_t>& clause_subset,
                                       const std::vector<std::uint32_t>& allowed_qubits) {
    BipartiteIncidence v;
    std::vector<std::uint32_t> local(g.n_qubits, UINT32_MAX);
    v.qubit_ids = allowed_qubits;
    std::sort(v.qubit_ids.begin(), v.qubit_ids.end());
    for (std::uint32_t i = 0; i < v.qubit_ids.size(); ++i) {
      if (v.qubit_ids[i] >= g.n_qubits) throw ContractViolation("qubit id out of range");
      local[v.qubit_ids[i]] = i;
    }
    v.clause_ids = clause_subset;
    std::sort(v.clause_ids.begin(), v.clause_ids.end());
    for (auto m : v.clause_ids) {
      if (m >= g.clauses.size()) throw ContractViolation("clause id out of range");
      std::vector<std::uint32_t> adj;
      for (auto q : g.clauses[m])
        if (local[q] != UINT32_MAX) adj.push_back(local[q]);
      v.clause_adj.push_back(std::move(adj));
    }
    return v;
  }
};

// Injective clause -> qubit assignment. Pairs hold original ids, sorted by clause.
struct DimerCovering {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;

  std::optional<std::uint32_t> qubit_of(std::uint32_t clause) const {
    for (const auto& [c, q] : pairs)
      if (c == clause) return q;
    return std::nullopt;
  }
};

// Checks the assignment against the view: every pair an incidence edge, each
// clause at most once, each qubit at most once.
inline void validate_covering(const BipartiteIncidence& v, const DimerCovering& dc) {
  std::set<std::uint32_t> cs, qs;
  for (const auto& [c, q] : dc.pairs) {
    if (!cs.insert(c).second) throw ContractViolation("clause assigned twice");
    if (!qs.insert(q).second) throw ContractViolation("qubit used twice");
    const auto it = std::lower_bound(v.clause_ids.begin(), v.clause_ids.end(), c);
    if (it == v.clause_ids.end() || *it != c)
      throw ContractViolation("covering references a clause outside the view");
    const auto lc = static_cast<std::size_t>(it - v.clause_ids.begin());
    const auto qit = std::lower_bound(v.qubit_ids.begin(), v.qubit_ids.end(), q);
    if (qit == v.qubit_ids.end() || *qit != q)
      throw ContractViolation("covering references a qubit outside the view");
    const auto lq = static_cast<std::uint32_t>(qit - v.qubit_ids.begin());
    bool edge = false;
    for (auto x : v.clause_adj[lc]) edge = edge || (x == lq);
    if (!edge) throw ContractViolation("covering pair is not an incidence edge");
  }
}

namespace detail {

// Hopcroft-Karp maximum matching, clause side left. Returns match arrays in
// local indices (UINT32_MAX = unmatched).
struct HkResult {
  std::vector<std::uint32_t> clause_match;  // local clause -> local qubit
  std::vector<std::uint32_t> qubit_match;   // local qubit -> local clause
  std::size_t size = 0;
};

inline HkResult hopcroft_karp(const BipartiteIncidence& v) {
  constexpr std::uint32_t NONE = UINT32_MAX;
  const std::size_t L = v.clause_count(), R = v.qubit_count();
  HkResult res;
  res.clause_match.assign(L, NONE);
  res.qubit_match.assign(R, NONE);
  std::vector<std::uint32_t> dist(L);
  const std::uint32_t INF = UINT32_MAX;

  auto bfs = [&]() {
    std::queue<std::uint32_t> q;
    for (std::uint32_t u = 0; u < L; ++u) {
      if (res.clause_match[u] == NONE) {
        dist[u] = 0;
        q.push(u);
      } else {
        dist[u] = INF;
      }
    }
    bool found = false;
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (auto w : v.clause_adj[u]) {
        const auto next = res.qubit_match[w];
        if (next == NONE) {
          found = true;
        } else if (dist[next] == INF) {
          dist[next] = dist[u] + 1;
          q.push(next);
        }
      }
    }
    return found;
  };

  std::function<bool(std::uint32_t)> dfs = [&](std::uint32_t u) {
    for (auto w : v.clause_adj[u]) {
      const auto next = res.qubit_match[w];
      if (next == NONE || (dist[next] == dist[u] + 1 && dfs(next))) {
        res.clause_match[u] = w;
        res.qubit_match[w] = u;
        return true;
      }
    }
    dist[u] = INF;
    return false;
  };

  while (bfs())
    for (std::uint32_t u = 0; u < L; ++u)
      if (res.clause_match[u] == NONE && dfs(u)) ++res.size;
  return res;
}

}  // namespace detail

// True iff every clause in the view can get its own qubit.
inline bool has_covering(const BipartiteIncidence& v) {
  return detail::hopcroft_karp(v).size == v.clause_count();
}

// Maximum partial covering plus the count of clauses left uncovered.
inline std::pair<DimerCovering, std::size_t> maximum_covering(const BipartiteIncidence& v) {
  const auto hk = detail::hopcroft_karp(v);
  DimerCovering dc;
  for (std::uint32_t u = 0; u < v.clause_count(); ++u)
    if (hk.clause_match[u] != UINT32_MAX)
      dc.pairs.emplace_back(v.clause_ids[u], v.qubit_ids[hk.clause_match[u]]);
  return {std::move(dc), v.clause_count() - hk.size};
}

struct EnumerationOptions {
  // Stop counting once the count exceeds this bound (0 = count exactly).
  BigInt count_bound = 0;
  // Keep at most this many materialized coverings (0 = keep none).
  std::uint64_t list_cap = 0;
};

struct EnumerationResult {
  BigInt count = 0;
  bool saturated = false;  // count_bound hit; `count` is then a lower bound
  std::vector<DimerCovering> coverings;

  double log_count() const {
    if (count == 0) return -std::numeric_limits<double>::infinity();
    // cpp_int -> double is fine far beyond any enumerable count
    return std::log(count.convert_to<double>());
  }
};

// Exact backtracking count of full coverings. Branches on the uncovered
// clause with the fewest free qubits (fail-first), so an unsatisfiable
// sub-view dies immediately at a zero-candidate clause.
inline EnumerationResult enumerate_coverings(const BipartiteIncidence& v,
                                             const EnumerationOptions& opt = {}) {
  EnumerationResult res;
  const std::size_t L = v.clause_count();
  if (L == 0) {
    res.count = 1;  // the empty covering
    if (opt.list_cap > 0) res.coverings.push_back({});
    return res;
  }
  std::vector<char> clause_done(L, 0);
  std::vector<char> qubit_used(v.qubit_count(), 0);
  std::vector<std::uint32_t> chosen(L, UINT32_MAX);

  std::function<void(std::size_t)> rec = [&](std::size_t covered) {
    if (res.saturated) return;
    if (covered == L) {
      ++res.count;
      if (opt.list_cap > 0 && res.coverings.size() < opt.list_cap) {
        DimerCovering dc;
        for (std::uint32_t u = 0; u < L; ++u)
          dc.pairs.emplace_back(v.clause_ids[u], v.qubit_ids[chosen[u]]);
        res.coverings.push_back(std::move(dc));
      }
      if (opt.count_bound > 0 && res.count > opt.count_bound) res.saturated = true;
      return;
    }
    // MRV clause selection; clause adjacency lists are at most k long.
    std::size_t best = SIZE_MAX, best_free = SIZE_MAX;
    for (std::size_t u = 0; u < L; ++u) {
      if (clause_done[u]) continue;
      std::size_t free = 0;
      for (auto w : v.clause_adj[u]) free += !qubit_used[w];
      if (free < best_free) {
        best_free = free;
        best = u;
        if (free == 0) break;
      }
    }
    if (best_free == 0) return;  // dead end
    clause_done[best] = 1;
    for (auto w : v.clause_adj[best]) {
      if (qubit_used[w]) continue;
      qubit_used[w] = 1;
      chosen[best] = w;
      rec(covered + 1);
      qubit_used[w] = 0;
      if (res.saturated) break;
    }
    chosen[best] = UINT32_MAX;
    clause_done[best] = 0;
  };
  rec(0);
  return res;
}

// ---------------------------------------------------------------------------
// Loop structure of a covering pair

// Node in the incidence graph; clauses and qubits carry original ids.
struct LoopNode {
  bool is_clause = false;
  std::uint32_t id = 0;
  friend auto operator<=>(const LoopNode&, const LoopNode&) = default;
};

struct LoopComponent {
  std::vector<LoopNode> nodes;  // alternating clause/qubit walk order
  bool is_cycle = false;
  std::uint32_t edge_count = 0;  // symmetric-difference edges in this component
};

// Symmetric difference of two coverings decomposes into alternating cycles and
// open paths, since every node touches at most one edge per covering.
struct LoopStructure {
  std::vector<LoopComponent> loops;   // cycles
  std::vector<LoopComponent> paths;   // open paths
  std::uint32_t total_length = 0;     // total symmetric-difference edge count
  std::uint32_t differing_sites = 0;  // qubits whose assignment changed
};

inline LoopStructure loop_structure(const BipartiteIncidence& v, const DimerCovering& a,
                                    const DimerCovering& b) {
  validate_covering(v, a);
  validate_covering(v, b);

  // Edge sets keyed by (clause, qubit) original ids.
  std::set<std::pair<std::uint32_t, std::uint32_t>> ea(a.pairs.begin(), a.pairs.end());
  std::set<std::pair<std::uint32_t, std::uint32_t>> eb(b.pairs.begin(), b.pairs.end());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> sym;
  for (const auto& e : ea)
    if (!eb.count(e)) sym.push_back(e);
  for (const auto& e : eb)
    if (!ea.count(e)) sym.push_back(e);

  LoopStructure out;
  out.total_length = static_cast<std::uint32_t>(sym.size());

  // Qubits assigned in one covering but differently (or not at all) in the other.
  std::map<std::uint32_t, std::uint32_t> qa, qb;
  for (const auto& [c, q] : a.pairs) qa[q] = c;
  for (const auto& [c, q] : b.pairs) qb[q] = c;
  std::set<std::uint32_t> sites;
  for (const auto& [q, c] : qa)
    if (!qb.count(q) || qb[q] != c) sites.insert(q);
  for (const auto& [q, c] : qb)
    if (!qa.count(q) || qa[q] != c) sites.insert(q);
  out.differing_sites = static_cast<std::uint32_t>(sites.size());

  // Adjacency over symmetric-difference nodes; degree <= 2 everywhere.
  std::map<LoopNode, std::vector<LoopNode>> adj;
  auto cnode = [](std::uint32_t id) { return LoopNode{true, id}; };
  auto qnode = [](std::uint32_t id) { return LoopNode{false, id}; };
  for (const auto& [c, q] : sym) {
    adj[cnode(c)].push_back(qnode(q));
    adj[qnode(q)].push_back(cnode(c));
  }

  std::set<LoopNode> visited;
  auto walk = [&](LoopNode start) {
    LoopComponent comp;
    LoopNode prev{false, UINT32_MAX};
    LoopNode cur = start;
    while (true) {
      comp.nodes.push_back(cur);
      visited.insert(cur);
      LoopNode next{false, UINT32_MAX};
      bool advanced = false;
      for (const auto& nb : adj.at(cur)) {
        if (comp.nodes.size() > 1 && nb == prev) {
          prev = LoopNode{false, UINT32_MAX};  // consume the back-edge once
          continue;
        }
        if (nb == start && comp.nodes.size() > 2) {
          comp.is_cycle = true;
          advanced = false;
          break;
        }
        if (!visited.count(nb)) {
          next = nb;
          advanced = true;
          break;
        }
      }
      if (comp.is_cycle || !advanced) break;
      prev = cur;
      cur = next;
    }
    comp.edge_count = static_cast<std::uint32_t>(comp.nodes.size() - (comp.is_cycle ? 0 : 1));
    return comp;
  };

  // Open paths first (start from degree-1 nodes), then remaining cycles.
  for (const auto& [node, nbrs] : adj) {
    if (nbrs.size() == 1 && !visited.count(node)) out.paths.push_back(walk(node));
  }
  for (const auto& [node, nbrs] : adj) {
    if (!visited.count(node)) out.loops.push_back(walk(node));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Product states

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Spinor = std::array<std::complex<double>, 2>;

// Product state over n qubits; unset sites are FREE (any value keeps the
// energy property that produced the state).
struct ProductState {
  std::vector<std::optional<Spinor>> sites;

  std::size_t size() const { return sites.size(); }
  std::size_t free_count() const {
    std::size_t c = 0;
    for (const auto& s : sites) c += !s.has_value();
    return c;
  }

  // Copy with every FREE site drawn Haar-random.
  ProductState materialized(SplitRng& r) const {
    ProductState out = *this;
    for (auto& s : out.sites)
      if (!s) {
        auto v = haar_state(2, r);
        s = Spinor{v[0], v[1]};
      }
    return out;
  }
};

enum class FreePolicy { ExcludeFree, RequireAssigned };

// Sum over sites of log |<a_i|b_i>|; -inf when any compared pair is orthogonal.
inline double log_overlap(const ProductState& a, const ProductState& b,
                          FreePolicy policy = FreePolicy::ExcludeFree) {
  if (a.size() != b.size()) throw ContractViolation("states differ in qubit count");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.sites[i] || !b.sites[i]) {
      if (policy == FreePolicy::RequireAssigned)
        throw ContractViolation("FREE site under RequireAssigned policy");
      continue;
    }
    const auto& x = *a.sites[i];
    const auto& y = *b.sites[i];
    const std::complex<double> ip = std::conj(x[0]) * y[0] + std::conj(x[1]) * y[1];
    const double mag = std::abs(ip);
    if (mag == 0.0) return kNegInf;
    total += std::log(mag);
  }
  return total;
}

namespace detail {

// Spinor orthogonal to the conjugated linear form (c0, c1): kills c0*x0 + c1*x1.
inline Spinor orthogonal_solution(std::complex<double> c0, std::complex<double> c1) {
  const double n2 = std::norm(c0) + std::norm(c1);
  if (n2 < 1e-24) throw DegenerateProjectorError("clause condition vanished on the dimer qubit");
  const double inv = 1.0 / std::sqrt(n2);
  return Spinor{-c1 * inv, c0 * inv};
}

}  // namespace detail

// Zero-energy product state from a full dimer covering.
//
// Product mode: each clause's dimer qubit is set orthogonal to that clause's
// local factor; all unmatched qubits stay FREE (any values keep E = 0).
//
// Generic mode: clause conditions couple all k qubits, so the dimer qubit is
// solved from concrete values of the other k-1. Those values come from earlier
// clauses in the dimer orientation or, for unmatched qubits inside some
// clause, from Haar draws off `fill` (such qubits are returned assigned, not
// FREE, because the construction pins them). Only qubits outside every clause
// stay FREE. A cyclic orientation has no propagation order and is rejected.
inline ProductState build_product_state(const InteractionGraph& g, const ProjectorSet& p,
                                        const DimerCovering& dc, RngSpec fill) {
  if (p.clause_count() != g.clauses.size())
    throw ContractViolation("projector set size != clause count");
  std::vector<std::uint32_t> dimer_of(g.clauses.size(), UINT32_MAX);
  std::vector<char> is_dimer_qubit(g.n_qubits, 0);
  {
    std::set<std::uint32_t> cs, qs;
    for (const auto& [c, q] : dc.pairs) {
      if (c >= g.clauses.size() || q >= g.n_qubits)
        throw ContractViolation("covering index out of range");
      if (!cs.insert(c).second || !qs.insert(q).second)
        throw ContractViolation("covering not injective");
      bool member = false;
      for (auto x : g.clauses[c]) member = member || (x == q);
      if (!member) throw ContractViolation("dimer qubit not in its clause");
      dimer_of[c] = q;
      is_dimer_qubit[q] = 1;
    }
    if (cs.size() != g.clauses.size())
      throw ContractViolation("covering must assign every clause");
  }

  ProductState st;
  st.sites.assign(g.n_qubits, std::nullopt);

  if (p.mode == ProjectorMode::Product) {
    for (std::uint32_t m = 0; m < g.clauses.size(); ++m) {
      const auto& c = g.clauses[m];
      const std::size_t pos =
          std::lower_bound(c.begin(), c.end(), dimer_of[m]) - c.begin();
      const auto& f = p.product[m][pos];
      st.sites[dimer_of[m]] = detail::orthogonal_solution(std::conj(f[0]), std::conj(f[1]));
    }
    return st;
  }

  // Generic mode. Assign Haar values to unmatched qubits that occur in clauses.
  SplitRng r(fill);
  std::vector<char> in_clause(g.n_qubits, 0);
  for (const auto& c : g.clauses)
    for (auto x : c) in_clause[x] = 1;
  for (std::uint32_t q = 0; q < g.n_qubits; ++q) {
    if (is_dimer_qubit[q] || !in_clause[q]) continue;
    auto v = haar_state(2, r);
    st.sites[q] = Spinor{v[0], v[1]};
  }

  // Orientation DAG: clause m waits on the clause owning each of its non-dimer
  // matched qubits. Kahn's algorithm; leftovers mean a cycle.
  std::vector<std::uint32_t> owner(g.n_qubits, UINT32_MAX);
  for (std::uint32_t m = 0; m < g.clauses.size(); ++m) owner[dimer_of[m]] = m;
  std::vector<std::vector<std::uint32_t>> dependents(g.clauses.size());
  std::vector<std::uint32_t> indeg(g.clauses.size(), 0);
  for (std::uint32_t m = 0; m < g.clauses.size(); ++m)
    for (auto q : g.clauses[m]) {
      if (q == dimer_of[m] || owner[q] == UINT32_MAX) continue;
      dependents[owner[q]].push_back(m);
      ++indeg[m];
    }
  std::queue<std::uint32_t> ready;
  for (std::uint32_t m = 0; m < g.clauses.size(); ++m)
    if (indeg[m] == 0) ready.push(m);
  std::size_t processed = 0;

  while (!ready.empty()) {
    const auto m = ready.front();
    ready.pop();
    ++processed;
    const auto& c = g.clauses[m];
    const std::size_t dim_pos =
        std::lower_bound(c.begin(), c.end(), dimer_of[m]) - c.begin();
    // Contract the clause vector against the k-1 known qubits:
    // c_b = sum_idx conj(phi[idx]) * prod_{j != dim_pos} psi_j[bit_j(idx)], b = dimer bit.
    const auto& phi = p.generic[m];
    std::complex<double> cb[2] = {0.0, 0.0};
    const std::size_t dim = std::size_t(1) << g.k;
    for (std::size_t idx = 0; idx < dim; ++idx) {
      std::complex<double> w = std::conj(phi[idx]);
      for (std::size_t j = 0; j < c.size(); ++j) {
        if (j == dim_pos) continue;
        w *= (*st.sites[c[j]])[(idx >> j) & 1u];
      }
      cb[(idx >> dim_pos) & 1u] += w;
    }
    st.sites[dimer_of[m]] = detail::orthogonal_solution(cb[0], cb[1]);
    for (auto nxt : dependents[m])
      if (--indeg[nxt] == 0) ready.push(nxt);
  }
  if (processed != g.clauses.size())
    throw UnsupportedInstanceError(
        "dimer orientation is cyclic; generic propagation has no valid order");
  return st;
}

}  // namespace qsat
