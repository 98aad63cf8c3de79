#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "dimer.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace qsat {

// ---------------------------------------------------------------------------
// Message updates for the monomer-dimer measure with fugacity on the clause/
// qubit incidence graph. Both directions share one functional form:
//   q = fugacity / (1 + fugacity + sum_in l/(1-l)).
// A saturated input (l = 1) forces q = 0: the neighbor already consumes its
// node with certainty.

inline double cavity_update(std::span<const double> incoming, double fugacity) {
  if (!(fugacity > 0.0)) throw ContractViolation("fugacity must be > 0");
  double s = 0.0;
  for (double l : incoming) {
    if (l < 0.0 || l > 1.0) throw ContractViolation("message outside [0,1]");
    if (l == 1.0) return 0.0;
    s += l / (1.0 - l);
  }
  return fugacity / (1.0 + fugacity + s);
}

// Qubit -> clause direction: inputs are the qubit's other d-1 clause messages.
inline double update_q_i(std::span<const double> incoming, double fugacity) {
  return cavity_update(incoming, fugacity);
}

// Clause -> qubit direction: inputs are the clause's other k-1 qubit messages.
inline double update_q_a(std::span<const double> incoming, double fugacity) {
  return cavity_update(incoming, fugacity);
}

// P(node is covered) given all its incoming messages:
//   sum_b l_b prod_{c != b} (1-l_c) / [same + prod_b (1-l_b)].
// Any saturated input pins the node covered.
inline double occupancy(std::span<const double> incoming) {
  for (double l : incoming)
    if (l == 1.0) return 1.0;
  double prod = 1.0, num = 0.0;
  for (double l : incoming) prod *= (1.0 - l);
  for (std::size_t b = 0; b < incoming.size(); ++b) {
    double t = incoming[b];
    for (std::size_t c = 0; c < incoming.size(); ++c)
      if (c != b) t *= (1.0 - incoming[c]);
    num += t;
  }
  return num / (num + prod);
}

namespace detail {

// log[ prod(1-l) + sum_b l_b prod_{c != b}(1-l_c) ]; vertex term of the Bethe
// free energy for a node with the given incoming messages.
inline double vertex_term(std::span<const double> incoming, const char* where) {
  double prod = 1.0, num = 0.0;
  for (double l : incoming) prod *= (1.0 - l);
  for (std::size_t b = 0; b < incoming.size(); ++b) {
    double t = incoming[b];
    for (std::size_t c = 0; c < incoming.size(); ++c)
      if (c != b) t *= (1.0 - incoming[c]);
    num += t;
  }
  const double arg = prod + num;
  if (!(arg > 0.0))
    throw NumericalDomainError(std::string("free-energy log argument <= 0 in ") + where);
  return std::log(arg);
}

// log[ (1-qa)(1-qi) + qa*qi/fugacity ]; bond term.
inline double bond_term(double q_clause_side, double q_qubit_side, double fugacity,
                        const char* where) {
  const double arg =
      (1.0 - q_clause_side) * (1.0 - q_qubit_side) + q_clause_side * q_qubit_side / fugacity;
  if (!(arg > 0.0))
    throw NumericalDomainError(std::string("free-energy log argument <= 0 in ") + where);
  return std::log(arg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-instance belief propagation

// Directed messages on the bonds of an incidence view.
struct BondMessages {
  // bonds[b] = (local clause, local qubit)
  std::vector<std::pair<std::uint32_t, std::uint32_t>> bonds;
  std::vector<std::vector<std::uint32_t>> clause_bonds;  // local clause -> bond ids
  std::vector<std::vector<std::uint32_t>> qubit_bonds;   // local qubit -> bond ids
  std::vector<double> to_clause;  // qubit -> clause message per bond
  std::vector<double> to_qubit;   // clause -> qubit message per bond

  static BondMessages build(const BipartiteIncidence& v) {
    BondMessages bm;
    bm.clause_bonds.resize(v.clause_count());
    bm.qubit_bonds.resize(v.qubit_count());
    for (std::uint32_t c = 0; c < v.clause_count(); ++c)
      for (auto q : v.clause_adj[c]) {
        bm.clause_bonds[c].push_back(static_cast<std::uint32_t>(bm.bonds.size()));
        bm.qubit_bonds[q].push_back(static_cast<std::uint32_t>(bm.bonds.size()));
        bm.bonds.emplace_back(c, q);
      }
    bm.to_clause.assign(bm.bonds.size(), 0.5);
    bm.to_qubit.assign(bm.bonds.size(), 0.5);
    return bm;
  }
};

// Five Bethe contributions. The message identities make the two mixed bond
// sums equal the pure bond sum, so total() = clauses + qubits - bonds.
struct BetheBreakdown {
  double clause_sum = 0.0;       // sum over clause vertices
  double qubit_sum = 0.0;        // sum over qubit vertices
  double bond_sum = 0.0;         // sum over bond vertices
  double qubit_bond_sum = 0.0;   // sum over qubit-bond links
  double clause_bond_sum = 0.0;  // sum over clause-bond links

  double total() const {
    return clause_sum + qubit_sum + bond_sum - qubit_bond_sum - clause_bond_sum;
  }
};

inline BetheBreakdown bethe_free_energy(const BipartiteIncidence& v, const BondMessages& bm,
                                        double fugacity) {
  BetheBreakdown out;
  std::vector<double> in;
  for (std::uint32_t c = 0; c < v.clause_count(); ++c) {
    in.clear();
    for (auto b : bm.clause_bonds[c]) in.push_back(bm.to_clause[b]);
    out.clause_sum += detail::vertex_term(in, "clause vertex term");
  }
  for (std::uint32_t q = 0; q < v.qubit_count(); ++q) {
    in.clear();
    for (auto b : bm.qubit_bonds[q]) in.push_back(bm.to_qubit[b]);
    out.qubit_sum += detail::vertex_term(in, "qubit vertex term");
  }
  for (std::uint32_t b = 0; b < bm.bonds.size(); ++b) {
    out.bond_sum += detail::bond_term(bm.to_qubit[b], bm.to_clause[b], fugacity, "bond term");
    // Mixed links relay the opposing vertex message unchanged, so they reuse
    // the same expression with the relayed value substituted.
    out.qubit_bond_sum +=
        detail::bond_term(bm.to_qubit[b], bm.to_clause[b], fugacity, "qubit-bond term");
    out.clause_bond_sum +=
        detail::bond_term(bm.to_qubit[b], bm.to_clause[b], fugacity, "clause-bond term");
  }
  return out;
}

// Summary spec shared by every cavity estimator. The identity
// entropy_density = free_energy_density - core_density*occupancy*log(fugacity)
// holds to round-off by construction; covering_entropy_density drops the
// occupancy factor and is the estimator that tends to the covering count as
// fugacity -> infinity.
// Legendre transform of F at the working fugacity: S/N = F/N - beta <n_a> log(lambda).
inline double entropy_density(double free_energy_density, double occupancy, double density,
                              double fugacity) {
  return free_energy_density - density * occupancy * std::log(fugacity);
}

// Covering-count estimate, exact only in the saturated limit where every
// clause is covered: S/N = F/N - beta log(lambda). This is the quantity the
// large-lambda extrapolation acts on.
inline double covering_entropy_density(double free_energy_density, double density,
                                       double fugacity) {
  return free_energy_density - density * std::log(fugacity);
}

struct CavityReport {
  double core_density = 0.0;  // clauses per qubit in the analyzed (sub)graph
  double fugacity = 0.0;
  double free_energy_density = 0.0;  // F / N_c
  double occupancy = 0.0;            // mean clause coverage
  double entropy_density = 0.0;
  double covering_entropy_density = 0.0;
  bool converged = false;
  std::uint32_t sweeps = 0;

  void finalize() {
    entropy_density =
        qsat::entropy_density(free_energy_density, occupancy, core_density, fugacity);
    covering_entropy_density =
        qsat::covering_entropy_density(free_energy_density, core_density, fugacity);
  }
};

struct BpOptions {
  double tol = 1e-10;
  std::uint32_t max_sweeps = 1000;
  double damping = 0.5;  // new = (1-damping)*update + damping*old
};

struct BpResult {
  BondMessages messages;
  bool converged = false;
  std::uint32_t sweeps = 0;
  double max_delta = 0.0;  // last sweep's largest message change
  BetheBreakdown bethe;
  CavityReport report;
};

// Random-order asynchronous sweeps until the largest single-message change in
// a sweep drops below tol. Messages double as the Bethe inputs afterwards.
inline BpResult single_instance_bp(const BipartiteIncidence& v, double fugacity,
                                   const BpOptions& opt, RngSpec rng) {
  if (!(fugacity > 0.0)) throw ContractViolation("fugacity must be > 0");
  if (opt.damping < 0.0 || opt.damping >= 1.0)
    throw ContractViolation("damping must lie in [0,1)");
  BpResult res;
  res.messages = BondMessages::build(v);
  auto& bm = res.messages;
  const std::size_t nb = bm.bonds.size();
  SplitRng r(rng);

  std::vector<std::uint32_t> order(2 * nb);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> in;

  for (std::uint32_t sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    // Fisher-Yates over both directions
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[r.uniform_below(i)]);
    double delta = 0.0;
    for (auto idx : order) {
      const bool qubit_side = idx < nb;  // updates the qubit -> clause message
      const std::uint32_t b = qubit_side ? idx : idx - static_cast<std::uint32_t>(nb);
      in.clear();
      if (qubit_side) {
        for (auto ob : bm.qubit_bonds[bm.bonds[b].second])
          if (ob != b) in.push_back(bm.to_qubit[ob]);
        const double nv = (1.0 - opt.damping) * update_q_i(in, fugacity) +
                          opt.damping * bm.to_clause[b];
        delta = std::max(delta, std::abs(nv - bm.to_clause[b]));
        bm.to_clause[b] = nv;
      } else {
        for (auto ob : bm.clause_bonds[bm.bonds[b].first])
          if (ob != b) in.push_back(bm.to_clause[ob]);
        const double nv = (1.0 - opt.damping) * update_q_a(in, fugacity) +
                          opt.damping * bm.to_qubit[b];
        delta = std::max(delta, std::abs(nv - bm.to_qubit[b]));
        bm.to_qubit[b] = nv;
      }
    }
    res.sweeps = sweep;
    res.max_delta = delta;
    if (delta < opt.tol) {
      res.converged = true;
      break;
    }
  }

  res.bethe = bethe_free_energy(v, bm, fugacity);
  CavityReport rep;
  rep.fugacity = fugacity;
  rep.core_density = v.qubit_count() == 0
                         ? 0.0
                         : static_cast<double>(v.clause_count()) / v.qubit_count();
  rep.free_energy_density =
      v.qubit_count() == 0 ? 0.0 : res.bethe.total() / static_cast<double>(v.qubit_count());
  double occ = 0.0;
  std::vector<double> in2;
  for (std::uint32_t c = 0; c < v.clause_count(); ++c) {
    in2.clear();
    for (auto b : bm.clause_bonds[c]) in2.push_back(bm.to_clause[b]);
    occ += occupancy(in2);
  }
  rep.occupancy = v.clause_count() == 0 ? 0.0 : occ / v.clause_count();
  rep.converged = res.converged;
  rep.sweeps = res.sweeps;
  rep.finalize();
  res.report = rep;
  return res;
}

// Diagnostic only: drives the fugacity to 1e12 with no damping, approximating
// a hard covering constraint. On loopy cores the iteration is expected to
// oscillate rather than converge; callers inspect `converged` and `max_delta`.
inline BpResult hard_covering_diagnostic(const BipartiteIncidence& v, BpOptions opt,
                                         RngSpec rng) {
  opt.damping = 0.0;
  return single_instance_bp(v, 1e12, opt, rng);
}

// ---------------------------------------------------------------------------
// Population dynamics over a degree ensemble

struct PopulationParams {
  std::uint32_t population = 10000;
  std::uint32_t sweeps = 4000;          // one sweep = `population` replacements per side
  double burn_in_fraction = 0.75;       // observables averaged after this point
  std::uint32_t samples_per_sweep = 2000;
  double drift_tolerance = 1e-2;        // first/second half disagreement bound
};

struct PopulationReport {
  CavityReport report;
  double drift = 0.0;  // |second half - first half| of the entropy estimate
};

// Mean-field fixed point of the cavity equations for an uncorrelated random
// ensemble: qubit degrees follow `law`, clauses have arity law.k. Incoming
// degrees are size-biased (a random bond sees degree d with weight d P(d)).
inline PopulationReport population_dynamics(const DegreeLaw& law, double fugacity,
                                            const PopulationParams& pp, RngSpec rng) {
  if (!(fugacity > 0.0)) throw ContractViolation("fugacity must be > 0");
  if (pp.population < 2 || pp.sweeps < 4) throw ContractViolation("population too small");
  const std::uint32_t k = law.k;
  if (k < 2) throw ContractViolation("arity must be >= 2");

  // CDFs for plain and size-biased degree draws.
  std::vector<double> plain_cdf(law.pmf.size()), biased_cdf(law.pmf.size());
  double acc = 0.0, bacc = 0.0;
  const double mean_deg = law.mean();
  if (!(mean_deg > 0.0)) throw ContractViolation("degree law has zero mean");
  for (std::size_t d = 0; d < law.pmf.size(); ++d) {
    acc += law.pmf[d];
    bacc += static_cast<double>(d) * law.pmf[d] / mean_deg;
    plain_cdf[d] = acc;
    biased_cdf[d] = bacc;
  }
  SplitRng r(rng);
  auto draw_from = [&](const std::vector<double>& cdf) {
    const double u = r.uniform01();
    return static_cast<std::uint32_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  };

  // Warm start at the scalar mean-field fixed point (mean excess degree in
  // place of the degree draw); large fugacities equilibrate far faster than
  // from a cold uniform population.
  double dex_num = 0.0;
  for (std::size_t d = 0; d < law.pmf.size(); ++d)
    dex_num += static_cast<double>(d) * static_cast<double>(d - (d ? 1 : 0)) * law.pmf[d];
  const double dex = dex_num / mean_deg;
  double qi = 0.5, qa = 0.5;
  for (int it = 0; it < 2000; ++it) {
    const double nqi = fugacity / (1.0 + fugacity + dex * qa / (1.0 - qa));
    const double nqa =
        fugacity / (1.0 + fugacity + static_cast<double>(k - 1) * qi / (1.0 - qi));
    qi = 0.5 * qi + 0.5 * nqi;
    qa = 0.5 * qa + 0.5 * nqa;
  }
  std::vector<double> qubit_pop(pp.population, qi), clause_pop(pp.population, qa);

  const auto burn = static_cast<std::uint32_t>(pp.burn_in_fraction * pp.sweeps);
  const double beta = law.density();

  double sum_f = 0.0, sum_occ = 0.0, sum_s = 0.0;
  std::uint64_t n_obs = 0;
  double half1 = 0.0, half2 = 0.0;
  std::uint64_t n1 = 0, n2 = 0;
  std::vector<double> in;

  for (std::uint32_t sweep = 0; sweep < pp.sweeps; ++sweep) {
    for (std::uint32_t t = 0; t < pp.population; ++t) {
      // qubit side: excess inputs from a size-biased degree
      const std::uint32_t d = draw_from(biased_cdf);
      in.clear();
      for (std::uint32_t j = 0; j + 1 < d; ++j)
        in.push_back(clause_pop[r.uniform_below(pp.population)]);
      qubit_pop[r.uniform_below(pp.population)] = update_q_i(in, fugacity);
      // clause side: k-1 inputs
      in.clear();
      for (std::uint32_t j = 0; j + 1 < k; ++j)
        in.push_back(qubit_pop[r.uniform_below(pp.population)]);
      clause_pop[r.uniform_below(pp.population)] = update_q_a(in, fugacity);
    }
    if (sweep < burn) continue;

    // Observables: F/N = E_d[F_qubit] + beta*E[F_clause] - k*beta*E[F_bond].
    double f_est = 0.0, occ_est = 0.0;
    for (std::uint32_t s = 0; s < pp.samples_per_sweep; ++s) {
      in.clear();
      const std::uint32_t dq = draw_from(plain_cdf);
      for (std::uint32_t j = 0; j < dq; ++j)
        in.push_back(clause_pop[r.uniform_below(pp.population)]);
      const double fi = detail::vertex_term(in, "population qubit term");
      in.clear();
      for (std::uint32_t j = 0; j < k; ++j)
        in.push_back(qubit_pop[r.uniform_below(pp.population)]);
      const double fa = detail::vertex_term(in, "population clause term");
      occ_est += occupancy(in);
      const double fb = detail::bond_term(clause_pop[r.uniform_below(pp.population)],
                                          qubit_pop[r.uniform_below(pp.population)], fugacity,
                                          "population bond term");
      f_est += fi + beta * fa - static_cast<double>(k) * beta * fb;
    }
    f_est /= pp.samples_per_sweep;
    occ_est /= pp.samples_per_sweep;
    sum_f += f_est;
    sum_occ += occ_est;
    sum_s += f_est - beta * std::log(fugacity);
    ++n_obs;
    const bool second_half = (sweep - burn) * 2 >= (pp.sweeps - burn);
    (second_half ? half2 : half1) += f_est - beta * std::log(fugacity);
    ++(second_half ? n2 : n1);
  }

  PopulationReport out;
  out.report.fugacity = fugacity;
  out.report.core_density = beta;
  out.report.free_energy_density = sum_f / static_cast<double>(n_obs);
  out.report.occupancy = sum_occ / static_cast<double>(n_obs);
  out.report.sweeps = pp.sweeps;
  out.drift = std::abs(half2 / static_cast<double>(n2) - half1 / static_cast<double>(n1));
  out.report.converged = out.drift <= pp.drift_tolerance;
  out.report.finalize();
  return out;
}

// ---------------------------------------------------------------------------
// Regular-ensemble closed form (arity k, qubit degree d = k)

struct RegularFixedPoint {
  double q_star = 0.0;
  CavityReport report;
};

// Symmetric fixed point q = fug/(1+fug+(k-1)q/(1-q)), solved by bisection.
// Only k = d is symmetric enough for a single scalar message.
inline RegularFixedPoint regular_fixed_point(double fugacity, std::uint32_t k = 3,
                                             std::uint32_t d = 3) {
  if (k != d) throw ContractViolation("regular fixed point requires d = k");
  if (k < 2) throw ContractViolation("arity must be >= 2");
  if (!(fugacity > 0.0)) throw ContractViolation("fugacity must be > 0");
  auto h = [&](double q) {
    return q * (1.0 + fugacity) + (k - 1.0) * q * q / (1.0 - q) - fugacity;
  };
  double lo = 0.0, hi = 1.0 - 1e-16;
  for (int it = 0; it < 400 && hi - lo > 1e-17; ++it) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) < 0.0 ? lo : hi) = mid;
  }
  const double q = 0.5 * (lo + hi);

  RegularFixedPoint out;
  out.q_star = q;
  std::vector<double> incoming_k(k, q);
  const double f_vertex = detail::vertex_term(incoming_k, "regular vertex term");
  const double f_bond = detail::bond_term(q, q, fugacity, "regular bond term");
  CavityReport& rep = out.report;
  rep.fugacity = fugacity;
  rep.core_density = static_cast<double>(d) / k;  // = 1
  // per qubit: one qubit vertex, d/k clause vertices, d bonds
  rep.free_energy_density =
      f_vertex + (static_cast<double>(d) / k) * f_vertex - static_cast<double>(d) * f_bond;
  rep.occupancy = occupancy(incoming_k);
  rep.converged = true;
  rep.sweeps = 0;
  rep.finalize();
  return out;
}

// ---------------------------------------------------------------------------
// Infinite-fugacity extrapolation

struct ExtrapolationResult {
  double s_infinity = 0.0;
  double coef_half = 0.0;  // coefficient of fugacity^(-1/2)
  double coef_one = 0.0;   // coefficient of fugacity^(-1)
  double rms_residual = 0.0;
  double condition = 0.0;
};

// Least-squares fit of S(fug) = s_inf + a*fug^(-1/2) + b*fug^(-1).
inline ExtrapolationResult extrapolate_lambda(
    const std::vector<std::pair<double, double>>& samples) {
  std::vector<double> distinct;
  for (const auto& [lam, s] : samples) {
    if (!(lam > 0.0)) throw ContractViolation("fugacity must be > 0");
    bool seen = false;
    for (double x : distinct) seen = seen || x == lam;
    if (!seen) distinct.push_back(lam);
  }
  if (distinct.size() < 3)
    throw ContractViolation("need at least 3 distinct fugacities to fit 3 coefficients");

  Eigen::MatrixXd X(samples.size(), 3);
  Eigen::VectorXd y(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double lam = samples[i].first;
    X(i, 0) = 1.0;
    X(i, 1) = 1.0 / std::sqrt(lam);
    X(i, 2) = 1.0 / lam;
    y(i) = samples[i].second;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  ExtrapolationResult res;
  res.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(res.condition < 1e12))
    throw IllConditionedFitError("extrapolation design matrix condition " +
                                 std::to_string(res.condition));
  const Eigen::Vector3d beta = svd.solve(y);
  res.s_infinity = beta(0);
  res.coef_half = beta(1);
  res.coef_one = beta(2);
  const Eigen::VectorXd resid = y - X * beta;
  res.rms_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(samples.size()));
  return res;
}

}  // namespace qsat
